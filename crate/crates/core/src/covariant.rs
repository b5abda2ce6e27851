//! Translation-covariant generator structure: Poisson-type generators on the
//! momentum lattice, Gaussian-type generators at the level of closed moment
//! equations, and a numerical covariance test for arbitrary superoperators.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::generator::{apply_generator_matrix, collinear_measure, rate_prefactor, translate, QlbeGenerator};
use crate::model::{GasModel, MomentumGrid, ParticleModel, PotentialSpec};
use crate::moments::{second_index, MomentSystem, MOMENT_DIM, PHASE_DIM};
use crate::structure_factor::{energy_transfer_1d, s_mb_unchecked};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A linear map on n×n matrices over a momentum grid.
pub trait Superoperator: Sync {
    fn dimension(&self) -> usize;
    fn apply(&self, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>>;
}

fn check_square(m: &DMatrix<Complex64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "matrix is {}x{}, generator acts on {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl Superoperator for QlbeGenerator {
    fn dimension(&self) -> usize {
        self.grid().len()
    }

    fn apply(&self, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        apply_generator_matrix(self, m)
    }
}

/// Momentum-dependent jump function L(Q, P).
pub type JumpFunction = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Real function of momentum.
pub type MomentumFunction = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Finite lattice measure and jump functions of a one-dimensional Poisson
/// generator, with an optional Hamiltonian H(P).
#[derive(Clone, Default)]
pub struct PoissonFormSpec {
    /// (Q, dμ) pairs.
    pub measure: Vec<(f64, f64)>,
    pub jump_functions: Vec<JumpFunction>,
    pub hamiltonian: Option<MomentumFunction>,
}

impl fmt::Debug for PoissonFormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonFormSpec")
            .field("measure", &self.measure)
            .field("jump_functions", &self.jump_functions.len())
            .field("hamiltonian", &self.hamiltonian.is_some())
            .finish()
    }
}

/// Poisson generator tabulated on a grid.
#[derive(Debug, Clone)]
pub struct PoissonGenerator {
    grid: MomentumGrid,
    // one entry per (measure point, jump function)
    offsets: Vec<i64>,
    // amp[t * n + k] = √dμ · L(Q, P_k), zero where k + j leaves the grid
    amp: Vec<Complex64>,
    loss: Vec<f64>,
    energy: Vec<f64>,
}

pub fn build_poisson_generator(spec: &PoissonFormSpec, grid: &MomentumGrid) -> Result<PoissonGenerator> {
    grid.require_one_d("the Poisson generator")?;
    let n = grid.len();
    let dq = grid.spacing();
    let mut offsets = Vec::new();
    let mut amp = Vec::new();
    for &(q, w) in &spec.measure {
        if !(w >= 0.0 && w.is_finite()) {
            return invalid(format!("measure weights must be >= 0 (got {w} at Q = {q})"));
        }
        let j = (q / dq).round();
        if (q - j * dq).abs() > 1e-9 * dq {
            return Err(Error::GridMismatch(format!("Q = {q} is not on the lattice of spacing {dq}")));
        }
        let j = j as i64;
        let sw = w.sqrt();
        for f in &spec.jump_functions {
            offsets.push(j);
            for k in 0..n {
                let target = k as i64 + j;
                amp.push(if (0..n as i64).contains(&target) {
                    sw * f(q, grid.axis_value(k))
                } else {
                    Complex64::new(0.0, 0.0)
                });
            }
        }
    }
    let mut loss = vec![0.0; n];
    for row in amp.chunks(n) {
        for (l, a) in loss.iter_mut().zip(row) {
            *l += a.norm_sqr();
        }
    }
    let energy = match &spec.hamiltonian {
        Some(h) => grid.axis().iter().map(|&p| h(p)).collect(),
        None => vec![0.0; n],
    };
    Ok(PoissonGenerator {
        grid: *grid,
        offsets,
        amp,
        loss,
        energy,
    })
}

impl PoissonGenerator {
    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }
}

impl Superoperator for PoissonGenerator {
    fn dimension(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let n = self.grid.len();
        check_square(m, n)?;
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        let src = m.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(col, out_col)| {
                let m_col = &src[col * n..(col + 1) * n];
                for (row, o) in out_col.iter_mut().enumerate() {
                    let omega = self.energy[row] - self.energy[col];
                    let decay = 0.5 * (self.loss[row] + self.loss[col]);
                    *o = Complex64::new(-decay, -omega) * m_col[row];
                }
                for (t, &j) in self.offsets.iter().enumerate() {
                    let sc = col as i64 - j;
                    if !(0..n as i64).contains(&sc) {
                        continue;
                    }
                    let sc = sc as usize;
                    let a = &self.amp[t * n..(t + 1) * n];
                    let a_col = a[sc].conj();
                    let src_col = &src[sc * n..(sc + 1) * n];
                    let lo = j.max(0) as usize;
                    let hi = (n as i64 + j.min(0)) as usize;
                    for row in lo..hi {
                        let sr = (row as i64 - j) as usize;
                        out_col[row] += src_col[sr] * (a[sr] * a_col);
                    }
                }
            });
        Ok(out)
    }
}

/// The collisional generator written as a Poisson generator: lattice
/// transfers weighted by ΔQ(2π/3)Q², jump function √(γ|Ṽ|²S), kinetic H(P).
pub fn qlbe_poisson_spec(
    grid: &MomentumGrid,
    gas: &GasModel,
    particle: &ParticleModel,
    pot: &PotentialSpec,
) -> Result<PoissonFormSpec> {
    grid.require_one_d("the Poisson generator")?;
    pot.validate()?;
    let dq = grid.spacing();
    let half = grid.half_extent() as i64;
    let measure = (-2 * half..=2 * half)
        .filter(|&j| j != 0)
        .map(|j| {
            let q = j as f64 * dq;
            (q, dq * collinear_measure(q))
        })
        .collect();
    let (gas, pot) = (*gas, *pot);
    let mass = particle.mass();
    let gamma = rate_prefactor(&gas);
    let jump: JumpFunction = Arc::new(move |q, p| {
        Complex64::new((gamma * pot.vsq(q) * s_mb_unchecked(q, energy_transfer_1d(q, p, mass), &gas)).sqrt(), 0.0)
    });
    Ok(PoissonFormSpec {
        measure,
        jump_functions: vec![jump],
        hamiltonian: Some(Arc::new(move |p| p * p / (2.0 * mass))),
    })
}

/// −i[H, ϱ] + Σ_k (V_k ϱ V_k† − ½{V_k†V_k, ϱ}) with explicit matrices.
#[derive(Debug, Clone)]
pub struct DenseLindblad {
    hamiltonian: DMatrix<Complex64>,
    jumps: Vec<DMatrix<Complex64>>,
    // V†V summed over jumps
    decay: DMatrix<Complex64>,
}

impl DenseLindblad {
    pub fn new(hamiltonian: DMatrix<Complex64>, jumps: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let n = hamiltonian.nrows();
        check_square(&hamiltonian, n)?;
        if (&hamiltonian - hamiltonian.adjoint()).iter().any(|z| z.norm() > 1e-12) {
            return invalid("Hamiltonian must be Hermitian");
        }
        let mut decay = DMatrix::zeros(n, n);
        for v in &jumps {
            check_square(v, n)?;
            decay += v.adjoint() * v;
        }
        Ok(Self {
            hamiltonian,
            jumps,
            decay,
        })
    }

    /// Single jump operator √rate (1 + S), S the shift by one lattice step.
    /// The identity part multiplies coherences by phases that a translation
    /// does not undo, so the generator is not translation covariant.
    pub fn translation_breaking(grid: &MomentumGrid, rate: f64) -> Result<Self> {
        let n = grid.len();
        let s = rate.sqrt();
        let v = DMatrix::from_fn(n, n, |r, c| {
            if r == c || r == c + 1 {
                Complex64::new(s, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(DMatrix::zeros(n, n), vec![v])
    }
}

impl Superoperator for DenseLindblad {
    fn dimension(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn apply(&self, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        check_square(m, self.dimension())?;
        let h = &self.hamiltonian;
        let mut out = (h * m - m * h) * (-I);
        for v in &self.jumps {
            out += v * m * v.adjoint();
        }
        out -= (&self.decay * m + m * &self.decay) * Complex64::new(0.5, 0.0);
        Ok(out)
    }
}

/// max over trials of ‖L[UϱU†] − U L[ϱ] U†‖_max for random states ϱ and
/// displacements a drawn uniformly from one lattice period.
pub fn covariance_check(gen: &dyn Superoperator, grid: &MomentumGrid, trials: usize, seed: u64) -> Result<f64> {
    let n = grid.len();
    if gen.dimension() != n {
        return Err(Error::GridMismatch(format!(
            "generator acts on {} points, grid has {n}",
            gen.dimension()
        )));
    }
    let period = 2.0 * std::f64::consts::PI / grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let shift = period * (rng.random::<f64>() - 0.5);
        let lhs = gen.apply(&translate(grid, &rho, shift))?;
        let rhs = translate(grid, &gen.apply(&rho)?, shift);
        let r = (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(r);
    }
    Ok(worst)
}

/// L(P) = c + ℓ·P.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMomentumFunction {
    pub constant: Complex64,
    pub linear: [Complex64; 3],
}

const PROBES: [[f64; 3]; 3] = [[0.37, -1.3, 2.1], [-2.2, 0.9, -0.4], [1.7, 2.6, -3.1]];

impl AffineMomentumFunction {
    /// Reads off the coefficients of `f` and rejects it if it is not affine.
    pub fn fit(f: impl Fn(&[f64; 3]) -> Complex64) -> Result<Self> {
        let c = f(&[0.0; 3]);
        let mut linear = [Complex64::new(0.0, 0.0); 3];
        for (i, l) in linear.iter_mut().enumerate() {
            let mut e = [0.0; 3];
            e[i] = 1.0;
            *l = f(&e) - c;
        }
        let fit = Self { constant: c, linear };
        for p in &PROBES {
            let got = f(p);
            let want = fit.eval(p);
            if (got - want).norm() > 1e-10 * (1.0 + got.norm()) {
                return invalid("momentum function is not affine; moment equations would not close");
            }
        }
        Ok(fit)
    }

    pub fn eval(&self, p: &[f64; 3]) -> Complex64 {
        self.constant + self.linear.iter().zip(p).map(|(l, x)| l * x).sum::<Complex64>()
    }
}

/// H(P) = h₀ + h·P + ½ PᵀGP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticMomentumFunction {
    pub constant: f64,
    pub linear: [f64; 3],
    pub quadratic: [[f64; 3]; 3],
}

impl QuadraticMomentumFunction {
    /// Reads off the coefficients of `f` and rejects it if it is not at most
    /// quadratic.
    pub fn fit(f: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        let h0 = f(&[0.0; 3]);
        let unit = |i: usize, s: f64| {
            let mut e = [0.0; 3];
            e[i] = s;
            e
        };
        let mut linear = [0.0; 3];
        let mut quadratic = [[0.0; 3]; 3];
        for i in 0..3 {
            let (fp, fm) = (f(&unit(i, 1.0)), f(&unit(i, -1.0)));
            linear[i] = 0.5 * (fp - fm);
            quadratic[i][i] = fp + fm - 2.0 * h0;
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let mut e = [0.0; 3];
                e[i] = 1.0;
                e[j] = 1.0;
                let g = f(&e) - f(&unit(i, 1.0)) - f(&unit(j, 1.0)) + h0;
                quadratic[i][j] = g;
                quadratic[j][i] = g;
            }
        }
        let fit = Self {
            constant: h0,
            linear,
            quadratic,
        };
        for p in &PROBES {
            let (got, want) = (f(p), fit.eval(p));
            if (got - want).abs() > 1e-10 * (1.0 + got.abs()) {
                return invalid("Hamiltonian is not quadratic in momentum; moment equations would not close");
            }
        }
        Ok(fit)
    }

    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        let mut v = self.constant;
        for i in 0..3 {
            v += self.linear[i] * p[i];
            for j in 0..3 {
                v += 0.5 * self.quadratic[i][j] * p[i] * p[j];
            }
        }
        v
    }
}

/// Gaussian generator −i[H(P) + Y₀ + H_eff, ϱ] + Σ_k D[K_k]ϱ with
/// K_k = Σ_i a_ki X_i + L_k(P) and H_eff = (1/2i)Σ_k(Y_k L_k − L_k†Y_k).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFormSpec {
    /// Y₀ = Σ_i a_0i X_i.
    pub y0: [f64; 3],
    /// Rows a_k, one per K_k.
    pub a: Vec<[f64; 3]>,
    pub l: Vec<AffineMomentumFunction>,
    pub h_of_p: QuadraticMomentumFunction,
}

impl GaussianFormSpec {
    pub fn validate(&self) -> Result<()> {
        if self.a.len() > 3 {
            return invalid(format!("at most three Gaussian channels allowed (got {})", self.a.len()));
        }
        if self.a.len() != self.l.len() {
            return invalid("each Gaussian channel needs one position row and one momentum function");
        }
        let finite = self.y0.iter().chain(self.a.iter().flatten()).all(|x| x.is_finite());
        if !finite {
            return invalid("Gaussian coefficients must be finite");
        }
        Ok(())
    }

    /// Channels K = a X_i + i b P_i on every axis with free kinetic energy,
    /// the choice that reproduces the quantum Brownian motion equation.
    pub fn brownian(a: f64, b: f64, mass: f64) -> Result<Self> {
        let mut rows = Vec::new();
        let mut l = Vec::new();
        for i in 0..3 {
            let mut row = [0.0; 3];
            row[i] = a;
            rows.push(row);
            let mut linear = [Complex64::new(0.0, 0.0); 3];
            linear[i] = Complex64::new(0.0, b);
            l.push(AffineMomentumFunction {
                constant: Complex64::new(0.0, 0.0),
                linear,
            });
        }
        let h_of_p = QuadraticMomentumFunction::fit(|p| p.iter().map(|x| x * x).sum::<f64>() / (2.0 * mass))?;
        Ok(Self {
            y0: [0.0; 3],
            a: rows,
            l,
            h_of_p,
        })
    }
}

/// Noncommuting polynomials in z = (X1, X2, X3, P1, P2, P3), stored as
/// words sorted ascending (positions before momenta).
#[derive(Debug, Clone, Default, PartialEq)]
struct Poly(BTreeMap<Vec<u8>, Complex64>);

impl Poly {
    fn constant(c: Complex64) -> Self {
        let mut p = Poly::default();
        p.add_word(Vec::new(), c);
        p
    }

    fn linear(coeffs: &[Complex64; PHASE_DIM], constant: Complex64) -> Self {
        let mut p = Poly::constant(constant);
        for (a, &c) in coeffs.iter().enumerate() {
            p.add_word(vec![a as u8], c);
        }
        p
    }

    fn add_word(&mut self, w: Vec<u8>, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        // P_i X_i = X_i P_i − i
        if let Some(k) = w.windows(2).position(|p| p[0] > p[1]) {
            let (b, a) = (w[k], w[k + 1]);
            let mut swapped = w.clone();
            swapped.swap(k, k + 1);
            self.add_word(swapped, c);
            if b == a + 3 {
                let mut shorter = w[..k].to_vec();
                shorter.extend_from_slice(&w[k + 2..]);
                self.add_word(shorter, -I * c);
            }
            return;
        }
        *self.0.entry(w).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn add(&self, other: &Poly, scale: Complex64) -> Poly {
        let mut out = self.clone();
        for (w, &c) in &other.0 {
            out.add_word(w.clone(), c * scale);
        }
        out
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (u, &a) in &self.0 {
            for (v, &b) in &other.0 {
                let mut w = u.clone();
                w.extend_from_slice(v);
                out.add_word(w, a * b);
            }
        }
        out
    }

    fn adjoint(&self) -> Poly {
        let mut out = Poly::default();
        for (w, &c) in &self.0 {
            out.add_word(w.iter().rev().cloned().collect(), c.conj());
        }
        out
    }

    fn commutator(&self, other: &Poly) -> Poly {
        self.mul(other).add(&other.mul(self), Complex64::new(-1.0, 0.0))
    }
}

/// Closed first and second moment equations of a Gaussian generator.
pub fn build_gaussian_moment_generator(spec: &GaussianFormSpec) -> Result<MomentSystem> {
    spec.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let h = &spec.h_of_p;
    let mut ham = Poly::constant(Complex64::new(h.constant, 0.0));
    for i in 0..3 {
        ham.add_word(vec![(i + 3) as u8], Complex64::new(h.linear[i], 0.0));
        ham.add_word(vec![i as u8], Complex64::new(spec.y0[i], 0.0));
        for j in 0..3 {
            ham.add_word(vec![(i + 3) as u8, (j + 3) as u8], Complex64::new(0.5 * h.quadratic[i][j], 0.0));
        }
    }
    let mut channels = Vec::new();
    for (row, l) in spec.a.iter().zip(&spec.l) {
        let mut yc = [zero; PHASE_DIM];
        let mut lc = [zero; PHASE_DIM];
        for i in 0..3 {
            yc[i] = Complex64::new(row[i], 0.0);
            lc[i + 3] = l.linear[i];
        }
        let y = Poly::linear(&yc, zero);
        let lp = Poly::linear(&lc, l.constant);
        // (1/2i)(Y L − L† Y)
        let h_eff = y.mul(&lp).add(&lp.adjoint().mul(&y), Complex64::new(-1.0, 0.0));
        ham = ham.add(&h_eff, Complex64::new(0.0, -0.5));
        channels.push(y.add(&lp, Complex64::new(1.0, 0.0)));
    }

    // adjoint generator i[H, O] + Σ (K†OK − ½{K†K, O})
    let adjoint_generator = |o: &Poly| -> Poly {
        let mut out = Poly::default().add(&ham.commutator(o), I);
        for k in &channels {
            let kd = k.adjoint();
            let kk = kd.mul(k);
            out = out.add(&kd.mul(o).mul(k), Complex64::new(1.0, 0.0));
            out = out.add(&kk.mul(o).add(&o.mul(&kk), Complex64::new(1.0, 0.0)), Complex64::new(-0.5, 0.0));
        }
        out
    };

    let mut rows: Vec<(usize, Poly)> = Vec::new();
    for a in 0..PHASE_DIM {
        let mut p = Poly::default();
        p.add_word(vec![a as u8], Complex64::new(1.0, 0.0));
        rows.push((a, p));
        for b in a..PHASE_DIM {
            let mut p = Poly::default();
            p.add_word(vec![a as u8, b as u8], Complex64::new(0.5, 0.0));
            p.add_word(vec![b as u8, a as u8], Complex64::new(0.5, 0.0));
            rows.push((second_index(a, b), p));
        }
    }
    let mut matrix = DMatrix::<Complex64>::zeros(MOMENT_DIM, MOMENT_DIM);
    let mut offset = vec![zero; MOMENT_DIM];
    let mut scale: f64 = 1.0;
    let mut residue: f64 = 0.0;
    for (row, o) in rows {
        for (w, &c) in &adjoint_generator(&o).0 {
            scale = scale.max(c.norm());
            match w.len() {
                0 => offset[row] += c,
                1 => matrix[(row, w[0] as usize)] += c,
                2 => {
                    let (a, b) = (w[0] as usize, w[1] as usize);
                    // z_a z_b = sym(z_a z_b) + ½[z_a, z_b]
                    matrix[(row, second_index(a, b))] += c;
                    if b == a + 3 {
                        offset[row] += c * I * 0.5;
                    }
                }
                _ => residue = residue.max(c.norm()),
            }
        }
    }
    residue = matrix.iter().chain(&offset).fold(residue, |r, z| r.max(z.im.abs()));
    if residue > 1e-12 * scale {
        return Err(Error::Config(format!(
            "moment equations do not close (residual {residue:e})"
        )));
    }
    let mut sys = MomentSystem::zeros();
    *sys.matrix_mut() = matrix.map(|z| z.re);
    for (o, z) in sys.offset_mut().iter_mut().zip(&offset) {
        *o = z.re;
    }
    Ok(sys)
}
