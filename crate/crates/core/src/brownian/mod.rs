//! Brownian limit of the collisional dynamics: the microscopic friction
//! coefficient, the Caldeira-Leggett diffusion coefficients, exact moment
//! propagation, and a kinetic cross-check of the friction against the
//! lattice master equation.

mod wigner;

pub use wigner::{max_stable_wigner_dt, wigner_kramers_evolve, FieldSnapshot, PhaseSpaceField};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::generator::{build_generator, diagonal_rates, rate_prefactor};
use crate::model::{GasModel, MomentumDistribution, MomentumGrid, ParticleModel, PotentialSpec};
use crate::moments::{second_index, MomentSystem, PHASE_DIM};
use crate::quadrature::{integrate, QuadratureConfig};

/// η = (β/2M) γ ∫d³Q |Ṽ(Q)|² (Q²/3) S(Q, 0), reduced to a radial integral.
pub fn friction_eta(
    gas: &GasModel,
    particle: &ParticleModel,
    pot: &PotentialSpec,
    quad: &QuadratureConfig,
) -> Result<f64> {
    pot.validate()?;
    if pot.is_zero() {
        return Ok(0.0);
    }
    let beta = gas.beta();
    let m = gas.mass();
    // Q⁴ S(Q, 0) = √(βm/2π) Q³ exp(−βQ²/8m)
    let norm = (beta * m / (2.0 * PI)).sqrt();
    let a = beta / (8.0 * m);
    let q_max = (60.0 / a).sqrt().min(pot.support_radius(60.0));
    let est = integrate(|q| q * q * q * (-a * q * q).exp() * pot.vsq(q), 0.0, q_max, quad)?;
    Ok(beta / (2.0 * particle.mass()) * rate_prefactor(gas) * 4.0 * PI / 3.0 * norm * est.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CLCoefficients {
    pub eta: f64,
    pub d_pp: f64,
    pub d_xx: f64,
}

impl CLCoefficients {
    /// Spatial diffusion constant of the overdamped limit,
    /// 1/(βMη) + D_xx = D_pp/(Mη)² + D_xx.
    pub fn strong_friction_diffusion(&self, particle: &ParticleModel) -> f64 {
        let m_eta = particle.mass() * self.eta;
        self.d_pp / (m_eta * m_eta) + self.d_xx
    }
}

/// D_pp = Mη/β and D_xx = βη/16M.
pub fn cl_coefficients(eta: f64, gas: &GasModel, particle: &ParticleModel) -> Result<CLCoefficients> {
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid(format!("friction eta must be > 0 (got {eta})"));
    }
    let beta = gas.beta();
    let mass = particle.mass();
    Ok(CLCoefficients {
        eta,
        d_pp: mass * eta / beta,
        d_xx: beta * eta / (16.0 * mass),
    })
}

/// First and symmetrized second moments along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub mean_x2: f64,
    pub mean_p2: f64,
    /// ⟨XP + PX⟩/2.
    pub sym_xp: f64,
}

impl AxisMoments {
    pub fn from_gaussian(mean_x: f64, mean_p: f64, var_x: f64, var_p: f64, cov_xp: f64) -> Self {
        Self {
            mean_x,
            mean_p,
            mean_x2: var_x + mean_x * mean_x,
            mean_p2: var_p + mean_p * mean_p,
            sym_xp: cov_xp + mean_x * mean_p,
        }
    }

    pub fn var_x(&self) -> f64 {
        self.mean_x2 - self.mean_x * self.mean_x
    }

    pub fn var_p(&self) -> f64 {
        self.mean_p2 - self.mean_p * self.mean_p
    }

    pub fn cov_xp(&self) -> f64 {
        self.sym_xp - self.mean_x * self.mean_p
    }

    fn to_array(self) -> [f64; 5] {
        [self.mean_x, self.mean_p, self.mean_x2, self.mean_p2, self.sym_xp]
    }

    fn from_array(a: &[f64]) -> Self {
        Self {
            mean_x: a[0],
            mean_p: a[1],
            mean_x2: a[2],
            mean_p2: a[3],
            sym_xp: a[4],
        }
    }
}

/// Right-hand side of the per-axis moment equations as an affine map
/// (matrix, constant) on (⟨X⟩, ⟨P⟩, ⟨X²⟩, ⟨P²⟩, ⟨XP+PX⟩/2).
pub fn cl_axis_system(coeffs: &CLCoefficients, particle: &ParticleModel) -> (DMatrix<f64>, DVector<f64>) {
    let inv_m = 1.0 / particle.mass();
    let eta = coeffs.eta;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(5, 5, &[
        0.0, inv_m, 0.0, 0.0,        0.0,
        0.0, -eta,  0.0, 0.0,        0.0,
        0.0, 0.0,   0.0, 0.0,        2.0 * inv_m,
        0.0, 0.0,   0.0, -2.0 * eta, 0.0,
        0.0, 0.0,   0.0, inv_m,      -eta,
    ]);
    let b = DVector::from_row_slice(&[0.0, 0.0, 2.0 * coeffs.d_xx, 2.0 * coeffs.d_pp, 0.0]);
    (a, b)
}

/// Exact moments at time `t` along one axis.
pub fn cl_moment_evolve(
    coeffs: &CLCoefficients,
    particle: &ParticleModel,
    initial: &AxisMoments,
    t: f64,
) -> Result<AxisMoments> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid(format!("time must be >= 0 (got {t})"));
    }
    let (a, b) = cl_axis_system(coeffs, particle);
    let mut aug = DMatrix::zeros(6, 6);
    aug.view_mut((0, 0), (5, 5)).copy_from(&(a * t));
    aug.view_mut((0, 5), (5, 1)).copy_from(&(b * t));
    let e = aug.exp();
    let m0 = DVector::from_row_slice(&initial.to_array());
    let m = e.view((0, 0), (5, 5)) * m0 + e.view((0, 5), (5, 1)).column(0);
    Ok(AxisMoments::from_array(m.as_slice()))
}

type Monomial = [u8; PHASE_DIM];

/// Moment equations of the three-dimensional Caldeira-Leggett dynamics,
/// obtained by applying the adjoint of the phase-space generator
/// (P/M)·∇_X − ηP·∇_P + D_pp Δ_P + D_xx Δ_X to every monomial of degree ≤ 2.
pub fn cl_moment_system(coeffs: &CLCoefficients, particle: &ParticleModel) -> MomentSystem {
    let inv_m = 1.0 / particle.mass();
    let mut sys = MomentSystem::zeros();
    let mut monomials: Vec<(usize, Monomial)> = Vec::new();
    for a in 0..PHASE_DIM {
        let mut e = [0u8; PHASE_DIM];
        e[a] = 1;
        monomials.push((a, e));
        for b in a..PHASE_DIM {
            let mut e = [0u8; PHASE_DIM];
            e[a] += 1;
            e[b] += 1;
            monomials.push((second_index(a, b), e));
        }
    }
    let index_of = |m: &Monomial| -> Option<usize> {
        let deg: u8 = m.iter().sum();
        match deg {
            0 => None,
            1 => m.iter().position(|&e| e == 1),
            _ => {
                let mut idx = m.iter().enumerate().flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize));
                let a = idx.next().unwrap();
                let b = idx.next().unwrap();
                Some(second_index(a, b))
            }
        }
    };
    for (row, mono) in monomials {
        let mut add = |coef: f64, m: Monomial| match index_of(&m) {
            Some(col) => sys.matrix_mut()[(row, col)] += coef,
            None => sys.offset_mut()[row] += coef,
        };
        for i in 0..3 {
            let (x, p) = (i, i + 3);
            if mono[x] > 0 {
                let mut m = mono;
                m[x] -= 1;
                m[p] += 1;
                add(inv_m * mono[x] as f64, m);
            }
            if mono[p] > 0 {
                add(-coeffs.eta * mono[p] as f64, mono);
            }
            if mono[p] >= 2 {
                let mut m = mono;
                m[p] -= 2;
                add(coeffs.d_pp * (mono[p] * (mono[p] - 1)) as f64, m);
            }
            if mono[x] >= 2 {
                let mut m = mono;
                m[x] -= 2;
                add(coeffs.d_xx * (mono[x] * (mono[x] - 1)) as f64, m);
            }
        }
    }
    sys
}

/// Slope, intercept and R² of the least-squares line through (x, y).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::Fit(format!("need at least 3 paired points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Outcome of fitting the ⟨P⟩ decay of the lattice master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrownianReport {
    pub mass_ratio: f64,
    pub eta_quadrature: f64,
    pub eta_fit: f64,
    pub relative_deviation: f64,
    pub r_squared: f64,
    /// max |⟨P⟩(t)/⟨P⟩(0) − e^{−ηt}| for t ≤ 2/η.
    pub collapse_deviation: f64,
    pub max_boundary_occupancy: f64,
}

/// Largest mass ratio m/M accepted by [`brownian_consistency`].
pub const MAX_BROWNIAN_MASS_RATIO: f64 = 0.1;

/// Lattice resolving both the thermal momentum spread of the particle and the
/// typical momentum transfer, extending to eight thermal widths.
pub fn brownian_grid(gas: &GasModel, particle: &ParticleModel, pot: &PotentialSpec) -> Result<MomentumGrid> {
    let p_th = particle.thermal_momentum(gas.beta());
    let recoil = (8.0 * gas.mass() / gas.beta()).sqrt();
    let q_typ = match *pot {
        PotentialSpec::Gaussian { sigma, .. } => 1.0 / (sigma * sigma + 1.0 / (recoil * recoil)).sqrt(),
        PotentialSpec::CutoffConstant { q_max, .. } => q_max.min(recoil),
    };
    let spacing = (p_th / 50.0).min(q_typ / 5.0);
    let half = (8.0 * p_th / spacing).ceil() as usize;
    MomentumGrid::one_d(spacing, half)
}

const FIT_POINTS: usize = 40;

/// Fits the relaxation rate of ⟨P⟩ under the lattice master equation and
/// compares it with the friction quadrature.
pub fn brownian_consistency(
    gas: &GasModel,
    particle: &ParticleModel,
    pot: &PotentialSpec,
    grid: &MomentumGrid,
) -> Result<BrownianReport> {
    let ratio = particle.mass_ratio(gas);
    if ratio > MAX_BROWNIAN_MASS_RATIO {
        return invalid(format!(
            "mass ratio m/M = {ratio} exceeds the Brownian regime bound {MAX_BROWNIAN_MASS_RATIO}"
        ));
    }
    let eta = friction_eta(gas, particle, pot, &QuadratureConfig::default())?;
    if !(eta > 0.0) {
        return invalid("friction vanishes; the coupling must be nonzero");
    }
    let gen = build_generator(grid, gas, particle, pot)?;
    let rates = diagonal_rates(&gen);

    let mass = particle.mass();
    let beta = gas.beta();
    let p0 = (particle.thermal_momentum(beta) / grid.spacing()).round() * grid.spacing();
    let weights = grid
        .axis()
        .iter()
        .map(|p| (-beta * (p - p0).powi(2) / (2.0 * mass)).exp())
        .collect();
    let mu0 = MomentumDistribution::normalized(*grid, weights)?;
    let start = mu0.mean()[0];

    let t_end = 2.0 / eta;
    let times: Vec<f64> = (0..=FIT_POINTS).map(|i| t_end * i as f64 / FIT_POINTS as f64).collect();
    let states = rates.evolve_at(&mu0, &times, rates.max_stable_dt())?;

    let boundary = grid.boundary_indices();
    let mut max_boundary: f64 = 0.0;
    let mut fit_t = Vec::new();
    let mut fit_y = Vec::new();
    let mut collapse: f64 = 0.0;
    for (t, mu) in times.iter().zip(&states) {
        let w = mu.weights();
        max_boundary = max_boundary.max(boundary.iter().map(|&i| w[i]).sum());
        let ratio_t = mu.mean()[0] / start;
        collapse = collapse.max((ratio_t - (-eta * t).exp()).abs());
        if *t >= 0.2 / eta - 1e-12 {
            if !(ratio_t > 0.0) {
                return Err(Error::Fit(format!("mean momentum changed sign at t = {t}")));
            }
            fit_t.push(*t);
            fit_y.push(ratio_t.ln());
        }
    }
    if max_boundary > crate::model::BOUNDARY_OCCUPANCY_LIMIT {
        log::warn!("boundary occupancy {max_boundary:e} during friction fit; enlarge the grid");
    }
    let (slope, _, r2) = linear_fit(&fit_t, &fit_y)?;
    if r2 < 0.99 {
        return Err(Error::Fit(format!("decay is not exponential (R² = {r2})")));
    }
    let eta_fit = -slope;
    Ok(BrownianReport {
        mass_ratio: ratio,
        eta_quadrature: eta,
        eta_fit,
        relative_deviation: (eta_fit - eta).abs() / eta,
        r_squared: r2,
        collapse_deviation: collapse,
        max_boundary_occupancy: max_boundary,
    })
}
