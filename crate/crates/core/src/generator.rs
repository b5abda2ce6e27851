//! Discretized quantum linear Boltzmann generator on a one-dimensional
//! momentum lattice, its RK4 evolution, and the classical rate reduction.
//!
//! Transfers are collinear lattice vectors `Q = jΔP`, `j ≠ 0`. The continuum
//! transfer integral is replaced by `Σ_j ΔQ c(Q)` with the collinear measure
//! `c(Q) = (2π/3)Q²`, which keeps the second moment of the transfer
//! distribution per axis equal to its three-dimensional value. Transfers whose
//! target leaves the grid are dropped from gain and loss alike.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{
    hermitize, DensityMatrix, GasModel, MomentumDistribution, MomentumGrid, ParticleModel,
    PotentialSpec, BOUNDARY_OCCUPANCY_LIMIT,
};
use crate::structure_factor::{energy_transfer_1d, s_mb_unchecked};

/// Largest allowed `dt · rate`.
pub const STABILITY_BOUND: f64 = 0.1;

/// Smallest step the stability bound has to be achievable with.
pub const MIN_TIME_STEP: f64 = 1e-6;

/// Transfer channels whose rate envelope falls below this fraction of the
/// largest one are not tabulated.
const PRUNE_FRACTION: f64 = 1e-25;

/// (2π/ħ)(2πħ)³ n_gas with ħ = 1.
pub fn rate_prefactor(gas: &GasModel) -> f64 {
    2.0 * PI * (2.0 * PI).powi(3) * gas.density()
}

/// Collinear transfer measure (2π/3)Q².
pub fn collinear_measure(q: f64) -> f64 {
    2.0 * PI / 3.0 * q * q
}

#[derive(Debug, Clone)]
pub struct QlbeGenerator {
    grid: MomentumGrid,
    gas: GasModel,
    particle: ParticleModel,
    potential: PotentialSpec,
    rate_prefactor: f64,
    // lattice offsets j of the tabulated transfers, ascending
    offsets: Vec<i64>,
    // w[c * n + k]: rate of transfer offsets[c] from grid position k
    gain: Vec<f64>,
    sqrt_gain: Vec<f64>,
    loss: Vec<f64>,
    kinetic: Vec<f64>,
}

pub fn build_generator(
    grid: &MomentumGrid,
    gas: &GasModel,
    particle: &ParticleModel,
    pot: &PotentialSpec,
) -> Result<QlbeGenerator> {
    grid.require_one_d("the quantum generator")?;
    pot.validate()?;
    let n = grid.len();
    let dq = grid.spacing();
    let gamma = rate_prefactor(gas);
    let mass = particle.mass();
    let half = grid.half_extent() as i64;

    let envelope = |q: f64| {
        gamma * dq * collinear_measure(q) * pot.vsq(q) * (gas.beta() * gas.mass() / (2.0 * PI)).sqrt()
            / q.abs()
    };
    let env_ref = (1..=2 * half)
        .map(|j| envelope(j as f64 * dq))
        .fold(0.0, f64::max);

    let mut offsets = Vec::new();
    let mut gain = Vec::new();
    for j in (-2 * half)..=(2 * half) {
        if j == 0 {
            continue;
        }
        let q = j as f64 * dq;
        // ±j share the same envelope, so pruning keeps reverse pairs together
        if env_ref == 0.0 || envelope(q.abs()) < PRUNE_FRACTION * env_ref {
            continue;
        }
        let weight = gamma * dq * collinear_measure(q) * pot.vsq(q);
        offsets.push(j);
        for k in 0..n {
            let target = k as i64 + j;
            let w = if (0..n as i64).contains(&target) {
                let p = grid.axis_value(k);
                weight * s_mb_unchecked(q, energy_transfer_1d(q, p, mass), gas)
            } else {
                0.0
            };
            gain.push(w);
        }
    }
    let mut loss = vec![0.0; n];
    for row in gain.chunks(n) {
        for (l, w) in loss.iter_mut().zip(row) {
            *l += w;
        }
    }
    let max_loss = loss.iter().cloned().fold(0.0, f64::max);
    if max_loss * MIN_TIME_STEP > STABILITY_BOUND {
        return Err(Error::Config(format!(
            "maximum collision rate {max_loss:e} cannot satisfy dt * rate <= {STABILITY_BOUND} \
             for any dt >= {MIN_TIME_STEP:e}; reduce the coupling or gas density"
        )));
    }
    let sqrt_gain = gain.iter().map(|w| w.sqrt()).collect();
    let kinetic = grid.axis().iter().map(|p| p * p / (2.0 * mass)).collect();
    Ok(QlbeGenerator {
        grid: *grid,
        gas: *gas,
        particle: *particle,
        potential: *pot,
        rate_prefactor: gamma,
        offsets,
        gain,
        sqrt_gain,
        loss,
        kinetic,
    })
}

impl QlbeGenerator {
    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn gas(&self) -> &GasModel {
        &self.gas
    }

    pub fn particle(&self) -> &ParticleModel {
        &self.particle
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    /// γ = (2π)(2π)³ n_gas.
    pub fn rate_prefactor(&self) -> f64 {
        self.rate_prefactor
    }

    /// Lattice offsets `j` of the tabulated transfers `Q = jΔP`.
    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    /// w(Q, P) for lattice transfer `j` out of grid position `k`; zero for
    /// untabulated channels and targets outside the grid.
    pub fn rate(&self, j: i64, k: usize) -> f64 {
        match self.offsets.binary_search(&j) {
            Ok(c) if k < self.grid.len() => self.gain[c * self.grid.len() + k],
            _ => 0.0,
        }
    }

    /// Rates of channel `c` (`offsets()[c]`) for all grid positions.
    pub fn channel_rates(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.gain[c * n..(c + 1) * n]
    }

    /// R(P) = Σ_Q w(Q, P).
    pub fn loss_rates(&self) -> &[f64] {
        &self.loss
    }

    pub fn max_loss_rate(&self) -> f64 {
        self.loss.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest free Bohr frequency |P² − P'²|/2M on the grid.
    pub fn max_free_frequency(&self) -> f64 {
        let lo = self.kinetic.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.kinetic.iter().cloned().fold(0.0, f64::max);
        hi - lo
    }

    /// Largest step allowed by the stability bound.
    pub fn max_stable_dt(&self) -> f64 {
        let rate = self.max_loss_rate().max(self.max_free_frequency());
        if rate == 0.0 {
            f64::INFINITY
        } else {
            STABILITY_BOUND / rate
        }
    }

    /// Kinetic energies P²/2M on the grid.
    pub fn kinetic_energies(&self) -> &[f64] {
        &self.kinetic
    }

    fn apply_raw(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.grid.len();
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        let src = rho.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(col, out_col)| {
                let rho_col = &src[col * n..(col + 1) * n];
                for (row, o) in out_col.iter_mut().enumerate() {
                    let omega = self.kinetic[row] - self.kinetic[col];
                    let decay = 0.5 * (self.loss[row] + self.loss[col]);
                    *o = Complex64::new(-decay, -omega) * rho_col[row];
                }
                for (c, &j) in self.offsets.iter().enumerate() {
                    let sc = col as i64 - j;
                    if !(0..n as i64).contains(&sc) {
                        continue;
                    }
                    let sc = sc as usize;
                    let sq = &self.sqrt_gain[c * n..(c + 1) * n];
                    let amp_col = sq[sc];
                    if amp_col == 0.0 {
                        continue;
                    }
                    let src_col = &src[sc * n..(sc + 1) * n];
                    let lo = j.max(0) as usize;
                    let hi = (n as i64 + j.min(0)) as usize;
                    for row in lo..hi {
                        let sr = (row as i64 - j) as usize;
                        out_col[row] += src_col[sr] * (sq[sr] * amp_col);
                    }
                }
            });
        out
    }
}

/// dϱ/dt for a state on the generator's grid.
pub fn apply_generator(gen: &QlbeGenerator, rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    gen.grid.ensure_same(rho.grid())?;
    Ok(gen.apply_raw(rho.entries()))
}

/// Applies the generator to an arbitrary (not necessarily physical) matrix.
pub fn apply_generator_matrix(gen: &QlbeGenerator, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = gen.grid.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "matrix is {}x{}, grid has {n} points",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(gen.apply_raw(m))
}

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64, record_every: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("evolution.dt must be > 0 (got {dt})"));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return invalid(format!("evolution.t_final must be >= 0 (got {t_final})"));
        }
        if record_every == 0 {
            return invalid("evolution.record_every must be >= 1");
        }
        Ok(Self {
            dt,
            t_final,
            record_every,
        })
    }

    /// Largest stable step for `gen`, capped at `t_final`.
    pub fn auto(gen: &QlbeGenerator, t_final: f64, record_every: usize) -> Result<Self> {
        let dt = gen.max_stable_dt().min(t_final.max(MIN_TIME_STEP));
        Self::new(dt, t_final, record_every)
    }

    /// Number of steps and the uniform step that lands exactly on t_final.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, 0.0);
        }
        let steps = (self.t_final / self.dt).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub snapshots: Vec<Snapshot>,
    /// Largest probability found on the outermost grid points.
    pub max_boundary_occupancy: f64,
}

impl Evolution {
    pub fn final_state(&self) -> &DensityMatrix {
        &self.snapshots.last().expect("initial snapshot is always present").state
    }
}

fn check_step_bound(dt: f64, rate: f64) -> Result<()> {
    if dt * rate > STABILITY_BOUND * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "time step {dt:e} violates dt * rate <= {STABILITY_BOUND} (rate {rate:e}); use dt <= {:e}",
            STABILITY_BOUND / rate
        )));
    }
    Ok(())
}

/// Integrates dϱ/dt = L[ϱ] with fixed-step RK4, recording the initial state
/// and every `record_every`-th step plus the final one.
pub fn evolve(gen: &QlbeGenerator, rho0: &DensityMatrix, cfg: &EvolutionConfig) -> Result<Evolution> {
    gen.grid.ensure_same(rho0.grid())?;
    let (steps, dt) = cfg.steps();
    let mut snapshots = vec![Snapshot {
        time: 0.0,
        state: rho0.clone(),
    }];
    let mut max_boundary = rho0.boundary_occupancy();
    if steps == 0 {
        return Ok(Evolution {
            snapshots,
            max_boundary_occupancy: max_boundary,
        });
    }
    check_step_bound(dt, gen.max_loss_rate().max(gen.max_free_frequency()))?;

    let mut rho = rho0.entries().clone();
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let sixth = Complex64::new(dt / 6.0, 0.0);
    for step in 1..=steps {
        let k1 = gen.apply_raw(&rho);
        let k2 = gen.apply_raw(&(&rho + &k1 * half));
        let k3 = gen.apply_raw(&(&rho + &k2 * half));
        let k4 = gen.apply_raw(&(&rho + &k3 * full));
        rho += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * sixth;
        hermitize(&mut rho);

        if step % cfg.record_every == 0 || step == steps {
            let time = step as f64 * dt;
            let state = DensityMatrix::from_raw(gen.grid, rho.clone())?;
            let drift = (state.trace() - 1.0).norm();
            if drift > 1e-10 * step as f64 {
                return Err(Error::TraceDrift { time, drift });
            }
            let min_eig = state.min_eigenvalue();
            if min_eig < -1e-8 {
                return Err(Error::Positivity {
                    time,
                    min_eigenvalue: min_eig,
                });
            }
            let boundary = state.boundary_occupancy();
            if boundary > BOUNDARY_OCCUPANCY_LIMIT && max_boundary <= BOUNDARY_OCCUPANCY_LIMIT {
                warn!("boundary occupancy {boundary:e} at t = {time}; enlarge the grid");
            }
            max_boundary = max_boundary.max(boundary);
            snapshots.push(Snapshot { time, state });
        }
    }
    Ok(Evolution {
        snapshots,
        max_boundary_occupancy: max_boundary,
    })
}

/// Dense N²×N² matrix of the generator on column-major vectorized states.
pub fn dense_superoperator(gen: &QlbeGenerator) -> DMatrix<Complex64> {
    let n = gen.grid.len();
    let mut sup = DMatrix::zeros(n * n, n * n);
    for c in 0..n {
        for r in 0..n {
            let mut e = DMatrix::zeros(n, n);
            e[(r, c)] = Complex64::new(1.0, 0.0);
            let col = gen.apply_raw(&e);
            for (i, v) in col.iter().enumerate() {
                sup[(i, c * n + r)] = *v;
            }
        }
    }
    sup
}

/// U(a) X U(a)† with U(a) = e^{−iaP} in momentum representation.
pub fn translate(grid: &MomentumGrid, m: &DMatrix<Complex64>, a: f64) -> DMatrix<Complex64> {
    let n = m.nrows();
    // phases depend only on the index difference, so both sides of the
    // covariance identity see bit-identical factors
    let phases: Vec<Complex64> = (0..2 * n - 1)
        .map(|d| {
            let diff = d as f64 - (n as f64 - 1.0);
            Complex64::from_polar(1.0, -a * grid.spacing() * diff)
        })
        .collect();
    DMatrix::from_fn(n, m.ncols(), |r, c| m[(r, c)] * phases[r + n - 1 - c])
}

/// ‖L[UϱU†] − U L[ϱ] U†‖_max.
pub fn covariance_residual(gen: &QlbeGenerator, rho: &DensityMatrix, a: f64) -> Result<f64> {
    gen.grid.ensure_same(rho.grid())?;
    let lhs = gen.apply_raw(&translate(&gen.grid, rho.entries(), a));
    let rhs = translate(&gen.grid, &gen.apply_raw(rho.entries()), a);
    Ok((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Classical jump rates read off the diagonal of the generator.
#[derive(Debug, Clone)]
pub struct ClassicalRates {
    grid: MomentumGrid,
    offsets: Vec<i64>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

pub fn diagonal_rates(gen: &QlbeGenerator) -> ClassicalRates {
    ClassicalRates {
        grid: gen.grid,
        offsets: gen.offsets.clone(),
        rates: gen.gain.clone(),
        exit: gen.loss.clone(),
    }
}

impl ClassicalRates {
    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    /// W(P → P + jΔP) out of grid position `k`.
    pub fn rate(&self, j: i64, k: usize) -> f64 {
        match self.offsets.binary_search(&j) {
            Ok(c) if k < self.grid.len() => self.rates[c * self.grid.len() + k],
            _ => 0.0,
        }
    }

    /// Total exit rates R(P).
    pub fn exit_rates(&self) -> &[f64] {
        &self.exit
    }

    /// Dense transition matrix with `W[(target, source)]`.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut w = DMatrix::zeros(n, n);
        for (c, &j) in self.offsets.iter().enumerate() {
            for k in 0..n {
                let r = self.rates[c * n + k];
                if r != 0.0 {
                    w[((k as i64 + j) as usize, k)] = r;
                }
            }
        }
        w
    }

    /// dμ/dt = Σ_Q [w(Q, P−Q) μ(P−Q) − w(Q, P) μ(P)].
    pub fn rate_of_change(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        if mu.len() != n {
            return Err(Error::GridMismatch(format!(
                "distribution has {} entries, grid has {n} points",
                mu.len()
            )));
        }
        Ok(self.rate_of_change_raw(mu))
    }

    fn rate_of_change_raw(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out: Vec<f64> = mu.iter().zip(&self.exit).map(|(m, r)| -m * r).collect();
        for (c, &j) in self.offsets.iter().enumerate() {
            let row = &self.rates[c * n..(c + 1) * n];
            let lo = j.max(0) as usize;
            let hi = (n as i64 + j.min(0)) as usize;
            for target in lo..hi {
                let source = (target as i64 - j) as usize;
                out[target] += row[source] * mu[source];
            }
        }
        out
    }

    pub fn max_stable_dt(&self) -> f64 {
        let r = self.exit.iter().cloned().fold(0.0, f64::max);
        if r == 0.0 {
            f64::INFINITY
        } else {
            STABILITY_BOUND / r
        }
    }

    /// RK4 integration of the classical master equation, returning the
    /// distribution at each requested time (ascending, ≥ 0).
    pub fn evolve_at(&self, mu0: &MomentumDistribution, times: &[f64], dt: f64) -> Result<Vec<MomentumDistribution>> {
        self.grid.ensure_same(mu0.grid())?;
        if !(dt > 0.0) {
            return invalid(format!("time step must be > 0 (got {dt})"));
        }
        let rate = self.exit.iter().cloned().fold(0.0, f64::max);
        let mut mu = mu0.weights().to_vec();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if target < t {
                return invalid("output times must be ascending and non-negative");
            }
            let span = target - t;
            if span > 0.0 {
                let steps = (span / dt).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                check_step_bound(h, rate)?;
                for _ in 0..steps {
                    self.rk4_step(&mut mu, h);
                }
            }
            t = target;
            out.push(MomentumDistribution::normalized(
                self.grid,
                mu.iter().map(|&x| x.max(0.0)).collect(),
            )?);
        }
        Ok(out)
    }

    /// State after time `t` with step at most `dt`.
    pub fn evolve(&self, mu0: &MomentumDistribution, t: f64, dt: f64) -> Result<MomentumDistribution> {
        Ok(self.evolve_at(mu0, &[t], dt)?.remove(0))
    }

    fn rk4_step(&self, mu: &mut [f64], h: f64) {
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };
        let k1 = self.rate_of_change_raw(mu);
        let k2 = self.rate_of_change_raw(&axpy(mu, 0.5 * h, &k1));
        let k3 = self.rate_of_change_raw(&axpy(mu, 0.5 * h, &k2));
        let k4 = self.rate_of_change_raw(&axpy(mu, h, &k3));
        for i in 0..mu.len() {
            mu[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }

    /// Largest relative violation of w(Q,P)μ(P) = w(−Q,P+Q)μ(P+Q) over all
    /// pairs with non-negligible flux.
    pub fn detailed_balance_violation(&self, mu: &[f64]) -> f64 {
        let n = self.grid.len();
        let mut worst: f64 = 0.0;
        for (c, &j) in self.offsets.iter().enumerate() {
            if j < 0 {
                continue;
            }
            for k in 0..n {
                let target = k as i64 + j;
                if target >= n as i64 {
                    break;
                }
                let fwd = self.rates[c * n + k] * mu[k];
                let bwd = self.rate(-j, target as usize) * mu[target as usize];
                let scale = fwd.abs().max(bwd.abs());
                if scale > 1e-290 {
                    worst = worst.max((fwd - bwd).abs() / scale);
                }
            }
        }
        worst
    }
}
