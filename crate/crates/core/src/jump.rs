//! Kinetic Monte Carlo for the classical jump process on the diagonal of the
//! collisional master equation, in one (collinear) or three dimensions.
//!
//! Jumps are generated by thinning: proposals arrive at a momentum-independent
//! envelope rate with transfers drawn from a radial density ∝ Q|Ṽ(Q)|², and
//! are accepted with probability exp(−βu²/8m), u = (2mE + Q²)/|Q|. Rejected
//! proposals are null events, so the waiting time to an accepted jump is
//! exactly exponential with the local total rate.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generator::{collinear_measure, rate_prefactor};
use crate::model::{Dimension, GasModel, MomentumDistribution, MomentumGrid, ParticleModel, PotentialSpec};
use crate::quadrature::{integrate, integrate_fallible, QuadratureConfig};
use crate::structure_factor::{energy_transfer, s_mb_unchecked};

/// Proposals allowed per accepted jump before the envelope is declared
/// unusable.
pub const MAX_PROPOSALS: usize = 1_000_000;

const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSampler {
    dimension: Dimension,
    gas: GasModel,
    particle: ParticleModel,
    potential: PotentialSpec,
    gamma: f64,
    envelope_rate: f64,
}

impl JumpSampler {
    pub fn new(dimension: Dimension, gas: &GasModel, particle: &ParticleModel, pot: &PotentialSpec) -> Result<Self> {
        pot.validate()?;
        let gamma = rate_prefactor(gas);
        let norm = (gas.beta() * gas.mass() / (2.0 * PI)).sqrt();
        let first = pot.radial_first_moment();
        // ∫ c(Q)|Ṽ|² √(βm/2π)/|Q| over ℝ or ℝ³
        let envelope_rate = match dimension {
            Dimension::One => gamma * (2.0 * PI / 3.0) * norm * 2.0 * first,
            Dimension::Three => gamma * 4.0 * PI * norm * first,
        };
        Ok(Self {
            dimension,
            gas: *gas,
            particle: *particle,
            potential: *pot,
            gamma,
            envelope_rate,
        })
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Rate at which transfers are proposed, independent of momentum.
    pub fn envelope_rate(&self) -> f64 {
        self.envelope_rate
    }

    /// r(Q|P): γ|Ṽ(Q)|²S(Q, E(Q, P)), with the collinear measure in 1D.
    pub fn rate_density(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        self.check_dim(q)?;
        self.check_dim(p)?;
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qn == 0.0 {
            return Ok(0.0);
        }
        let e = energy_transfer(q, p, self.particle.mass());
        let measure = match self.dimension {
            Dimension::One => collinear_measure(qn),
            Dimension::Three => 1.0,
        };
        Ok(self.gamma * measure * self.potential.vsq(qn) * s_mb_unchecked(qn, e, &self.gas))
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension.count() {
            return Err(Error::GridMismatch(format!(
                "expected a {}-component vector, got {}",
                self.dimension.count(),
                v.len()
            )));
        }
        Ok(())
    }

    fn q_max(&self, p_norm: f64) -> f64 {
        let m = self.gas.mass();
        let kin = (320.0 * m / self.gas.beta()).sqrt() + 2.0 * m / self.particle.mass() * p_norm;
        kin.min(self.potential.support_radius(40.0))
    }

    /// R(P) = ∫ r(Q|P) dQ by adaptive quadrature.
    pub fn total_rate(&self, p: &[f64], quad: &QuadratureConfig) -> Result<f64> {
        self.check_dim(p)?;
        if self.potential.is_zero() {
            return Ok(0.0);
        }
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q_max = self.q_max(pn);
        match self.dimension {
            Dimension::One => {
                let f = |q: f64| self.rate_density(&[q], p).unwrap_or(0.0);
                let neg = integrate(f, -q_max, 0.0, quad)?;
                let pos = integrate(f, 0.0, q_max, quad)?;
                Ok(neg.value + pos.value)
            }
            Dimension::Three => {
                let mass = self.particle.mass();
                let inner = QuadratureConfig {
                    abs_tol: quad.abs_tol * 1e-2,
                    rel_tol: quad.rel_tol * 1e-2,
                    ..*quad
                };
                let est = integrate_fallible(
                    |q| {
                        if q == 0.0 {
                            return Ok(0.0);
                        }
                        let ang = integrate(
                            |c| s_mb_unchecked(q, (2.0 * q * pn * c + q * q) / (2.0 * mass), &self.gas),
                            -1.0,
                            1.0,
                            &inner,
                        )?;
                        Ok(2.0 * PI * q * q * self.potential.vsq(q) * ang.value)
                    },
                    0.0,
                    q_max,
                    quad,
                )?;
                Ok(self.gamma * est.value)
            }
        }
    }

    fn propose<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let q = match self.potential {
            PotentialSpec::Gaussian { sigma, .. } => (-(1.0 - rng.random::<f64>()).ln()).sqrt() / sigma,
            PotentialSpec::CutoffConstant { q_max, .. } => q_max * rng.random::<f64>().sqrt(),
        };
        match self.dimension {
            Dimension::One => {
                if rng.random::<bool>() {
                    vec![q]
                } else {
                    vec![-q]
                }
            }
            Dimension::Three => {
                let c = 2.0 * rng.random::<f64>() - 1.0;
                let s = (1.0 - c * c).max(0.0).sqrt();
                let phi = 2.0 * PI * rng.random::<f64>();
                vec![q * s * phi.cos(), q * s * phi.sin(), q * c]
            }
        }
    }

    fn acceptance(&self, q: &[f64], p: &[f64]) -> f64 {
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qn == 0.0 {
            return 0.0;
        }
        let m = self.gas.mass();
        let e = energy_transfer(q, p, self.particle.mass());
        let u = (2.0 * m * e + qn * qn) / qn;
        (-self.gas.beta() * u * u / (8.0 * m)).exp()
    }

    /// Waiting time and momentum transfer of the next accepted jump.
    pub fn sample_step<R: Rng>(&self, p: &[f64], rng: &mut R) -> Result<(f64, Vec<f64>)> {
        self.check_dim(p)?;
        if !(self.envelope_rate > 0.0) {
            return Err(Error::Sampling("total rate vanishes; no jump can occur".into()));
        }
        let mut waited = 0.0;
        for _ in 0..MAX_PROPOSALS {
            let tau: f64 = rng.sample(Exp1);
            waited += tau / self.envelope_rate;
            let q = self.propose(rng);
            if rng.random::<f64>() < self.acceptance(&q, p) {
                return Ok((waited, q));
            }
        }
        Err(Error::Sampling(format!(
            "no jump accepted in {MAX_PROPOSALS} proposals at P = {p:?}; envelope too loose"
        )))
    }

    /// Runs one trajectory from `p0`, returning the momentum at each time.
    fn trajectory<R: Rng>(&self, mut p: Vec<f64>, times: &[f64], rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut t = 0.0;
        let mut next = 0;
        let t_end = times.last().copied().unwrap_or(0.0);
        if self.potential.is_zero() || !(self.envelope_rate > 0.0) {
            return Ok(vec![p; times.len()]);
        }
        loop {
            // null events keep the momentum, so thinning acts step by step
            let tau: f64 = rng.sample(Exp1);
            let t_new = t + tau / self.envelope_rate;
            while next < times.len() && times[next] < t_new {
                out.push(p.clone());
                next += 1;
            }
            if t_new > t_end {
                break;
            }
            t = t_new;
            let q = self.propose(rng);
            if rng.random::<f64>() < self.acceptance(&q, &p) {
                for (a, b) in p.iter_mut().zip(&q) {
                    *a += b;
                }
            }
        }
        while out.len() < times.len() {
            out.push(p.clone());
        }
        Ok(out)
    }
}

/// Ensemble settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub seed: u64,
    pub n_trajectories: usize,
    pub t_final: f64,
    /// Time between recorded statistics.
    pub record_interval: f64,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return invalid("monte_carlo.n_trajectories must be >= 1");
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return invalid(format!("t_final must be >= 0 (got {})", self.t_final));
        }
        if !(self.record_interval > 0.0) {
            return invalid(format!("record interval must be > 0 (got {})", self.record_interval));
        }
        Ok(())
    }

    pub fn record_times(&self) -> Vec<f64> {
        let k = (self.t_final / self.record_interval + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=k).map(|i| i as f64 * self.record_interval).collect();
        if let Some(&last) = times.last() {
            if self.t_final - last > 1e-9 * self.record_interval {
                times.push(self.t_final);
            }
        }
        times
    }
}

/// Where trajectories start.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialMomentum {
    Fixed(Vec<f64>),
    Distribution(MomentumDistribution),
}

/// Ensemble averages with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_trajectories: usize,
    pub times: Vec<f64>,
    /// Per time, per axis.
    pub mean_p: Vec<Vec<f64>>,
    pub se_mean_p: Vec<Vec<f64>>,
    pub var_p: Vec<Vec<f64>>,
    pub se_var_p: Vec<Vec<f64>>,
    pub ke_mean: Vec<f64>,
    pub se_ke: Vec<f64>,
    pub histogram_grid: MomentumGrid,
    /// Fraction of trajectories whose final momentum falls on each grid point.
    pub histogram: Vec<f64>,
    /// Trajectories outside the histogram grid, counted in the nearest edge cell.
    pub clipped: usize,
}

// per time: for each axis Σp, Σp², Σp³, Σp⁴; then Σke, Σke²
#[derive(Debug, Clone)]
struct Partial {
    sums: Vec<f64>,
    counts: Vec<u64>,
    clipped: usize,
}

impl Partial {
    fn zeros(width: usize, bins: usize) -> Self {
        Self {
            sums: vec![0.0; width],
            counts: vec![0; bins],
            clipped: 0,
        }
    }

    fn merge(mut self, other: &Partial) -> Self {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.clipped += other.clipped;
        self
    }
}

fn pairwise_reduce(mut parts: Vec<Partial>) -> Partial {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(&b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one block")
}

fn histogram_cell(grid: &MomentumGrid, p: &[f64]) -> (usize, bool) {
    let n = grid.half_extent() as f64;
    let mut clipped = false;
    let idx: Vec<usize> = p
        .iter()
        .map(|&x| {
            let k = (x / grid.spacing()).round();
            if k.abs() > n {
                clipped = true;
            }
            (k.clamp(-n, n) + n) as usize
        })
        .collect();
    (grid.flat_index(&idx), clipped)
}

/// Runs `n_trajectories` independent trajectories and gathers statistics at
/// the recorded times. Trajectory `i` draws from ChaCha8 stream `i` of the
/// configured seed, so the result does not depend on scheduling.
pub fn run_ensemble(
    cfg: &TrajectoryConfig,
    initial: &InitialMomentum,
    sampler: &JumpSampler,
    histogram_grid: &MomentumGrid,
) -> Result<EnsembleStats> {
    cfg.validate()?;
    let d = sampler.dimension.count();
    if histogram_grid.dimension() != sampler.dimension {
        return Err(Error::GridMismatch("histogram grid dimension differs from the sampler".into()));
    }
    let picker = match initial {
        InitialMomentum::Fixed(p) => {
            sampler.check_dim(p)?;
            None
        }
        InitialMomentum::Distribution(mu) => {
            if mu.grid().dimension() != sampler.dimension {
                return Err(Error::GridMismatch("initial distribution dimension differs from the sampler".into()));
            }
            Some(WeightedIndex::new(mu.weights()).map_err(|e| Error::Sampling(e.to_string()))?)
        }
    };
    let times = cfg.record_times();
    let width = times.len() * (4 * d + 2);
    let bins = histogram_grid.len();
    let n_blocks = cfg.n_trajectories.div_ceil(BLOCK);

    let blocks: Vec<Result<Partial>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut part = Partial::zeros(width, bins);
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(cfg.n_trajectories);
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                let p0 = match (initial, &picker) {
                    (InitialMomentum::Distribution(mu), Some(w)) => mu.grid().point(w.sample(&mut rng)),
                    (InitialMomentum::Fixed(p), _) => p.clone(),
                    _ => unreachable!("picker exists exactly for distributions"),
                };
                let path = sampler.trajectory(p0, &times, &mut rng)?;
                for (ti, p) in path.iter().enumerate() {
                    let base = ti * (4 * d + 2);
                    let mut ke = 0.0;
                    for (a, &x) in p.iter().enumerate() {
                        let x2 = x * x;
                        part.sums[base + 4 * a] += x;
                        part.sums[base + 4 * a + 1] += x2;
                        part.sums[base + 4 * a + 2] += x2 * x;
                        part.sums[base + 4 * a + 3] += x2 * x2;
                        ke += x2;
                    }
                    ke /= 2.0 * sampler.particle.mass();
                    part.sums[base + 4 * d] += ke;
                    part.sums[base + 4 * d + 1] += ke * ke;
                }
                let (cell, clipped) = histogram_cell(histogram_grid, path.last().expect("at least t = 0"));
                part.counts[cell] += 1;
                if clipped {
                    part.clipped += 1;
                }
            }
            Ok(part)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let total = pairwise_reduce(blocks);

    let n = cfg.n_trajectories as f64;
    let mut stats = EnsembleStats {
        n_trajectories: cfg.n_trajectories,
        times: times.clone(),
        mean_p: Vec::new(),
        se_mean_p: Vec::new(),
        var_p: Vec::new(),
        se_var_p: Vec::new(),
        ke_mean: Vec::new(),
        se_ke: Vec::new(),
        histogram_grid: *histogram_grid,
        histogram: total.counts.iter().map(|&c| c as f64 / n).collect(),
        clipped: total.clipped,
    };
    for ti in 0..times.len() {
        let base = ti * (4 * d + 2);
        let mut mean = Vec::with_capacity(d);
        let mut se_mean = Vec::with_capacity(d);
        let mut var = Vec::with_capacity(d);
        let mut se_var = Vec::with_capacity(d);
        for a in 0..d {
            let m1 = total.sums[base + 4 * a] / n;
            let m2 = total.sums[base + 4 * a + 1] / n;
            let m3 = total.sums[base + 4 * a + 2] / n;
            let m4 = total.sums[base + 4 * a + 3] / n;
            let v = (m2 - m1 * m1).max(0.0);
            let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
            mean.push(m1);
            se_mean.push((v / n).sqrt());
            var.push(v);
            se_var.push(((c4 - v * v).max(0.0) / n).sqrt());
        }
        let k1 = total.sums[base + 4 * d] / n;
        let k2 = total.sums[base + 4 * d + 1] / n;
        stats.mean_p.push(mean);
        stats.se_mean_p.push(se_mean);
        stats.var_p.push(var);
        stats.se_var_p.push(se_var);
        stats.ke_mean.push(k1);
        stats.se_ke.push(((k2 - k1 * k1).max(0.0) / n).sqrt());
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_generator;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn models(big_m: f64) -> (GasModel, ParticleModel, PotentialSpec) {
        (
            GasModel::new(1.0, 1.0, 0.02).unwrap(),
            ParticleModel::new(big_m).unwrap(),
            PotentialSpec::gaussian(1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn rate_density_obeys_detailed_balance() {
        let (gas, particle, pot) = models(3.0);
        for dim in [Dimension::One, Dimension::Three] {
            let s = JumpSampler::new(dim, &gas, &particle, &pot).unwrap();
            let (q, p): (Vec<f64>, Vec<f64>) = match dim {
                Dimension::One => (vec![0.7], vec![-1.3]),
                Dimension::Three => (vec![0.7, -0.2, 0.4], vec![-1.3, 0.5, 2.0]),
            };
            let back: Vec<f64> = q.iter().map(|x| -x).collect();
            let p_new: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
            let fwd = s.rate_density(&q, &p).unwrap();
            let bwd = s.rate_density(&back, &p_new).unwrap();
            let e = energy_transfer(&q, &p, 3.0);
            assert!((fwd / bwd - (-e).exp()).abs() < 1e-12 * (-e).exp());
        }
    }

    #[test]
    fn zero_coupling_has_no_rate() {
        let (gas, particle, _) = models(3.0);
        let pot = PotentialSpec::gaussian(0.0, 1.0).unwrap();
        let s = JumpSampler::new(Dimension::One, &gas, &particle, &pot).unwrap();
        assert_eq!(s.total_rate(&[0.5], &QuadratureConfig::default()).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(s.sample_step(&[0.5], &mut rng).is_err());
    }

    #[test]
    fn continuum_rate_matches_lattice_sum() {
        let (gas, particle, pot) = models(3.0);
        let s = JumpSampler::new(Dimension::One, &gas, &particle, &pot).unwrap();
        let grid = MomentumGrid::one_d(0.05, 400).unwrap();
        let gen = build_generator(&grid, &gas, &particle, &pot).unwrap();
        for k in [400usize, 380, 430] {
            let p = grid.axis_value(k);
            let continuum = s.total_rate(&[p], &QuadratureConfig::default()).unwrap();
            let lattice = gen.loss_rates()[k];
            assert!((continuum - lattice).abs() < 0.01 * continuum, "P={p}: {continuum} vs {lattice}");
        }
    }

    #[test]
    fn envelope_bounds_density() {
        let (gas, particle, pot) = models(3.0);
        let s = JumpSampler::new(Dimension::One, &gas, &particle, &pot).unwrap();
        let norm = (gas.beta() * gas.mass() / (2.0 * PI)).sqrt();
        for q in [-3.0, -0.4, 0.01, 1.0, 2.5] {
            let bound = rate_prefactor(&gas) * collinear_measure(q) * pot.vsq(q) * norm / f64::abs(q);
            assert!(s.rate_density(&[q], &[0.8]).unwrap() <= bound * (1.0 + 1e-14));
        }
        let total = integrate(
            |q: f64| rate_prefactor(&gas) * collinear_measure(q) * pot.vsq(q) * norm / q.abs().max(1e-300),
            -10.0,
            10.0,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((total.value - s.envelope_rate()).abs() < 1e-9 * s.envelope_rate());
    }

    #[test]
    fn waiting_times_are_exponential_with_total_rate() {
        let (gas, particle, pot) = models(3.0);
        for (dim, p) in [(Dimension::One, vec![1.2]), (Dimension::Three, vec![1.2, 0.0, -0.5])] {
            let s = JumpSampler::new(dim, &gas, &particle, &pot).unwrap();
            let rate = s.total_rate(&p, &QuadratureConfig::with_tolerance(1e-12, 1e-10)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let n = 100_000;
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                let (dt, _) = s.sample_step(&p, &mut rng).unwrap();
                sum += dt;
                sum2 += dt * dt;
            }
            let mean = sum / n as f64;
            let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - 1.0 / rate).abs() < 3.0 * se, "{dim:?}: {mean} vs {}", 1.0 / rate);
        }
    }

    #[test]
    fn transfer_histogram_fits_rate_density() {
        let (gas, particle, pot) = models(3.0);
        let s = JumpSampler::new(Dimension::One, &gas, &particle, &pot).unwrap();
        let p = [0.9];
        let quad = QuadratureConfig::with_tolerance(1e-13, 1e-11);
        let total = s.total_rate(&p, &quad).unwrap();
        let bins = 50;
        let (lo, hi) = (-5.0, 5.0);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut outside = 0;
        for _ in 0..n {
            let (_, q) = s.sample_step(&p, &mut rng).unwrap();
            let b = ((q[0] - lo) / width).floor();
            if b < 0.0 || b >= bins as f64 {
                outside += 1;
            } else {
                counts[b as usize] += 1;
            }
        }
        let mut chi2 = 0.0;
        let mut dof = 0;
        for (b, &c) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            let prob = integrate(|q| s.rate_density(&[q], &p).unwrap(), a, a + width, &quad).unwrap().value / total;
            let expected = prob * n as f64;
            if expected > 5.0 {
                chi2 += (c as f64 - expected).powi(2) / expected;
                dof += 1;
            }
        }
        assert!(outside < 10);
        let p_value = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 1e-3, "chi2 = {chi2} on {dof} bins");
    }

    #[test]
    fn fixed_seed_reproduces_samples() {
        let (gas, particle, pot) = models(3.0);
        let s = JumpSampler::new(Dimension::Three, &gas, &particle, &pot).unwrap();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..50).map(|_| s.sample_step(&[0.1, 0.2, 0.3], &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn ensemble_is_deterministic_and_normalized() {
        let (gas, particle, pot) = models(3.0);
        let s = JumpSampler::new(Dimension::One, &gas, &particle, &pot).unwrap();
        let cfg = TrajectoryConfig {
            seed: 5,
            n_trajectories: 1000,
            t_final: 2.0,
            record_interval: 0.5,
        };
        let grid = MomentumGrid::one_d(0.25, 40).unwrap();
        let a = run_ensemble(&cfg, &InitialMomentum::Fixed(vec![2.0]), &s, &grid).unwrap();
        let b = run_ensemble(&cfg, &InitialMomentum::Fixed(vec![2.0]), &s, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!((a.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a.mean_p[0], vec![2.0]);
        assert_eq!(a.var_p[0], vec![0.0]);
    }

    #[test]
    fn record_times_include_final_time() {
        let cfg = TrajectoryConfig {
            seed: 0,
            n_trajectories: 1,
            t_final: 1.25,
            record_interval: 0.5,
        };
        assert_eq!(cfg.record_times(), vec![0.0, 0.5, 1.0, 1.25]);
        assert!(TrajectoryConfig { n_trajectories: 0, ..cfg }.validate().is_err());
    }
}
