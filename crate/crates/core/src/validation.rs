//! Invariant suites run by the `validate` subcommand. Every random draw is
//! seeded, so the report is a deterministic function of the configuration.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::brownian::{cl_coefficients, cl_moment_system, friction_eta};
use crate::config::RunConfig;
use crate::covariant::{
    build_gaussian_moment_generator, build_poisson_generator, covariance_check, qlbe_poisson_spec, DenseLindblad,
    GaussianFormSpec, Superoperator,
};
use crate::error::Result;
use crate::generator::{build_generator, dense_superoperator, diagonal_rates, evolve, EvolutionConfig};
use crate::jump::{run_ensemble, InitialMomentum, JumpSampler, TrajectoryConfig};
use crate::model::{
    maxwell_boltzmann_distribution, pure_state_gaussian, Dimension, GasModel, MomentumDistribution, MomentumGrid,
    ParticleModel,
};
use crate::quadrature::QuadratureConfig;
use crate::scattering::{lindblad_l, lindblad_l_rewritten, mb_identity_forms, ScatteringAmplitude};
use crate::structure_factor::{detailed_balance_residual, s_mb, SfPoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

type Checked = (bool, BTreeMap<String, f64>);

fn metrics(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn suite(name: &str, f: impl FnOnce() -> Result<Checked>) -> SuiteReport {
    match f() {
        Ok((passed, metrics)) => SuiteReport {
            name: name.into(),
            passed,
            metrics,
            error: None,
        },
        Err(e) => SuiteReport {
            name: name.into(),
            passed: false,
            metrics: BTreeMap::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Largest |S(Q,E) − e^{−βE}S(Q,−E)|/S(Q,E) over random (Q, E, β, m).
/// Draws where either value leaves the normal floating-point range are
/// redrawn.
pub fn detailed_balance_check(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let beta = rng.random_range(0.2..5.0);
        let m = rng.random_range(0.2..5.0);
        let gas = GasModel::new(beta, m, 1.0)?;
        let q = rng.random_range(0.05..6.0);
        let e = rng.random_range(-8.0..8.0) / beta;
        let point = SfPoint::new(q, e)?;
        let s = s_mb(point, &gas);
        if s.min(s_mb(point.reversed(), &gas)) < 1e-280 {
            continue;
        }
        taken += 1;
        worst = worst.max(detailed_balance_residual(point, &gas).abs() / s);
    }
    Ok(worst)
}

/// Largest relative residuals of the gas-distribution identity and of the
/// modulus of the two forms of L, over random arguments.
pub fn mb_identity_check(samples: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vec3 = |rng: &mut ChaCha8Rng, r: f64| [rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r)];
    let amp = ScatteringAmplitude::BornGaussian { g: 1.0, sigma: 0.7 };
    let (mut identity, mut forms): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let gas = GasModel::new(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), 1.0)?;
        let particle = ParticleModel::new(rng.random_range(1.0..20.0))?;
        let raw = vec3(&mut rng, 1.5);
        let big_p = vec3(&mut rng, 3.0);
        let mut q = vec3(&mut rng, 2.0);
        if q.iter().map(|x| x * x).sum::<f64>() < 0.01 {
            q[0] += 0.2;
        }
        let along = (0..3).map(|i| raw[i] * q[i]).sum::<f64>() / (0..3).map(|i| q[i] * q[i]).sum::<f64>();
        let p = [raw[0] - along * q[0], raw[1] - along * q[1], raw[2] - along * q[2]];
        let [first, _, last] = mb_identity_forms(&p, &big_p, &q, &gas, &particle)?;
        let scale = first.abs().max(last.abs());
        if scale > 0.0 {
            identity = identity.max((first - last).abs() / scale);
        }
        let a = lindblad_l(&p, &big_p, &q, &amp, &gas, &particle)?.norm();
        let b = lindblad_l_rewritten(&p, &big_p, &q, &amp, &gas, &particle)?.norm();
        let scale = a.max(b);
        if scale > 0.0 {
            forms = forms.max((a - b).abs() / scale);
        }
    }
    Ok((identity, forms))
}

fn models(cfg: &RunConfig) -> Result<(GasModel, ParticleModel)> {
    Ok((cfg.gas()?, cfg.particle()?))
}

fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn run_validation(cfg: &RunConfig) -> ValidationReport {
    let seed = cfg.monte_carlo.seed;
    let pot = cfg.potential;
    let mut suites = Vec::new();

    suites.push(suite("detailed_balance", || {
        let r = detailed_balance_check(10_000, seed)?;
        Ok((r <= 1e-12, metrics(&[("max_relative_residual", r)])))
    }));

    suites.push(suite("mb_identity", || {
        let (identity, forms) = mb_identity_check(10_000, seed.wrapping_add(1))?;
        Ok((
            identity <= 1e-12 && forms <= 1e-12,
            metrics(&[("identity_residual", identity), ("lindblad_modulus_residual", forms)]),
        ))
    }));

    suites.push(suite("translation_covariance", || {
        let (gas, particle) = models(cfg)?;
        let grid = MomentumGrid::one_d(cfg.grid.spacing, 32)?;
        let gen = build_generator(&grid, &gas, &particle, &pot)?;
        let qlbe = covariance_check(&gen, &grid, 100, seed)?;
        let planted = covariance_check(&DenseLindblad::translation_breaking(&grid, 1.0)?, &grid, 100, seed)?;
        Ok((
            qlbe <= 1e-13 && planted > 1e-3,
            metrics(&[("qlbe_residual", qlbe), ("counterexample_residual", planted)]),
        ))
    }));

    suites.push(suite("lindblad_structure", || {
        let (gas, particle) = models(cfg)?;
        let grid = MomentumGrid::one_d(cfg.grid.spacing, 32)?;
        let gen = build_generator(&grid, &gas, &particle, &pot)?;
        let rho = pure_state_gaussian(&grid, cfg.evolution.initial_center, cfg.evolution.initial_width)?;
        let ev = evolve(&gen, &rho, &EvolutionConfig::auto(&gen, 1.0, 10)?)?;
        let mut drift: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        for s in &ev.snapshots {
            if s.time > 0.0 {
                drift = drift.max((s.state.trace() - 1.0).norm() / s.time);
            }
            min_eig = min_eig.min(s.state.min_eigenvalue());
        }

        let small = MomentumGrid::one_d(cfg.grid.spacing, 4)?;
        let gen = build_generator(&small, &gas, &particle, &pot)?;
        let rho = pure_state_gaussian(&small, 0.0, 2.0 * cfg.grid.spacing)?;
        let t = 1.0;
        let auto = EvolutionConfig::auto(&gen, t, 1)?;
        let ev = evolve(&gen, &rho, &EvolutionConfig::new(auto.dt / 20.0, t, 1_000_000)?)?;
        let n = small.len();
        let exact = (dense_superoperator(&gen) * Complex64::new(t, 0.0)).exp()
            * DMatrix::from_column_slice(n * n, 1, rho.entries().as_slice());
        let exact = DMatrix::from_column_slice(n, n, exact.as_slice());
        let oracle = max_entry(&(ev.final_state().entries() - exact));
        Ok((
            drift <= 1e-10 && min_eig >= -1e-8 && oracle <= 1e-8,
            metrics(&[
                ("trace_drift_per_time", drift),
                ("min_eigenvalue", min_eig),
                ("dense_oracle_difference", oracle),
            ]),
        ))
    }));

    suites.push(suite("stationarity", || {
        let (gas, particle) = models(cfg)?;
        let p_th = particle.thermal_momentum(gas.beta());
        let grid = MomentumGrid::one_d(p_th / 8.0, 64)?;
        let gen = build_generator(&grid, &gas, &particle, &pot)?;
        let rates = diagonal_rates(&gen);
        let mb = maxwell_boltzmann_distribution(&grid, particle.mass(), gas.beta())?;
        let flux = rates.rate_of_change(mb.weights())?.iter().cloned().fold(0.0, |a: f64, b| a.max(b.abs()));
        let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
        let shift = 8.0 * grid.spacing();
        let displaced: Vec<f64> = grid
            .axis()
            .iter()
            .map(|p| (-gas.beta() * (p - shift).powi(2) / (2.0 * particle.mass())).exp())
            .collect();
        let mu0 = MomentumDistribution::normalized(grid, displaced)?;
        let mu = rates.evolve(&mu0, 20.0 / eta, rates.max_stable_dt())?;
        let tv = mu.total_variation(&mb)?;
        let bound = 1e-12 * gen.max_loss_rate();
        Ok((
            tv < 1e-3 && flux <= bound,
            metrics(&[("total_variation", tv), ("mb_flux", flux), ("mb_flux_bound", bound), ("eta", eta)]),
        ))
    }));

    suites.push(suite("equipartition_3d", || {
        let (gas, particle) = models(cfg)?;
        let sampler = JumpSampler::new(Dimension::Three, &gas, &particle, &pot)?;
        let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
        let t = 10.0 / eta;
        let tc = TrajectoryConfig {
            seed,
            n_trajectories: 20_000,
            t_final: t,
            record_interval: t,
        };
        let p_th = particle.thermal_momentum(gas.beta());
        let hist = MomentumGrid::three_d(p_th / 2.0, 8)?;
        let stats = run_ensemble(&tc, &InitialMomentum::Fixed(vec![0.0; 3]), &sampler, &hist)?;
        let per_axis = stats.ke_mean.last().copied().unwrap_or(0.0) / 3.0;
        let expected = 0.5 / gas.beta();
        let dev = (per_axis / expected - 1.0).abs();
        Ok((
            dev < 0.02,
            metrics(&[("ke_per_axis", per_axis), ("expected", expected), ("relative_deviation", dev)]),
        ))
    }));

    suites.push(suite("cl_coefficients", || {
        let (gas, particle) = models(cfg)?;
        let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
        let c = cl_coefficients(eta, &gas, &particle)?;
        let dev = (c.d_pp * c.d_xx - eta * eta / 16.0).abs() / (eta * eta / 16.0);
        Ok((
            dev <= 4.0 * f64::EPSILON,
            metrics(&[("eta", eta), ("d_pp", c.d_pp), ("d_xx", c.d_xx), ("relative_deviation", dev)]),
        ))
    }));

    suites.push(suite("instance_equality", || {
        let (gas, particle) = models(cfg)?;
        let grid = MomentumGrid::one_d(cfg.grid.spacing, 32)?;
        let gen = build_generator(&grid, &gas, &particle, &pot)?;
        let poisson = build_poisson_generator(&qlbe_poisson_spec(&grid, &gas, &particle, &pot)?, &grid)?;
        let n = grid.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let poisson_diff = max_entry(&(gen.apply(&m)? - poisson.apply(&m)?));

        let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
        let c = cl_coefficients(eta, &gas, &particle)?;
        let a = (2.0 * c.d_pp).sqrt();
        let spec = GaussianFormSpec::brownian(a, eta / (2.0 * a), particle.mass())?;
        let gaussian_diff = build_gaussian_moment_generator(&spec)?.max_abs_difference(&cl_moment_system(&c, &particle));
        Ok((
            poisson_diff <= 1e-13 && gaussian_diff <= 1e-12,
            metrics(&[("poisson_difference", poisson_diff), ("gaussian_moment_difference", gaussian_diff)]),
        ))
    }));

    let passed = suites.iter().all(|s| s.passed);
    ValidationReport { seed, passed, suites }
}
