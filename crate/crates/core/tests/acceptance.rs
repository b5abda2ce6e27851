//! Acceptance criteria 1-10. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlbe::brownian::{
    brownian_consistency, brownian_grid, cl_coefficients, cl_moment_evolve, cl_moment_system, friction_eta,
    max_stable_wigner_dt, wigner_kramers_evolve, AxisMoments, PhaseSpaceField,
};
use qlbe::cli_io::{run_subcommand, RunOptions, Subcommand};
use qlbe::config::RunConfig;
use qlbe::covariant::{
    build_gaussian_moment_generator, build_poisson_generator, covariance_check, qlbe_poisson_spec, DenseLindblad,
    GaussianFormSpec, Superoperator,
};
use qlbe::generator::{build_generator, dense_superoperator, diagonal_rates, evolve, EvolutionConfig};
use qlbe::jump::{run_ensemble, InitialMomentum, JumpSampler, TrajectoryConfig};
use qlbe::model::{
    maxwell_boltzmann_distribution, pure_state_gaussian, DensityMatrix, Dimension, GasModel, MomentumDistribution,
    MomentumGrid, ParticleModel, PotentialSpec,
};
use qlbe::quadrature::QuadratureConfig;
use qlbe::validation::{detailed_balance_check, mb_identity_check};
use qlbe::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn criterion_1() -> Result<Outcome> {
    let r = detailed_balance_check(10_000, 1)?;
    outcome(r <= 1e-12, format!("max relative residual {r:.2e} (tol 1e-12)"))
}

fn criterion_2() -> Result<Outcome> {
    let (identity, forms) = mb_identity_check(10_000, 2)?;
    outcome(
        identity <= 1e-12 && forms <= 1e-12,
        format!("identity residual {identity:.2e}, |L| forms {forms:.2e} (tol 1e-12)"),
    )
}

fn reference_models(big_m: f64, density: f64) -> Result<(GasModel, ParticleModel, PotentialSpec)> {
    Ok((
        GasModel::new(1.0, 1.0, density)?,
        ParticleModel::new(big_m)?,
        PotentialSpec::gaussian(1.0, 1.0)?,
    ))
}

fn criterion_3() -> Result<Outcome> {
    let (gas, particle, pot) = reference_models(10.0, 0.01)?;
    let grid = MomentumGrid::one_d(0.5, 32)?;
    let gen = build_generator(&grid, &gas, &particle, &pot)?;
    let qlbe = covariance_check(&gen, &grid, 100, 3)?;
    let planted = covariance_check(&DenseLindblad::translation_breaking(&grid, 1.0)?, &grid, 100, 3)?;
    outcome(
        grid.len() == 65 && qlbe <= 1e-13 && planted > 1e-3,
        format!("QLBE residual {qlbe:.2e} (tol 1e-13), counterexample {planted:.2e} (> 1e-3)"),
    )
}

fn criterion_4() -> Result<Outcome> {
    let cases = [
        (10.0, 0.01, PotentialSpec::gaussian(1.0, 1.0)?, 0.5, 32, 0.0, 1.0),
        (1.0, 0.02, PotentialSpec::gaussian(1.0, 0.5)?, 0.25, 40, 1.0, 0.5),
        (5.0, 0.01, PotentialSpec::cutoff_constant(1.0, 2.0)?, 0.25, 32, -0.5, 1.0),
        (20.0, 0.05, PotentialSpec::gaussian(2.0, 1.5)?, 0.5, 24, 2.0, 1.5),
    ];
    let mut drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for (big_m, density, pot, spacing, half, center, width) in cases {
        let gas = GasModel::new(1.0, 1.0, density)?;
        let particle = ParticleModel::new(big_m)?;
        let grid = MomentumGrid::one_d(spacing, half)?;
        let gen = build_generator(&grid, &gas, &particle, &pot)?;
        let rho = pure_state_gaussian(&grid, center, width)?;
        let ev = evolve(&gen, &rho, &EvolutionConfig::auto(&gen, 2.0, 5)?)?;
        for s in &ev.snapshots {
            if s.time > 0.0 {
                drift = drift.max((s.state.trace() - 1.0).norm() / s.time);
            }
            min_eig = min_eig.min(s.state.min_eigenvalue());
        }
    }

    let (gas, particle, pot) = reference_models(2.0, 0.02)?;
    let grid = MomentumGrid::one_d(0.5, 4)?;
    let gen = build_generator(&grid, &gas, &particle, &pot)?;
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut m = &a * a.adjoint();
    let tr = m.trace();
    m /= tr;
    let rho = DensityMatrix::new(grid, m)?;
    let t = 2.0;
    let auto = EvolutionConfig::auto(&gen, t, 1)?;
    let ev = evolve(&gen, &rho, &EvolutionConfig::new(auto.dt / 20.0, t, 1_000_000)?)?;
    let exact = (dense_superoperator(&gen) * Complex64::new(t, 0.0)).exp()
        * DMatrix::from_column_slice(n * n, 1, rho.entries().as_slice());
    let oracle = max_entry(&(ev.final_state().entries() - DMatrix::from_column_slice(n, n, exact.as_slice())));
    outcome(
        drift <= 1e-10 && min_eig >= -1e-8 && oracle <= 1e-8,
        format!(
            "trace drift/time {drift:.2e} (tol 1e-10), min eigenvalue {min_eig:.2e} (>= -1e-8), \
             9-point oracle {oracle:.2e} (tol 1e-8)"
        ),
    )
}

/// Pinned stationarity bound b(ΔP) = 1e−12 · R_max · ΔP/p_th.
fn stationarity_flux(gas: &GasModel, particle: &ParticleModel, pot: &PotentialSpec, spacing: f64, half: usize) -> Result<(f64, f64)> {
    let grid = MomentumGrid::one_d(spacing, half)?;
    let gen = build_generator(&grid, gas, particle, pot)?;
    let mb = maxwell_boltzmann_distribution(&grid, particle.mass(), gas.beta())?;
    let flux = diagonal_rates(&gen)
        .rate_of_change(mb.weights())?
        .iter()
        .fold(0.0, |a: f64, b| a.max(b.abs()));
    let bound = 1e-12 * gen.max_loss_rate() * spacing / particle.thermal_momentum(gas.beta());
    Ok((flux, bound))
}

fn criterion_5() -> Result<Outcome> {
    let (gas, particle, pot) = reference_models(10.0, 0.01)?;
    let p_th = particle.thermal_momentum(gas.beta());
    let spacing = p_th / 8.0;
    let grid = MomentumGrid::one_d(spacing, 64)?;
    let gen = build_generator(&grid, &gas, &particle, &pot)?;
    let rates = diagonal_rates(&gen);
    let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
    let shift = 8.0 * spacing;
    let displaced: Vec<f64> = grid
        .axis()
        .iter()
        .map(|p| (-gas.beta() * (p - shift).powi(2) / (2.0 * particle.mass())).exp())
        .collect();
    let mu0 = MomentumDistribution::normalized(grid, displaced)?;
    let mu = rates.evolve(&mu0, 20.0 / eta, rates.max_stable_dt())?;
    let mb = maxwell_boltzmann_distribution(&grid, particle.mass(), gas.beta())?;
    let tv = mu.total_variation(&mb)?;
    let (coarse, coarse_bound) = stationarity_flux(&gas, &particle, &pot, spacing, 64)?;
    let (fine, fine_bound) = stationarity_flux(&gas, &particle, &pot, spacing / 2.0, 128)?;
    outcome(
        grid.len() == 129 && tv < 1e-3 && coarse <= coarse_bound && fine <= fine_bound,
        format!(
            "TV at 20/eta {tv:.2e} (tol 1e-3), MB flux {coarse:.2e} <= {coarse_bound:.2e}, \
             halved grid {fine:.2e} <= {fine_bound:.2e}"
        ),
    )
}

fn criterion_6() -> Result<Outcome> {
    // 1D: ensemble histogram against the lattice master equation
    let (gas, particle, pot) = reference_models(5.0, 0.002)?;
    let spacing = 0.05;
    let grid = MomentumGrid::one_d(spacing, 360)?;
    let gen = build_generator(&grid, &gas, &particle, &pot)?;
    let rates = diagonal_rates(&gen);
    let p0 = 60.0 * spacing;
    let mut w0 = vec![0.0; grid.len()];
    w0[grid.nearest_index(p0).expect("on grid")] = 1.0;
    let mu0 = MomentumDistribution::new(grid, w0)?;
    let times = [0.5, 1.0, 2.0, 4.0];
    let exact = rates.evolve_at(&mu0, &times, rates.max_stable_dt() / 4.0)?;
    let sampler = JumpSampler::new(Dimension::One, &gas, &particle, &pot)?;
    let n = 100_000usize;
    let bin = 10;
    let mut worst_sigma: f64 = 0.0;
    let mut clipped = 0;
    for (t, me) in times.iter().zip(&exact) {
        let cfg = TrajectoryConfig {
            seed: 6,
            n_trajectories: n,
            t_final: *t,
            record_interval: *t,
        };
        let stats = run_ensemble(&cfg, &InitialMomentum::Fixed(vec![p0]), &sampler, &grid)?;
        clipped += stats.clipped;
        let coarse = |w: &[f64]| w.chunks(bin).map(|c| c.iter().sum::<f64>()).collect::<Vec<f64>>();
        let (mc, det) = (coarse(&stats.histogram), coarse(me.weights()));
        // bins with fewer than ten expected counts are pooled
        let (mut pool_mc, mut pool_det) = (0.0, 0.0);
        for (a, b) in mc.iter().zip(&det) {
            if b * n as f64 >= 10.0 {
                let sigma = (b * (1.0 - b) / n as f64).sqrt();
                worst_sigma = worst_sigma.max((a - b).abs() / sigma);
            } else {
                pool_mc += a;
                pool_det += b;
            }
        }
        if pool_det * n as f64 >= 10.0 {
            let sigma = (pool_det * (1.0 - pool_det) / n as f64).sqrt();
            worst_sigma = worst_sigma.max((pool_mc - pool_det).abs() / sigma);
        }
    }

    // 3D: equipartition
    let sampler = JumpSampler::new(Dimension::Three, &gas, &particle, &pot)?;
    let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
    let t = 10.0 / eta;
    let cfg = TrajectoryConfig {
        seed: 66,
        n_trajectories: n,
        t_final: t,
        record_interval: t,
    };
    let hist = MomentumGrid::three_d(particle.thermal_momentum(gas.beta()) / 2.0, 10)?;
    let stats = run_ensemble(&cfg, &InitialMomentum::Fixed(vec![0.0; 3]), &sampler, &hist)?;
    let ke_axis = stats.ke_mean.last().copied().unwrap_or(0.0) / 3.0;
    let dev = (ke_axis / (0.5 / gas.beta()) - 1.0).abs();
    outcome(
        worst_sigma <= 3.0 && clipped == 0 && dev < 0.02,
        format!(
            "1D worst bin deviation {worst_sigma:.2} sigma (tol 3), clipped {clipped}; \
             3D KE per axis {ke_axis:.4} vs 0.5, deviation {:.2}% (tol 2%)",
            100.0 * dev
        ),
    )
}

fn criterion_7() -> Result<Outcome> {
    let gas = GasModel::new(1.0, 1.0, 0.1)?;
    let pot = PotentialSpec::gaussian(1.0, 1.0)?;
    let mut devs = Vec::new();
    for big_m in [100.0, 10.0] {
        let particle = ParticleModel::new(big_m)?;
        let grid = brownian_grid(&gas, &particle, &pot)?;
        devs.push(brownian_consistency(&gas, &particle, &pot, &grid)?.relative_deviation);
    }
    outcome(
        devs[0] < 0.05 && devs[1] > devs[0],
        format!(
            "deviation {:.2}% at m/M = 0.01 (tol 5%), {:.2}% at m/M = 0.1",
            100.0 * devs[0],
            100.0 * devs[1]
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let gas = GasModel::new(1.0, 1.0, 0.1)?;
    let particle = ParticleModel::new(100.0)?;
    let pot = PotentialSpec::gaussian(1.0, 1.0)?;
    let eta = friction_eta(&gas, &particle, &pot, &QuadratureConfig::default())?;
    let c = cl_coefficients(eta, &gas, &particle)?;
    let product = (c.d_pp * c.d_xx - eta * eta / 16.0).abs() / (eta * eta / 16.0);

    let var_p = particle.mass() / gas.beta();
    let field = PhaseSpaceField::gaussian(-20.0, 0.5, 80, 1.0, 60, (0.0, 0.0), (4.0, var_p))?;
    let t = 5.0 / eta;
    let dt = max_stable_wigner_dt(&c, &particle, &field);
    let out = wigner_kramers_evolve(&c, &particle, &field, &EvolutionConfig::new(dt, t, 1_000_000)?)?;
    let v0 = field.var_p();
    let drift = out
        .iter()
        .map(|s| (s.field.var_p() / v0 - 1.0).abs().max(s.field.mean_p().abs() / v0.sqrt()))
        .fold(0.0, f64::max);

    let m0 = AxisMoments::from_gaussian(0.3, 7.0, 2.0, 50.0, 0.1);
    let mut decay: f64 = 0.0;
    for k in 0..=20 {
        let t = k as f64 * 0.25 / eta;
        let m = cl_moment_evolve(&c, &particle, &m0, t)?;
        decay = decay.max((m.mean_p - 7.0 * (-eta * t).exp()).abs());
    }
    outcome(
        product <= 4.0 * f64::EPSILON && (v0 / var_p - 1.0).abs() < 1e-3 && drift < 0.01 && decay <= 1e-10,
        format!(
            "D_pp D_xx vs eta^2/16 {product:.1e} relative, Wigner moment drift {:.3}% (tol 1%), \
             moment decay error {decay:.1e} (tol 1e-10)",
            100.0 * drift
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let mut poisson: f64 = 0.0;
    for (big_m, spacing, half) in [(10.0, 0.5, 32), (1.0, 0.25, 16), (4.0, 0.1, 64)] {
        let (gas, particle, pot) = reference_models(big_m, 0.01)?;
        let grid = MomentumGrid::one_d(spacing, half)?;
        let gen = build_generator(&grid, &gas, &particle, &pot)?;
        let pg = build_poisson_generator(&qlbe_poisson_spec(&grid, &gas, &particle, &pot)?, &grid)?;
        let n = grid.len();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        poisson = poisson.max(max_entry(&(gen.apply(&m)? - pg.apply(&m)?)));
    }
    let gas = GasModel::new(1.0, 1.0, 0.1)?;
    let particle = ParticleModel::new(100.0)?;
    let eta = friction_eta(&gas, &particle, &PotentialSpec::gaussian(1.0, 1.0)?, &QuadratureConfig::default())?;
    let c = cl_coefficients(eta, &gas, &particle)?;
    let a = (2.0 * c.d_pp).sqrt();
    let spec = GaussianFormSpec::brownian(a, eta / (2.0 * a), particle.mass())?;
    let gaussian = build_gaussian_moment_generator(&spec)?.max_abs_difference(&cl_moment_system(&c, &particle));
    outcome(
        poisson <= 1e-13 && gaussian <= 1e-12,
        format!("Poisson rebuild {poisson:.2e} (tol 1e-13), Gaussian moments {gaussian:.2e} (tol 1e-12)"),
    )
}

fn criterion_10() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let cfg = RunConfig::default();
    let mut reports = Vec::new();
    let mut codes = Vec::new();
    for run in ["first", "second"] {
        let opts = RunOptions {
            out_dir: Some(dir.path().join(run)),
            initial_state: None,
        };
        codes.push(run_subcommand(Subcommand::Validate, &cfg, &opts)?.exit_code);
        reports.push(std::fs::read(dir.path().join(run).join("validation.json"))?);
    }
    outcome(
        reports[0] == reports[1] && codes == [0, 0],
        format!(
            "validate exit codes {codes:?}, reports {} ({} bytes)",
            if reports[0] == reports[1] { "byte-identical" } else { "differ" },
            reports[0].len()
        ),
    )
}

type Criterion = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(u32, Criterion, Duration); 10] = [
        (1, criterion_1, Duration::from_secs(1)),
        (2, criterion_2, Duration::from_secs(1)),
        (3, criterion_3, Duration::from_secs(10)),
        (4, criterion_4, Duration::from_secs(30)),
        (5, criterion_5, Duration::from_secs(60)),
        (6, criterion_6, Duration::from_secs(300)),
        (7, criterion_7, Duration::from_secs(300)),
        (8, criterion_8, Duration::from_secs(60)),
        (9, criterion_9, Duration::from_secs(10)),
        (10, criterion_10, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (id, run, limit) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let (passed, detail) = match result {
            Ok(o) => (o.passed && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {id:>2}: {} | {detail} | {:.2}s (limit {}s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
