//! Subcommand runners, table formatting and atomic output files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::brownian::{cl_coefficients, cl_moment_evolve, friction_eta, AxisMoments};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::generator::{build_generator, evolve, EvolutionConfig};
use crate::jump::{run_ensemble, InitialMomentum, JumpSampler, TrajectoryConfig};
use crate::model::{pure_state_gaussian, DensityMatrix, Dimension, MomentumGrid};
use crate::quadrature::QuadratureConfig;
use crate::structure_factor::{detailed_balance_residual, energy_window, response_function, s_mb, SfPoint};
use crate::validation::run_validation;

/// Exit status of a finished run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Sfactor,
    Evolve,
    Unravel,
    Rates,
    Friction,
    ClEvolve,
    Validate,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Sfactor => "sfactor",
            Subcommand::Evolve => "evolve",
            Subcommand::Unravel => "unravel",
            Subcommand::Rates => "rates",
            Subcommand::Friction => "friction",
            Subcommand::ClEvolve => "cl-evolve",
            Subcommand::Validate => "validate",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "sfactor" => Subcommand::Sfactor,
            "evolve" => Subcommand::Evolve,
            "unravel" => Subcommand::Unravel,
            "rates" => Subcommand::Rates,
            "friction" => Subcommand::Friction,
            "cl-evolve" => Subcommand::ClEvolve,
            "validate" => Subcommand::Validate,
            other => return Err(Error::Config(format!("unknown subcommand {other:?}"))),
        })
    }
}

/// Exit code for an error: configuration and input problems give 2.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Shortest decimal that parses back to the same value.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Column-labelled numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&json!({ "columns": self.columns, "rows": self.rows }))?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Density matrix as `row,col,re,im` lines.
pub fn state_to_csv(rho: &DensityMatrix) -> String {
    let m = rho.entries();
    let mut s = String::from("row,col,re,im\n");
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            let _ = writeln!(s, "{r},{c},{},{}", format_number(z.re), format_number(z.im));
        }
    }
    s
}

pub fn state_from_csv(text: &str, grid: &MomentumGrid) -> Result<DensityMatrix> {
    let n = grid.len();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    let mut seen = vec![false; n * n];
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("row,col,re,im") {
        return Err(Error::Config("state file must start with the header row,col,re,im".into()));
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("state file line {}: expected row,col,re,im", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let r: usize = f[0].trim().parse().map_err(|_| bad())?;
        let c: usize = f[1].trim().parse().map_err(|_| bad())?;
        let re: f64 = f[2].trim().parse().map_err(|_| bad())?;
        let im: f64 = f[3].trim().parse().map_err(|_| bad())?;
        if r >= n || c >= n {
            return Err(Error::GridMismatch(format!("state entry ({r}, {c}) outside a {n}-point grid")));
        }
        m[(r, c)] = Complex64::new(re, im);
        seen[c * n + r] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config(format!("state file must list all {} entries", n * n)));
    }
    DensityMatrix::new(*grid, m)
}

/// Extra inputs of a run beyond the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output directory, overriding `output.directory`.
    pub out_dir: Option<PathBuf>,
    /// Initial state for `evolve`.
    pub initial_state: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    format: OutputFormat,
    files: Vec<PathBuf>,
}

impl Writer {
    fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        let (name, body) = match self.format {
            OutputFormat::Csv => (format!("{stem}.csv"), table.to_csv()),
            OutputFormat::Json => (format!("{stem}.json"), table.to_json()?),
        };
        self.raw(&name, &body)
    }

    fn report<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.raw(&format!("{stem}.json"), &body)
    }

    fn raw(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs one subcommand, writes its outputs and a manifest, and returns the
/// exit code. A failed validation suite gives exit code 1 rather than an error.
pub fn run_subcommand(cmd: Subcommand, cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let mut w = Writer {
        dir,
        format: cfg.output.format,
        files: Vec::new(),
    };
    let passed = match cmd {
        Subcommand::Sfactor => sfactor(cfg, &mut w)?,
        Subcommand::Evolve => run_evolve(cfg, opts, &mut w)?,
        Subcommand::Unravel => unravel(cfg, &mut w)?,
        Subcommand::Rates => rates(cfg, &mut w)?,
        Subcommand::Friction => friction(cfg, &mut w)?,
        Subcommand::ClEvolve => cl_evolve(cfg, &mut w)?,
        Subcommand::Validate => {
            let report = run_validation(cfg);
            w.report("validation", &report)?;
            report.passed
        }
    };
    let outputs: Vec<String> = w
        .files
        .iter()
        .map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let manifest = json!({
        "tool": "qlbe",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "seed": cfg.monte_carlo.seed,
        "config": cfg,
        "initial_state": opts.initial_state.as_ref().map(|p| p.display().to_string()),
        "outputs": outputs,
        "passed": passed,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    w.report(&format!("manifest-{}", cmd.name()), &manifest)?;
    Ok(RunOutcome {
        exit_code: if passed { EXIT_OK } else { EXIT_FAILURE },
        files: w.files,
    })
}

fn sfactor(cfg: &RunConfig, w: &mut Writer) -> Result<bool> {
    let gas = cfg.gas()?;
    let mut t = Table::new(&["q", "e", "s", "detailed_balance_residual", "response"]);
    let points = 41;
    for k in 1..=cfg.grid.half_extent {
        let q = k as f64 * cfg.grid.spacing;
        let (lo, hi) = energy_window(q, &gas);
        for i in 0..points {
            let e = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let pt = SfPoint::new(q, e)?;
            t.push(vec![q, e, s_mb(pt, &gas), detailed_balance_residual(pt, &gas), response_function(pt, &gas)]);
        }
    }
    w.table("sfactor", &t)?;
    Ok(true)
}

fn run_evolve(cfg: &RunConfig, opts: &RunOptions, w: &mut Writer) -> Result<bool> {
    let grid = cfg.momentum_grid()?;
    grid.require_one_d("evolve")?;
    let gen = build_generator(&grid, &cfg.gas()?, &cfg.particle()?, &cfg.potential)?;
    let rho0 = match &opts.initial_state {
        Some(path) => state_from_csv(&fs::read_to_string(path)?, &grid)?,
        None => pure_state_gaussian(&grid, cfg.evolution.initial_center, cfg.evolution.initial_width)?,
    };
    let ev_cfg = match cfg.evolution.dt {
        Some(dt) => EvolutionConfig::new(dt, cfg.evolution.t_final, cfg.evolution.record_every)?,
        None => EvolutionConfig::auto(&gen, cfg.evolution.t_final, cfg.evolution.record_every)?,
    };
    let ev = evolve(&gen, &rho0, &ev_cfg)?;
    let mut t = Table::new(&["t", "trace", "purity", "mean_p", "min_eigenvalue", "boundary_occupancy"]);
    for s in &ev.snapshots {
        t.push(vec![
            s.time,
            s.state.trace().re,
            s.state.purity(),
            s.state.mean_momentum(),
            s.state.min_eigenvalue(),
            s.state.boundary_occupancy(),
        ]);
    }
    w.table("evolution", &t)?;
    w.raw("state.csv", &state_to_csv(ev.final_state()))?;
    Ok(true)
}

fn unravel(cfg: &RunConfig, w: &mut Writer) -> Result<bool> {
    let grid = cfg.momentum_grid()?;
    let sampler = JumpSampler::new(grid.dimension(), &cfg.gas()?, &cfg.particle()?, &cfg.potential)?;
    let tc = TrajectoryConfig {
        seed: cfg.monte_carlo.seed,
        n_trajectories: cfg.monte_carlo.n_trajectories,
        t_final: cfg.evolution.t_final,
        record_interval: cfg.record_interval(),
    };
    let d = grid.dimension().count();
    let mut p0 = vec![0.0; d];
    p0[0] = cfg.evolution.initial_center;
    let stats = run_ensemble(&tc, &InitialMomentum::Fixed(p0), &sampler, &grid)?;

    let axes: &[&str] = if d == 1 { &["x"] } else { &["x", "y", "z"] };
    let mut cols: Vec<String> = vec!["t".into()];
    for prefix in ["mean_p", "var_p", "se_mean_p", "se_var_p"] {
        cols.extend(axes.iter().map(|a| format!("{prefix}{a}")));
    }
    cols.push("ke_mean".into());
    cols.push("se_ke".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&col_refs);
    for (i, &time) in stats.times.iter().enumerate() {
        let mut row = vec![time];
        row.extend(&stats.mean_p[i]);
        row.extend(&stats.var_p[i]);
        row.extend(&stats.se_mean_p[i]);
        row.extend(&stats.se_var_p[i]);
        row.push(stats.ke_mean[i]);
        row.push(stats.se_ke[i]);
        t.push(row);
    }
    w.table("ensemble", &t)?;

    let hist_cols: Vec<String> = axes.iter().map(|a| format!("p{a}")).chain(["weight".to_string()]).collect();
    let hist_refs: Vec<&str> = hist_cols.iter().map(String::as_str).collect();
    let mut h = Table::new(&hist_refs);
    for (k, &weight) in stats.histogram.iter().enumerate() {
        let mut row = grid.point(k);
        row.push(weight);
        h.push(row);
    }
    w.table("histogram", &h)?;
    w.report(
        "unravel",
        &json!({ "n_trajectories": stats.n_trajectories, "clipped": stats.clipped }),
    )?;
    Ok(true)
}

fn rates(cfg: &RunConfig, w: &mut Writer) -> Result<bool> {
    let grid = cfg.momentum_grid()?;
    let (gas, particle) = (cfg.gas()?, cfg.particle()?);
    let sampler = JumpSampler::new(grid.dimension(), &gas, &particle, &cfg.potential)?;
    let quad = QuadratureConfig::default();
    let d = grid.dimension().count();
    if grid.dimension() == Dimension::One {
        let gen = build_generator(&grid, &gas, &particle, &cfg.potential)?;
        let mut t = Table::new(&["p", "lattice_rate", "continuum_rate"]);
        for (k, &p) in grid.axis().iter().enumerate() {
            t.push(vec![p, gen.loss_rates()[k], sampler.total_rate(&[p], &quad)?]);
        }
        w.table("rates", &t)?;
    } else {
        let mut t = Table::new(&["p", "continuum_rate"]);
        for p in grid.axis() {
            let mut v = vec![0.0; d];
            v[0] = p;
            t.push(vec![p, sampler.total_rate(&v, &quad)?]);
        }
        w.table("rates", &t)?;
    }
    Ok(true)
}

fn friction(cfg: &RunConfig, w: &mut Writer) -> Result<bool> {
    let (gas, particle) = (cfg.gas()?, cfg.particle()?);
    let eta = friction_eta(&gas, &particle, &cfg.potential, &QuadratureConfig::default())?;
    let c = cl_coefficients(eta, &gas, &particle)?;
    w.report("friction", &c)?;
    Ok(true)
}

fn cl_evolve(cfg: &RunConfig, w: &mut Writer) -> Result<bool> {
    let (gas, particle) = (cfg.gas()?, cfg.particle()?);
    let eta = friction_eta(&gas, &particle, &cfg.potential, &QuadratureConfig::default())?;
    let c = cl_coefficients(eta, &gas, &particle)?;
    let var_p = cfg.evolution.initial_width.powi(2);
    let m0 = AxisMoments::from_gaussian(0.0, cfg.evolution.initial_center, 0.25 / var_p, var_p, 0.0);
    let mut t = Table::new(&["t", "mean_x", "mean_p", "var_x", "var_p", "cov_xp"]);
    let n = 20;
    for i in 0..=n {
        let time = cfg.evolution.t_final * i as f64 / n as f64;
        let m = cl_moment_evolve(&c, &particle, &m0, time)?;
        t.push(vec![time, m.mean_x, m.mean_p, m.var_x(), m.var_p(), m.cov_xp()]);
    }
    w.table("cl_moments", &t)?;
    Ok(true)
}
