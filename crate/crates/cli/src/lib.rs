//! Subcommands of the `choquard` binary.
//!
//! Every command reads one TOML experiment file, runs inside a rayon pool of
//! the requested size and writes its artifacts under the output directory.
//! Results are deterministic given the file and the seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use choquard_core::config::Command;
use choquard_core::dynamics::{self, conservation_drift, SweepConfig, SweepReport};
use choquard_core::field::snapshot;
use choquard_core::ground_state::{self, GroundStateMeta};
use choquard_core::propagator::{build_initial_data, check_admissibility, AdmissibilityReport};
use choquard_core::{
    EnergyFunctional, Error, EvolveOptions, ExperimentConfig, GridSpec, GroundState, PropagatorState, RieszMode,
    RieszOperator, TrajectorySample,
};

mod check;

pub use check::{run_checks, CheckRow};

/// Largest number of grid points a single field may have (256³).
pub const MAX_POINTS: usize = 1 << 24;

#[derive(Debug, Parser)]
#[command(name = "choquard", version, about = "Ground states and semiclassical dynamics of the generalized Choquard equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Normalized gradient flow and certification; writes profile.chqf and ground_state.json
    GroundState(Common),
    /// Evolve from the ground state; writes trajectory.csv
    Evolve(Common),
    /// Evolve once per ε of the [sweep] list; writes sweep.toml and one CSV per ε
    Sweep(Common),
    /// Validate the file, certify the potential and run the invariant smoke suite
    Check(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment file (TOML)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the file's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl Sub {
    pub fn name(&self) -> &'static str {
        match self {
            Sub::GroundState(_) => "ground-state",
            Sub::Evolve(_) => "evolve",
            Sub::Sweep(_) => "sweep",
            Sub::Check(_) => "check",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Sub::GroundState(c) | Sub::Evolve(c) | Sub::Sweep(c) | Sub::Check(c) => c,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("{failed} of {total} checks failed")]
    CheckFailed { failed: usize, total: usize },
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Resource(_) => "resource_limit",
            CliError::CheckFailed { .. } => "check_failed",
            CliError::Threads(_) => "threads",
        }
    }

    /// 2 for unusable input, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Config(_)) => 2,
            _ => 1,
        }
    }

    /// One-line JSON error record.
    pub fn record(&self, command: &str) -> String {
        serde_json::json!({
            "status": "error",
            "command": command,
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Load the file, apply the flag overrides and dispatch.
pub fn run(cli: &Cli) -> CliResult<()> {
    let common = cli.command.common();
    let cfg = resolve_config(common)?;
    let threads = common.threads.unwrap_or_else(default_threads);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Threads(e.to_string()))?;
    info!("{} with {threads} threads, seed {}", cli.command.name(), cfg.seed);
    pool.install(|| match &cli.command {
        Sub::GroundState(_) => cmd_ground_state(&cfg).map(drop),
        Sub::Evolve(_) => cmd_evolve(&cfg).map(drop),
        Sub::Sweep(_) => cmd_sweep(&cfg).map(drop),
        Sub::Check(_) => cmd_check(&cfg).map(drop),
    })
}

pub fn resolve_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.directory = o.clone();
    }
    Ok(cfg)
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn guard_grid(grid: &GridSpec, what: &str) -> CliResult<()> {
    if grid.len() > MAX_POINTS {
        return Err(CliError::Resource(format!(
            "{what} grid {}^{} has {} points (limit {MAX_POINTS})",
            grid.points,
            grid.dim,
            grid.len()
        )));
    }
    Ok(())
}

fn output_dir(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir).map_err(Error::from)?;
    // the resolved file, so every artifact can be reproduced from the directory alone
    fs::write(dir.join("config.toml"), cfg.to_toml()?).map_err(Error::from)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable record");
    fs::write(path, text + "\n").map_err(Error::from)?;
    Ok(())
}

/// Ground state of the `[grid]`/`[flow]` sections.
pub fn compute_ground_state(cfg: &ExperimentConfig) -> CliResult<(EnergyFunctional, GroundState)> {
    cfg.require(Command::GroundState)?;
    let grid = cfg.profile_grid()?;
    guard_grid(&grid, "profile")?;
    let riesz = Arc::new(RieszOperator::build(grid, cfg.model.theta, RieszMode::FreeSpace)?);
    let f = EnergyFunctional::new(riesz, cfg.model.p);
    let nu = cfg.flow.as_ref().map(|s| s.nu).unwrap_or_default();
    let gs = f.normalized_gradient_flow(nu, &cfg.flow_options()?)?;
    info!(
        "ground state: J = {:.10e}, ω = {:.8e}, {} iterations, residuals {:?}",
        gs.j_value, gs.omega, gs.iterations, gs.pohozaev_residuals
    );
    Ok((f, gs))
}

#[derive(Debug, Serialize)]
struct GroundStateRecord<'a> {
    schema: &'a str,
    seed: u64,
    dim: usize,
    n: usize,
    #[serde(rename = "L")]
    extent: f64,
    half_width: f64,
    #[serde(flatten)]
    meta: GroundStateMeta,
}

pub fn cmd_ground_state(cfg: &ExperimentConfig) -> CliResult<GroundState> {
    let (f, gs) = compute_ground_state(cfg)?;
    let dir = output_dir(cfg)?;
    let grid = f.grid();
    let record = GroundStateRecord {
        schema: &cfg.schema,
        seed: cfg.seed,
        dim: grid.dim,
        n: grid.points,
        extent: grid.extent,
        half_width: ground_state::profile_half_width(&gs.u),
        meta: f.meta(&gs)?,
    };
    snapshot::save(&gs.u, &dir.join("profile.chqf"))?;
    write_json(&dir.join("ground_state.json"), &record)?;
    println!(
        "J = {:.10e}  ω = {:.8e}  Pohožaev residuals {:.2e} {:.2e} {:.2e}  stationarity {:.2e}",
        gs.j_value,
        gs.omega,
        record.meta.pohozaev_residuals[0],
        record.meta.pohozaev_residuals[1],
        record.meta.pohozaev_residuals[2],
        record.meta.stationarity
    );
    Ok(gs)
}

#[derive(Debug, Serialize)]
struct EvolveRecord {
    omega: f64,
    dt: f64,
    steps: usize,
    points: usize,
    charge_drift: f64,
    energy_drift: f64,
    admissibility: AdmissibilityReport,
}

pub fn cmd_evolve(cfg: &ExperimentConfig) -> CliResult<Vec<TrajectorySample>> {
    cfg.require(Command::Evolve)?;
    let e = cfg.evolve.clone().expect("checked by require");
    let potential = cfg.potential.clone().expect("checked by require");
    potential.validate()?;
    let grid = cfg.evolve_grid()?;
    guard_grid(&grid, "evolution")?;

    let (_, gs) = compute_ground_state(cfg)?;
    let params = cfg.model_params()?.with_omega(gs.omega);
    let speed = params.v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let admissibility = check_admissibility(&gs.u, None, speed, &potential, &params, e.admissibility_level)?;
    if !admissibility.admissible {
        warn!("initial data not admissible at K = {}: {}", e.admissibility_level, admissibility.violations.join("; "));
    }

    let dir = output_dir(cfg)?;
    let snapshots = if cfg.output.snapshot_stride > 0 {
        let sdir = dir.join("snapshots");
        fs::create_dir_all(&sdir).map_err(Error::from)?;
        Some((cfg.output.snapshot_stride, sdir))
    } else {
        None
    };
    let psi0 = build_initial_data(&gs.u, &params, None, grid)?;
    let riesz = Arc::new(RieszOperator::build(grid, params.theta, RieszMode::FreeSpace)?);
    let mut state = PropagatorState::new(psi0, params.clone(), potential, riesz, e.c_t)?;
    let opts = EvolveOptions { callback_stride: e.callback_stride, diag: cfg.diag_options(&gs.u), snapshots };
    let samples = state.evolve(e.horizon, &opts)?;

    let file = fs::File::create(dir.join("trajectory.csv")).map_err(Error::from)?;
    dynamics::write_trajectory_csv(&samples, params.dim, std::io::BufWriter::new(file))?;
    let (charge_drift, energy_drift) = conservation_drift(&samples);
    write_json(
        &dir.join("evolve.json"),
        &EvolveRecord {
            omega: gs.omega,
            dt: state.dt(),
            steps: state.steps(),
            points: grid.points,
            charge_drift,
            energy_drift,
            admissibility,
        },
    )?;
    println!(
        "{} steps of dt = {:.6e}; {} samples; charge drift {charge_drift:.2e}, energy drift {energy_drift:.2e}",
        state.steps(),
        state.dt(),
        samples.len()
    );
    Ok(samples)
}

/// File name of the trajectory of one sweep member.
pub fn sweep_csv_name(eps: f64) -> String {
    format!("trajectory_eps_{eps}.csv")
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> CliResult<SweepReport> {
    cfg.require(Command::Sweep)?;
    let e = cfg.evolve.clone().expect("checked by require");
    let s = cfg.sweep.clone().expect("checked by require");
    if s.eps.is_empty() || !s.eps.iter().all(|x| *x > 0.0) {
        return Err(Error::Config(format!("sweep.eps: expected positive values, found {:?}", s.eps)).into());
    }
    let params = cfg.model_params()?;
    let eps_ref = s.eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for &eps in &s.eps {
        let points = dynamics::sweep_points(s.n_ref, eps_ref, eps, params.beta);
        guard_grid(&GridSpec::new(params.dim, e.extent, points)?, &format!("ε = {eps}"))?;
    }

    let (_, gs) = compute_ground_state(cfg)?;
    let sweep = SweepConfig {
        params: params.with_omega(gs.omega),
        potential: cfg.potential.clone().expect("checked by require"),
        diag: cfg.diag_options(&gs.u),
        profile: gs.u,
        eps_list: s.eps,
        extent: e.extent,
        n_ref: s.n_ref,
        horizon: e.horizon,
        c_t: e.c_t,
        callback_stride: e.callback_stride,
        classical_dt: e.classical_dt,
    };
    let report = dynamics::run_epsilon_sweep(&sweep);

    let dir = output_dir(cfg)?;
    for m in &report.members {
        let file = fs::File::create(dir.join(sweep_csv_name(m.eps))).map_err(Error::from)?;
        dynamics::write_trajectory_csv(&m.samples, params.dim, std::io::BufWriter::new(file))?;
        println!(
            "ε = {:<6} n = {:<4} sup|H| = {:.3e}  sup|q − q_cl| = {:.3e}  charge drift {:.1e}",
            m.eps, m.points, m.sup_h, m.sup_distance, m.charge_drift
        );
    }
    let summary = toml::to_string(&report).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("sweep.toml"), summary).map_err(Error::from)?;
    Ok(report.into_result()?)
}

/// Prints the table and fails if any row failed.
pub fn cmd_check(cfg: &ExperimentConfig) -> CliResult<Vec<CheckRow>> {
    cfg.require(Command::Check)?;
    let rows = run_checks(cfg)?;
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &rows {
        println!("{:<width$}  {}  {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
    }
    let dir = output_dir(cfg)?;
    write_json(&dir.join("check.json"), &rows)?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::CheckFailed { failed, total: rows.len() });
    }
    Ok(rows)
}
