//! Scenario execution and artifact emission.
//!
//! Every runner follows the same artifact protocol: write the module CSVs
//! and a `report.json` into the output directory, then `timing.json`
//! (wall clock — deliberately excluded from hashing), and finally
//! `manifest.json` with the config echo and a SHA-256 digest per file.
//! Re-running a config therefore reproduces every non-timing byte, and
//! any artifact directory can be re-validated offline against its
//! manifest.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use quantfp::density::Density;
use quantfp::io;
use quantfp::linfp::{LinearSolver, PathMeta, QuantileCurve};
use quantfp::nonlinear::{self, NonlinearSolution, PicardTrace};
use quantfp::particles::{self, InitSampler, SimulationConfig, SimulationRecord};
use quantfp::stable::{self, StableSolver};
use quantfp::verify::{self, VerifyReport};

use crate::config::{ConfigError, InitialConfig, ScenarioConfig, ScenarioKind};

/// Errors from executing a validated scenario.
#[derive(Debug, Error)]
pub enum RunError {
    /// Configuration problems (exit code 2).
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A solver or sampler failed mid-run (exit code 1).
    #[error("{context}: {message}")]
    Scenario {
        /// Which stage failed.
        context: &'static str,
        /// The underlying error text.
        message: String,
    },
    /// Artifact I/O failed (exit code 1).
    #[error(transparent)]
    Io(#[from] io::IoError),
    /// Verification gates failed (exit code 1); artifacts were still written.
    #[error("verification failed: {failed} of {total} gates did not pass")]
    GatesFailed {
        /// Number of failing gates.
        failed: usize,
        /// Number of gates run.
        total: usize,
    },
}

fn during<E: std::fmt::Display>(context: &'static str) -> impl Fn(E) -> RunError {
    move |e| RunError::Scenario { context, message: e.to_string() }
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

/// Write `timing.json` and `manifest.json` (in that order; the manifest
/// hashes everything except itself and the timing file).
fn finalize(out: &Path, config_echo: serde_json::Value, started: Instant) -> Result<(), RunError> {
    io::write_json(
        &out.join("timing.json"),
        &Timing { wall_seconds: started.elapsed().as_secs_f64() },
    )?;
    let manifest = io::collect_manifest(out, config_echo)?;
    io::write_manifest(out, &manifest)?;
    Ok(())
}

fn prepare_out(out: &Path) -> Result<(), RunError> {
    fs::create_dir_all(out).map_err(during("creating the output directory"))
}

fn echo(config: &ScenarioConfig) -> Result<serde_json::Value, RunError> {
    serde_json::to_value(config).map_err(during("echoing the config"))
}

/// `linfp run`: solve the linear equation under the frozen feedback value
/// and emit `path.csv`, `final.csv`, and `report.json`.
pub fn run_linfp(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let started = Instant::now();
    prepare_out(out)?;
    let kind = ScenarioKind::Linfp;
    let grid = config.require_grid(kind)?.build()?;
    let window = config.require_time(kind)?.window()?;
    let x_box = (grid.x_min(), grid.x_max());
    let field = config.require_model(kind)?.build_field(x_box, config.omega_box()?)?;
    let solver = LinearSolver::new(field);
    let curve = QuantileCurve::constant(config.quantile.frozen_omega)
        .map_err(during("building the frozen curve"))?;

    let path = match *config.require_initial(kind)? {
        InitialConfig::Gaussian { mean, std } => {
            let u0 = Density::gaussian(grid.clone(), mean, std)
                .map_err(during("building the initial law"))?;
            solver.solve(&u0, &curve, window).map_err(during("linear solve"))?
        }
        InitialConfig::Dirac { origin, width_cells } => solver
            .solve_from_dirac_with_curve(
                &grid,
                origin,
                ScenarioConfig::dirac_width(width_cells),
                &curve,
                window,
            )
            .map_err(during("linear Dirac solve"))?,
        InitialConfig::Point { .. } => unreachable!("rejected by validate"),
    };

    #[derive(Serialize)]
    struct LinfpReport<'a> {
        frozen_omega: f64,
        stored_nodes: usize,
        meta: &'a PathMeta,
    }
    io::write_path_csv(&out.join("path.csv"), &path)?;
    io::write_density_csv(&out.join("final.csv"), path.final_density())?;
    io::write_json(
        &out.join("report.json"),
        &LinfpReport {
            frozen_omega: config.quantile.frozen_omega,
            stored_nodes: path.len(),
            meta: &path.meta,
        },
    )?;
    finalize(out, echo(config)?, started)?;
    println!("linfp run: {} stored nodes -> {}", path.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct FixedPointReport<'a> {
    alpha: f64,
    final_omega: f64,
    stored_nodes: usize,
    trace: &'a PicardTrace,
    meta: &'a PathMeta,
}

fn emit_fixed_point(
    config: &ScenarioConfig,
    out: &Path,
    solution: &NonlinearSolution,
    started: Instant,
    label: &str,
) -> Result<(), RunError> {
    io::write_path_csv(&out.join("path.csv"), &solution.path)?;
    io::write_curve_csv(&out.join("curve.csv"), &solution.curve)?;
    io::write_density_csv(&out.join("final.csv"), solution.path.final_density())?;
    io::write_json(
        &out.join("report.json"),
        &FixedPointReport {
            alpha: config.quantile.alpha,
            final_omega: solution.curve.values().last().copied().unwrap_or(f64::NAN),
            stored_nodes: solution.path.len(),
            trace: &solution.trace,
            meta: &solution.path.meta,
        },
    )?;
    finalize(out, echo(config)?, started)?;
    println!(
        "{label}: residual {:.3e} in {} iterations -> {}",
        solution.trace.residual,
        solution.trace.iterations.iter().sum::<usize>(),
        out.display()
    );
    Ok(())
}

/// `nonlinear solve`: run the Picard fixed point on the diffusive solver
/// and emit `path.csv`, `curve.csv`, `final.csv`, and `report.json`.
pub fn run_nonlinear(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let started = Instant::now();
    prepare_out(out)?;
    let kind = ScenarioKind::Nonlinear;
    let grid = config.require_grid(kind)?.build()?;
    let window = config.require_time(kind)?.window()?;
    let x_box = (grid.x_min(), grid.x_max());
    let field = config.require_model(kind)?.build_field(x_box, config.omega_box()?)?;
    let solver = LinearSolver::new(field);
    let options = config.picard.options();
    let alpha = config.quantile.alpha;

    let solution = match *config.require_initial(kind)? {
        InitialConfig::Gaussian { mean, std } => {
            let u0 = Density::gaussian(grid.clone(), mean, std)
                .map_err(during("building the initial law"))?;
            nonlinear::solve_nonlinear(&solver, &u0, alpha, window, &options)
                .map_err(during("Picard iteration"))?
        }
        InitialConfig::Dirac { origin, width_cells } => nonlinear::solve_nonlinear_dirac(
            &solver,
            &grid,
            origin,
            ScenarioConfig::dirac_width(width_cells),
            alpha,
            window,
            &options,
        )
        .map_err(during("Picard iteration"))?,
        InitialConfig::Point { .. } => unreachable!("rejected by validate"),
    };
    emit_fixed_point(config, out, &solution, started, "nonlinear solve")
}

/// `stable solve`: the same fixed point driven by the spectral stable
/// solver. The emitted path lives on the solver's extended grid.
pub fn run_stable(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let started = Instant::now();
    prepare_out(out)?;
    let kind = ScenarioKind::Stable;
    let grid = config.require_grid(kind)?.build()?;
    let window = config.require_time(kind)?.window()?;
    let x_box = (grid.x_min(), grid.x_max());
    let model = config.require_model(kind)?.build_stable(x_box, config.omega_box()?)?;
    let solver = StableSolver::new(model, &grid).map_err(during("building the stable solver"))?;
    let options = config.picard.options();
    let alpha = config.quantile.alpha;

    let solution = match *config.require_initial(kind)? {
        InitialConfig::Gaussian { mean, std } => {
            let u0 = Density::gaussian(grid.clone(), mean, std)
                .map_err(during("building the initial law"))?;
            stable::solve_stable_nonlinear(&solver, &u0, alpha, window, &options)
                .map_err(during("Picard iteration"))?
        }
        InitialConfig::Dirac { origin, width_cells } => stable::solve_stable_nonlinear_dirac(
            &solver,
            origin,
            ScenarioConfig::dirac_width(width_cells),
            alpha,
            window,
            &options,
        )
        .map_err(during("Picard iteration"))?,
        InitialConfig::Point { .. } => unreachable!("rejected by validate"),
    };
    emit_fixed_point(config, out, &solution, started, "stable solve")
}

/// `particles run`: one independent replication per configured seed, in
/// parallel; per-seed record CSVs, snapshot CSVs, and a summary report.
pub fn run_particles(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let started = Instant::now();
    prepare_out(out)?;
    let kind = ScenarioKind::Particles;
    let time = config.require_time(kind)?;
    let section = config.particles.as_ref().expect("validated");
    let model = config.require_model(kind)?;

    let init = match *config.require_initial(kind)? {
        InitialConfig::Point { origin } => InitSampler::Point(origin),
        InitialConfig::Gaussian { mean, std } => {
            let grid = config.require_grid(kind)?.build()?;
            let u0 =
                Density::gaussian(grid, mean, std).map_err(during("building the initial law"))?;
            InitSampler::FromDensity(u0)
        }
        InitialConfig::Dirac { .. } => unreachable!("rejected by validate"),
    };
    // The omega sampling box only calibrates model constants; particle runs
    // may omit the grid, so fall back to a unit box.
    let omega_box = match config.grid {
        Some(g) => (g.x_min / 4.0, g.x_max / 4.0),
        None => (-1.0, 1.0),
    };
    let x_box = match config.grid {
        Some(g) => (g.x_min, g.x_max),
        None => (-8.0, 8.0),
    };
    let field = model.build_field(x_box, omega_box)?;

    let records: Vec<SimulationRecord> = section
        .seeds
        .par_iter()
        .map(|&seed| {
            let sim = SimulationConfig {
                n: section.n,
                dt: section.dt.unwrap_or(time.dt),
                t_end: time.t_end,
                seed,
                alpha: config.quantile.alpha,
                snapshot_times: section.snapshot_times.clone(),
            };
            particles::simulate(&field, &init, &sim)
        })
        .collect::<Result<_, _>>()
        .map_err(during("particle simulation"))?;

    #[derive(Serialize)]
    struct SnapshotEntry {
        time: f64,
        file: String,
    }
    #[derive(Serialize)]
    struct SeedSummary {
        seed: u64,
        record_file: String,
        final_quantile: f64,
        snapshots: Vec<SnapshotEntry>,
    }
    #[derive(Serialize)]
    struct ParticlesReport {
        generator: &'static str,
        n: usize,
        dt: f64,
        t_end: f64,
        alpha: f64,
        seeds: Vec<SeedSummary>,
    }

    let mut summaries = Vec::with_capacity(records.len());
    for record in &records {
        let record_file = format!("record_seed{}.csv", record.seed);
        io::write_record_csv(&out.join(&record_file), record)?;
        let mut snapshots = Vec::with_capacity(record.snapshots.len());
        for (index, ensemble) in record.snapshots.iter().enumerate() {
            let file = format!("snapshot_seed{}_{index}.csv", record.seed);
            io::write_ensemble_csv(&out.join(&file), ensemble)?;
            snapshots.push(SnapshotEntry { time: ensemble.time, file });
        }
        summaries.push(SeedSummary {
            seed: record.seed,
            record_file,
            final_quantile: record.quantiles.last().copied().unwrap_or(f64::NAN),
            snapshots,
        });
    }
    io::write_json(
        &out.join("report.json"),
        &ParticlesReport {
            generator: particles::GENERATOR_ID,
            n: section.n,
            dt: section.dt.unwrap_or(time.dt),
            t_end: time.t_end,
            alpha: config.quantile.alpha,
            seeds: summaries,
        },
    )?;
    finalize(out, echo(config)?, started)?;
    println!(
        "particles run: {} seeds x {} particles -> {}",
        records.len(),
        section.n,
        out.display()
    );
    Ok(())
}

/// `verify [--subset NAME]`: run the gate suite, print one verdict line
/// per gate, optionally write `report.json` plus manifest, and fail with
/// exit code 1 when any gate fails.
pub fn run_verify(
    config: Option<&ScenarioConfig>,
    subset_flag: Option<&str>,
    out: Option<&Path>,
) -> Result<(), RunError> {
    let started = Instant::now();
    let subset = subset_flag.unwrap_or_else(|| config.map(|c| c.subset()).unwrap_or("all"));
    let report: VerifyReport = verify::run_subset(subset).map_err(|e| ConfigError::Invalid {
        field: "verify.subset".to_string(),
        reason: e.to_string(),
    })?;
    for gate in &report.gates {
        let verdict = if gate.passed { "PASS" } else { "FAIL" };
        let numbers = gate
            .measured
            .iter()
            .map(|(key, value)| format!("{key}={value:.4e}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!("[{verdict}] gate {:>2} {:<24} {numbers}", gate.id, gate.name);
        if let Some(detail) = &gate.detail {
            println!("                 error: {detail}");
        }
    }
    if let Some(dir) = out {
        prepare_out(dir)?;
        io::write_json(&dir.join("report.json"), &report)?;
        let config_echo = match config {
            Some(c) => serde_json::to_value(c).map_err(during("echoing the config"))?,
            None => serde_json::json!({ "scenario": "verify", "verify": { "subset": subset } }),
        };
        finalize(dir, config_echo, started)?;
    }
    if report.all_passed {
        println!("verify: all {} gates passed (subset `{subset}`)", report.gates.len());
        Ok(())
    } else {
        let failed = report.gates.iter().filter(|g| !g.passed).count();
        Err(RunError::GatesFailed { failed, total: report.gates.len() })
    }
}
