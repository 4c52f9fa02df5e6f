//! Interacting-particle Monte Carlo for the quantile-coupled SDE.
//!
//! `N` particles evolve by Euler–Maruyama,
//!
//! ```text
//!     X^i_{k+1} = X^i_k + b(t_k, X^i_k, Qhat_k) dt + sigma(t_k, X^i_k, Qhat_k) sqrt(dt) Z^i_k,
//! ```
//!
//! where `Qhat_k` is the *empirical* alpha-quantile of the ensemble at step
//! `k` — the particle system reads the law-coupling of the PDE solvers
//! through the order statistics of its own positions. The module
//! cross-validates the deterministic fixed point: [`chaos_gap`] compares an
//! empirical quantile path against a converged
//! [`NonlinearSolution`](crate::nonlinear::NonlinearSolution).
//!
//! # Reproducibility
//!
//! Normals come from one ChaCha8 stream per particle (stream `i + 1` of the
//! run seed; stream `0` is reserved for initialization). Each particle owns
//! its generator, so records are byte-identical for a fixed
//! `(seed, N, dt)` regardless of thread count, and relabeling particles
//! cannot change the quantile path: streams are bound to particles in
//! position-sorted order (ties broken by input order).
//!
//! # Performance
//!
//! The per-step quantile uses selection (`select_nth_unstable`) rather than
//! a full sort, and position updates are data-parallel across particles;
//! the selection is the per-step synchronization point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::coeffs::CoefficientField;
use crate::density::{Density, DensityError, QuantileLevels};
use crate::linfp::QuantileCurve;
use crate::nonlinear::NonlinearSolution;

/// Generator identifier recorded in artifacts.
pub const GENERATOR_ID: &str = "chacha8/stream-per-particle";

/// Errors from the particle system.
#[derive(Debug, Error)]
pub enum ParticlesError {
    /// A parameter is outside its documented range.
    #[error("invalid parameter: {reason}")]
    InvalidParameter {
        /// Human-readable explanation.
        reason: String,
    },

    /// Fewer than two particles.
    #[error("need at least 2 particles, got {n}")]
    TooFewParticles {
        /// Offending ensemble size.
        n: usize,
    },

    /// A particle position left the finite range.
    #[error("particle {particle} became non-finite at step {step}")]
    NonFinitePosition {
        /// Step index at which the update produced the value.
        step: usize,
        /// Particle index (in position-sorted labeling).
        particle: usize,
    },

    /// Record and PDE solution cover different horizons.
    #[error(
        "horizon mismatch: record covers [{record_start}, {record_end}], \
         PDE curve covers [{pde_start}, {pde_end}]"
    )]
    HorizonMismatch {
        /// First record node.
        record_start: f64,
        /// Last record node.
        record_end: f64,
        /// First PDE curve node.
        pde_start: f64,
        /// Last PDE curve node.
        pde_end: f64,
    },

    /// Underlying density operation failed.
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// A labeled set of particle positions at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    /// Particle positions.
    pub positions: Vec<f64>,
    /// Time stamp.
    pub time: f64,
    /// Run seed the ensemble came from.
    pub seed: u64,
    /// Generator descriptor (see [`GENERATOR_ID`]).
    pub generator: String,
}

impl ParticleEnsemble {
    /// Validate and wrap an ensemble: at least two particles, all finite.
    pub fn new(positions: Vec<f64>, time: f64, seed: u64) -> Result<Self, ParticlesError> {
        if positions.len() < 2 {
            return Err(ParticlesError::TooFewParticles { n: positions.len() });
        }
        if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
            return Err(ParticlesError::InvalidParameter {
                reason: format!("position {i} is not finite"),
            });
        }
        Ok(Self { positions, time, seed, generator: GENERATOR_ID.to_string() })
    }

    /// Empirical quantiles of the ensemble at the given levels.
    pub fn quantiles(&self, levels: &QuantileLevels) -> Result<Vec<f64>, ParticlesError> {
        empirical_quantile(&self.positions, levels)
    }
}

/// How an Euler–Maruyama run gets its initial positions.
#[derive(Debug, Clone)]
pub enum InitSampler {
    /// All particles start at one point (a true Dirac — no mollifier).
    Point(f64),
    /// Stratified inverse-CDF draw from a grid density: particle `i` sits at
    /// `Q_{u_i}[u0]` with `u_i = (i + V_i) / N` and `V_i` uniform. The
    /// strata kill most of the initial quantile noise, which otherwise
    /// dominates small-time comparisons with the PDE.
    FromDensity(Density),
}

/// Parameters of one Euler–Maruyama run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    /// Ensemble size.
    pub n: usize,
    /// Target time step (the run uses the nearest step dividing the horizon
    /// exactly, as the PDE solvers do).
    pub dt: f64,
    /// Horizon.
    pub t_end: f64,
    /// Run seed.
    pub seed: u64,
    /// Coupling level for the empirical quantile.
    pub alpha: f64,
    /// Times at which to keep full position snapshots (snapped to the
    /// nearest step node).
    pub snapshot_times: Vec<f64>,
}

impl SimulationConfig {
    fn validate(&self) -> Result<(), ParticlesError> {
        if self.n < 2 {
            return Err(ParticlesError::TooFewParticles { n: self.n });
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ParticlesError::InvalidParameter {
                reason: format!("dt = {} must be positive", self.dt),
            });
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(ParticlesError::InvalidParameter {
                reason: format!("t_end = {} must be positive", self.t_end),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ParticlesError::InvalidParameter {
                reason: format!("quantile level {} outside (0, 1)", self.alpha),
            });
        }
        Ok(())
    }

    fn resolve(&self) -> (usize, f64) {
        let steps = (self.t_end / self.dt).round().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }
}

/// The empirical quantile path of one run, plus optional snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    /// Step nodes `0, dt, ..., T`.
    pub times: Vec<f64>,
    /// Empirical `alpha`-quantile at each node.
    pub quantiles: Vec<f64>,
    /// Full ensembles kept at configured times.
    pub snapshots: Vec<ParticleEnsemble>,
    /// Coupling level.
    pub alpha: f64,
    /// Ensemble size.
    pub n: usize,
    /// Run seed.
    pub seed: u64,
    /// Generator descriptor.
    pub generator: String,
}

impl SimulationRecord {
    /// Quantile path value at `t` by linear interpolation between step
    /// nodes; clamps outside the horizon.
    #[must_use]
    pub fn quantile_at(&self, t: f64) -> f64 {
        let times = &self.times;
        if t <= times[0] {
            return self.quantiles[0];
        }
        if t >= *times.last().expect("records are never empty") {
            return *self.quantiles.last().expect("records are never empty");
        }
        let hi = times.partition_point(|&s| s <= t).min(times.len() - 1);
        let lo = hi - 1;
        let w = (t - times[lo]) / (times[hi] - times[lo]);
        self.quantiles[lo] + w * (self.quantiles[hi] - self.quantiles[lo])
    }

    /// The quantile at the horizon.
    #[must_use]
    pub fn final_quantile(&self) -> f64 {
        *self.quantiles.last().expect("records are never empty")
    }
}

/// Empirical quantiles by order statistics: coordinate `j` is the
/// `ceil(alpha_j * N)`-th smallest position (left-continuous generalized
/// inverse of the empirical CDF), found by selection rather than sorting.
pub fn empirical_quantile(
    positions: &[f64],
    levels: &QuantileLevels,
) -> Result<Vec<f64>, ParticlesError> {
    let n = positions.len();
    if n < 2 {
        return Err(ParticlesError::TooFewParticles { n });
    }
    if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
        return Err(ParticlesError::InvalidParameter {
            reason: format!("position {i} is not finite"),
        });
    }
    let mut scratch = positions.to_vec();
    Ok(levels.as_slice().iter().map(|&alpha| select_quantile(&mut scratch, alpha)).collect())
}

/// `ceil(alpha n)`-th order statistic of `scratch` (1-based), in place.
fn select_quantile(scratch: &mut [f64], alpha: f64) -> f64 {
    let n = scratch.len();
    let k = (alpha * n as f64).ceil().max(1.0) as usize;
    let idx = k.min(n) - 1;
    *scratch.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// Run the self-coupled system: the drift and diffusion read the ensemble's
/// own empirical quantile each step.
pub fn simulate(
    field: &CoefficientField,
    init: &InitSampler,
    config: &SimulationConfig,
) -> Result<SimulationRecord, ParticlesError> {
    config.validate()?;
    let positions = initial_positions(init, config)?;
    run(field, positions, None, config)
}

/// Run with the coupling replaced by an exogenous frozen curve (the
/// decoupled replay used to isolate sampling error): the drift sees
/// `curve(t)`, while the record still reports the measured empirical
/// quantile.
pub fn simulate_replay(
    field: &CoefficientField,
    init: &InitSampler,
    curve: &QuantileCurve,
    config: &SimulationConfig,
) -> Result<SimulationRecord, ParticlesError> {
    config.validate()?;
    let positions = initial_positions(init, config)?;
    run(field, positions, Some(curve), config)
}

/// Run the self-coupled system from explicit initial positions.
///
/// `config.n` must match the position count. Noise streams attach to
/// particles in position-sorted order, so permuting the input changes
/// nothing — not even bitwise — as long as positions are distinct (ties
/// keep input order).
pub fn simulate_from_positions(
    field: &CoefficientField,
    positions: &[f64],
    config: &SimulationConfig,
) -> Result<SimulationRecord, ParticlesError> {
    config.validate()?;
    if positions.len() != config.n {
        return Err(ParticlesError::InvalidParameter {
            reason: format!(
                "config.n = {} but {} positions were supplied",
                config.n,
                positions.len()
            ),
        });
    }
    if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
        return Err(ParticlesError::InvalidParameter {
            reason: format!("position {i} is not finite"),
        });
    }
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    run(field, sorted, None, config)
}

/// Draw the initial positions; stratified draws come out already sorted.
fn initial_positions(
    init: &InitSampler,
    config: &SimulationConfig,
) -> Result<Vec<f64>, ParticlesError> {
    match init {
        InitSampler::Point(xi) => {
            if !xi.is_finite() {
                return Err(ParticlesError::InvalidParameter {
                    reason: format!("point init {xi} is not finite"),
                });
            }
            Ok(vec![*xi; config.n])
        }
        InitSampler::FromDensity(u0) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(0);
            let n = config.n;
            let targets: Vec<f64> = (0..n)
                .map(|i| {
                    let v: f64 = rng.random();
                    ((i as f64 + v) / n as f64).clamp(1e-12, 1.0 - 1e-12)
                })
                .collect();
            Ok(inverse_cdf_sorted(u0, &targets))
        }
    }
}

/// Inverse CDF of `u0` at an ascending list of levels, one grid pass,
/// matching [`Density::quantile`]'s linear interpolation inside cells.
fn inverse_cdf_sorted(u0: &Density, levels: &[f64]) -> Vec<f64> {
    let grid = u0.grid();
    let dx = grid.dx();
    let values = u0.values();
    let mass = u0.mass();
    let mut out = Vec::with_capacity(levels.len());
    let mut acc = 0.0;
    let mut j = 0;
    for &level in levels {
        let target = level * mass;
        while j < values.len() && acc + values[j] * dx < target {
            acc += values[j] * dx;
            j += 1;
        }
        if j >= values.len() {
            out.push(grid.x_max());
            continue;
        }
        let v = values[j];
        let x = if v > 0.0 { grid.left_edge(j) + (target - acc) / v } else { grid.left_edge(j) };
        out.push(x.clamp(grid.left_edge(j), grid.left_edge(j + 1)));
    }
    out
}

/// Euler–Maruyama core: positions must arrive in stream-binding order.
fn run(
    field: &CoefficientField,
    mut positions: Vec<f64>,
    replay: Option<&QuantileCurve>,
    config: &SimulationConfig,
) -> Result<SimulationRecord, ParticlesError> {
    let n = config.n;
    let (steps, dt) = config.resolve();
    let sqrt_dt = dt.sqrt();

    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();

    // Snapshot requests snapped to step nodes.
    let mut snapshot_steps: Vec<usize> = config
        .snapshot_times
        .iter()
        .map(|&ts| ((ts / dt).round().max(0.0) as usize).min(steps))
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let mut times = Vec::with_capacity(steps + 1);
    let mut quantiles = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut scratch = vec![0.0; n];

    for k in 0..=steps {
        let t = k as f64 * dt;
        scratch.copy_from_slice(&positions);
        let q_hat = select_quantile(&mut scratch, config.alpha);
        times.push(t);
        quantiles.push(q_hat);
        if snapshot_steps.binary_search(&k).is_ok() {
            snapshots.push(ParticleEnsemble {
                positions: positions.clone(),
                time: t,
                seed: config.seed,
                generator: GENERATOR_ID.to_string(),
            });
        }
        if k == steps {
            break;
        }

        let omega = replay.map_or(q_hat, |curve| curve.eval(t));
        positions.par_iter_mut().zip(rngs.par_iter_mut()).with_min_len(2048).for_each(
            |(x, rng)| {
                let z: f64 = rng.sample(StandardNormal);
                let b = field.drift(t, *x, omega);
                let s = field.sigma(t, *x, omega);
                *x += b * dt + s * sqrt_dt * z;
            },
        );
        // Serial scan so the reported index does not depend on scheduling.
        if let Some(i) = positions.iter().position(|v| !v.is_finite()) {
            return Err(ParticlesError::NonFinitePosition { step: k, particle: i });
        }
    }

    Ok(SimulationRecord {
        times,
        quantiles,
        snapshots,
        alpha: config.alpha,
        n,
        seed: config.seed,
        generator: GENERATOR_ID.to_string(),
    })
}

/// Propagation-of-chaos diagnostic for one run against a converged PDE
/// solution.
#[derive(Debug, Clone)]
pub struct ChaosReport {
    /// Largest gap over the PDE curve's nodes.
    pub sup_gap: f64,
    /// The PDE node times.
    pub times: Vec<f64>,
    /// `|Qhat_t - omega*_t|` per node.
    pub gaps: Vec<f64>,
}

/// Compare an empirical quantile path with the PDE fixed point on the PDE
/// curve's nodes (the record is interpolated).
pub fn chaos_gap(
    record: &SimulationRecord,
    pde: &NonlinearSolution,
) -> Result<ChaosReport, ParticlesError> {
    let times = pde.curve.times();
    let (pde_start, pde_end) = (times[0], *times.last().expect("curves are never empty"));
    let (rec_start, rec_end) =
        (record.times[0], *record.times.last().expect("records are never empty"));
    if (pde_start - rec_start).abs() > 1e-9 || (pde_end - rec_end).abs() > 1e-9 {
        return Err(ParticlesError::HorizonMismatch {
            record_start: rec_start,
            record_end: rec_end,
            pde_start,
            pde_end,
        });
    }

    let values = pde.curve.values();
    let mut gaps = Vec::with_capacity(times.len());
    let mut sup_gap = 0.0f64;
    for (&t, &w) in times.iter().zip(values) {
        let gap = (record.quantile_at(t) - w).abs();
        sup_gap = sup_gap.max(gap);
        gaps.push(gap);
    }
    Ok(ChaosReport { sup_gap, times: times.to_vec(), gaps })
}
