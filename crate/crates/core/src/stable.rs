//! Spectral Strang solver for the fractional law equation.
//!
//! This module integrates
//!
//! ```text
//!     d/dt u = -d/dx (b(t, x, omega) u) - (-Lap)^{alpha_s/2} [ a(x) u ]
//! ```
//!
//! for a stability index `alpha_s` in `(1, 2]`, with the quantile feedback
//! `omega` supplied as a frozen [`QuantileCurve`] exactly as in [`linfp`].
//! The fractional operator acts on the *product* `a(x) u`, which is the
//! divergence-form analogue of the diffusive `d2/dx2 (a u)` term and keeps
//! the total mass invariant: the Fourier multiplier `-|k|^{alpha_s}`
//! vanishes at `k = 0`.
//!
//! # Discretization
//!
//! * **Periodic extension.** The scenario box is embedded centrally into a
//!   grid extended by [`defaults::SPECTRAL_EXTENSION_FACTOR`] and rounded up
//!   to a power-of-two cell count. All spectral work happens on the extended
//!   grid, whose ends must stay numerically empty: each outermost cell may
//!   carry at most [`defaults::SPECTRAL_BOUNDARY_BUDGET`] mass, checked every
//!   step, so the periodic wrap-around is quantitatively negligible. Heavy
//!   tails make this a real constraint — callers size the box so that
//!   `c t |x|^{-(1+alpha_s)}` has decayed below the budget at the fold.
//! * **Strang splitting.** Each step advances drift for `dt/2`, the
//!   fractional part for `dt`, then drift for `dt/2`. The drift half-steps
//!   use a conservative MUSCL upwind scheme (monotonized-central limiter,
//!   Heun/SSPRK2 in time, zero-flux ends) under an explicit CFL check. The
//!   fractional step is an exact exponential integrator when `a` is
//!   constant; for variable `a` it freezes the midpoint `abar` of the
//!   coefficient bounds in an integrating factor and advances the remainder
//!   semi-implicitly,
//!
//!   ```text
//!       u^{n+1} = exp(-dt abar |k|^alpha) ( u^n - dt |k|^alpha F[(a - abar) u^n] ),
//!   ```
//!
//!   whose per-mode amplification `exp(-s)(1 + r s)` stays below one for
//!   every `s >= 0` because `r = |a - abar| / abar < 1` whenever the
//!   coefficient bounds are positive. Both branches leave the `k = 0` mode
//!   untouched, so mass is conserved to roundoff.
//! * **Clipping.** Spectral ringing below [`defaults::SPECTRAL_CLIP_FLOOR`]
//!   aborts the run; milder negative excursions are clipped to zero only
//!   when a node is stored, and the discarded mass is tallied in
//!   [`PathMeta`].
//!
//! [`StableSolver`] implements [`PathSolver`], so the Picard iteration in
//! [`nonlinear`] drives it exactly like the diffusive solver; convenience
//! wrappers [`solve_stable_nonlinear`] and [`solve_stable_nonlinear_dirac`]
//! are provided for symmetry with the linear API.
//!
//! [`linfp`]: crate::linfp
//! [`nonlinear`]: crate::nonlinear

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::coeffs::StableModel;
use crate::defaults;
use crate::density::{Density, DensityError};
use crate::grid::{Grid, GridError};
use crate::linfp::{DensityPath, PathMeta, QuantileCurve, TimeWindow};
use crate::nonlinear::{self, NonlinearError, NonlinearSolution, PathSolver, PicardOptions};

/// Errors from the spectral solver.
#[derive(Debug, Error)]
pub enum StableError {
    /// A parameter is outside its documented range.
    #[error("invalid parameter: {reason}")]
    InvalidParameter {
        /// Human-readable explanation.
        reason: String,
    },

    /// Input lives on a grid the workspace does not recognize.
    #[error("grid mismatch: {reason}")]
    GridMismatch {
        /// What was expected and what arrived.
        reason: String,
    },

    /// An outermost extended cell carries more mass than the per-side
    /// budget allows; the periodic wrap-around would contaminate the run.
    #[error(
        "boundary mass {mass:.3e} on the {side} side exceeds budget \
         {budget:.3e} at step {step}"
    )]
    BoundaryMassExceeded {
        /// `"left"` or `"right"`.
        side: &'static str,
        /// Mass in the offending cell.
        mass: f64,
        /// Per-side budget.
        budget: f64,
        /// Step index at which the budget broke (0 for a pre-check).
        step: usize,
    },

    /// The advection half-step would outrun its CFL bound.
    #[error(
        "drift CFL violated: dt = {dt:.3e} exceeds dt_max = {dt_max:.3e} \
         (max |b| = {max_drift:.3})"
    )]
    CflViolation {
        /// Requested step.
        dt: f64,
        /// Largest admissible step.
        dt_max: f64,
        /// Measured drift bound on the extended grid.
        max_drift: f64,
    },

    /// Spectral ringing produced negatives below the clip floor.
    #[error(
        "spectral ringing reached {min:.3e}, below the clip floor \
         {floor:.3e}, at step {step}"
    )]
    ExcessiveRinging {
        /// Most negative cell value observed.
        min: f64,
        /// Admissible floor.
        floor: f64,
        /// Step index.
        step: usize,
    },

    /// The fractional generator output failed to integrate to zero.
    #[error(
        "fractional operator output has mass {mass:.3e}, beyond the \
         neutrality tolerance {tol:.1e}"
    )]
    MassNotNeutral {
        /// Integral of the operator output.
        mass: f64,
        /// Tolerance.
        tol: f64,
    },

    /// A time step changed the total mass beyond tolerance.
    #[error("mass drifted by {drift:.3e} (tolerance {tol:.1e}) at step {step}")]
    MassDrift {
        /// Absolute deviation from the initial mass.
        drift: f64,
        /// Tolerance.
        tol: f64,
        /// Step index.
        step: usize,
    },

    /// A Dirac origin sits too close to the scenario boundary for the
    /// requested horizon.
    #[error(
        "dirac origin {origin} is within the localization margin {margin:.3} \
         of the scenario box [{x_min}, {x_max}]"
    )]
    DiracTooClose {
        /// Requested origin.
        origin: f64,
        /// Required clearance.
        margin: f64,
        /// Scenario left edge.
        x_min: f64,
        /// Scenario right edge.
        x_max: f64,
    },

    /// Underlying density construction failed.
    #[error(transparent)]
    Density(#[from] DensityError),

    /// Underlying grid construction failed.
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Precomputed spectral machinery: the extended grid, the fractional
/// multiplier and FFT plans.
///
/// The workspace is tied to one scenario grid and one stability index;
/// solvers and the standalone [`fractional_apply`] both borrow it.
pub struct SpectralWorkspace {
    scenario: Grid,
    extended: Grid,
    offset: usize,
    alpha_s: f64,
    /// `|k_m|^{alpha_s}` for each FFT bin `m`.
    multiplier: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralWorkspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralWorkspace")
            .field("scenario", &self.scenario)
            .field("extended", &self.extended)
            .field("offset", &self.offset)
            .field("alpha_s", &self.alpha_s)
            .finish()
    }
}

impl SpectralWorkspace {
    /// Build the workspace for a scenario grid and stability index.
    ///
    /// The extended grid has `(factor * n).next_power_of_two()` cells with
    /// the same spacing, and the scenario box sits centrally inside it (up
    /// to one cell when the padding is odd).
    pub fn new(scenario: &Grid, alpha_s: f64) -> Result<Self, StableError> {
        if !(alpha_s.is_finite() && alpha_s > 1.0 && alpha_s <= 2.0) {
            return Err(StableError::InvalidParameter {
                reason: format!("stability index {alpha_s} outside (1, 2]"),
            });
        }
        let n = scenario.n();
        let n_ext = (n * defaults::SPECTRAL_EXTENSION_FACTOR).next_power_of_two();
        let offset = (n_ext - n) / 2;
        let dx = scenario.dx();
        let x_min = scenario.x_min() - offset as f64 * dx;
        let x_max = x_min + n_ext as f64 * dx;
        let extended = Grid::new(x_min, x_max, n_ext)?;

        let length = extended.x_max() - extended.x_min();
        let mut multiplier = Vec::with_capacity(n_ext);
        for m in 0..n_ext {
            let freq = if m <= n_ext / 2 { m as f64 } else { m as f64 - n_ext as f64 };
            let k = 2.0 * std::f64::consts::PI * freq / length;
            multiplier.push(k.abs().powf(alpha_s));
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_ext);
        let inverse = planner.plan_fft_inverse(n_ext);
        Ok(Self {
            scenario: scenario.clone(),
            extended,
            offset,
            alpha_s,
            multiplier,
            forward,
            inverse,
        })
    }

    /// The scenario grid the workspace was built for.
    #[must_use]
    pub fn scenario_grid(&self) -> &Grid {
        &self.scenario
    }

    /// The periodically extended working grid.
    #[must_use]
    pub fn extended_grid(&self) -> &Grid {
        &self.extended
    }

    /// Index of the scenario's first cell inside the extended grid.
    #[must_use]
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Stability index.
    #[must_use]
    pub fn alpha_s(&self) -> f64 {
        self.alpha_s
    }

    /// The fractional multiplier `|k_m|^{alpha_s}` per FFT bin.
    #[must_use]
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// Lift a density onto the extended grid: scenario input is zero-padded
    /// into place, extended input passes through unchanged.
    pub fn embed(&self, u: &Density) -> Result<Vec<f64>, StableError> {
        let g = u.grid();
        if grids_equal(g, &self.extended) {
            return Ok(u.values().to_vec());
        }
        if grids_equal(g, &self.scenario) {
            let mut values = vec![0.0; self.extended.n()];
            values[self.offset..self.offset + g.n()].copy_from_slice(u.values());
            return Ok(values);
        }
        Err(StableError::GridMismatch {
            reason: format!(
                "density on [{}, {}] with {} cells matches neither the scenario \
                 [{}, {}] x {} nor its extension [{}, {}] x {}",
                g.x_min(),
                g.x_max(),
                g.n(),
                self.scenario.x_min(),
                self.scenario.x_max(),
                self.scenario.n(),
                self.extended.x_min(),
                self.extended.x_max(),
                self.extended.n(),
            ),
        })
    }

    fn spectrum(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    fn inverse_real(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / spectrum.len() as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    fn boundary_check(&self, values: &[f64], step: usize) -> Result<(), StableError> {
        let dx = self.extended.dx();
        let budget = defaults::SPECTRAL_BOUNDARY_BUDGET;
        let left = values[0] * dx;
        if left.abs() > budget {
            return Err(StableError::BoundaryMassExceeded {
                side: "left",
                mass: left,
                budget,
                step,
            });
        }
        let right = values[values.len() - 1] * dx;
        if right.abs() > budget {
            return Err(StableError::BoundaryMassExceeded {
                side: "right",
                mass: right,
                budget,
                step,
            });
        }
        Ok(())
    }
}

fn grids_equal(a: &Grid, b: &Grid) -> bool {
    a.n() == b.n() && a.x_min() == b.x_min() && a.x_max() == b.x_max()
}

/// Apply the fractional generator `-(-Lap)^{alpha_s/2}[a(x) u]` on the
/// extended grid and return its cell values.
///
/// The input may live on the scenario grid (it is zero-padded into place)
/// or directly on the extended grid. Both outermost extended cells must be
/// below the boundary budget before the operator is applied, and the output
/// must integrate to zero within
/// [`defaults::FRACTIONAL_MASS_NEUTRALITY`] — the multiplier vanishes at
/// `k = 0`, so any residual integral is accumulated roundoff.
pub fn fractional_apply(
    workspace: &SpectralWorkspace,
    a: impl Fn(f64) -> f64,
    u: &Density,
) -> Result<Vec<f64>, StableError> {
    let state = workspace.embed(u)?;
    workspace.boundary_check(&state, 0)?;

    let grid = workspace.extended_grid();
    let product: Vec<f64> = state.iter().enumerate().map(|(j, &v)| a(grid.center(j)) * v).collect();
    let mut spectrum = workspace.spectrum(&product);
    for (m, c) in spectrum.iter_mut().enumerate() {
        *c *= -workspace.multiplier[m];
    }
    let out = workspace.inverse_real(spectrum);

    let mass: f64 = out.iter().sum::<f64>() * grid.dx();
    if mass.abs() > defaults::FRACTIONAL_MASS_NEUTRALITY {
        return Err(StableError::MassNotNeutral {
            mass,
            tol: defaults::FRACTIONAL_MASS_NEUTRALITY,
        });
    }
    Ok(out)
}

/// Strang-splitting path solver for the fractional law equation.
///
/// Construction fixes the model and the scenario grid; each solve marches
/// one frozen-curve window on the extended grid and records a strided
/// [`DensityPath`] whose nodes live on the *extended* grid (quantiles and
/// comparisons then see the heavy tails, not just the scenario box).
#[derive(Debug)]
pub struct StableSolver {
    model: StableModel,
    workspace: SpectralWorkspace,
    /// Node budget per solved window; endpoints are always kept. The
    /// default is deliberately below [`defaults::PATH_NODE_BUDGET`] because
    /// extended grids are several times larger than scenario grids.
    pub max_stored_nodes: usize,
}

/// Default node budget per window; extended-grid nodes are wide, so this is
/// smaller than the diffusive solver's budget.
pub const STABLE_NODE_BUDGET: usize = 100;

impl StableSolver {
    /// Build a solver for `model` on `scenario`.
    pub fn new(model: StableModel, scenario: &Grid) -> Result<Self, StableError> {
        let workspace = SpectralWorkspace::new(scenario, model.alpha_s)?;
        Ok(Self { model, workspace, max_stored_nodes: STABLE_NODE_BUDGET })
    }

    /// The model being integrated.
    #[must_use]
    pub fn model(&self) -> &StableModel {
        &self.model
    }

    /// The spectral workspace (extended grid, multiplier, plans).
    #[must_use]
    pub fn workspace(&self) -> &SpectralWorkspace {
        &self.workspace
    }

    /// March `initial` over `window` under the frozen feedback `curve`.
    pub fn solve(
        &self,
        initial: &Density,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, StableError> {
        let state = self.workspace.embed(initial)?;
        self.march(state, curve, window, None)
    }

    /// March from a mollified Dirac at `origin` with the default mollifier
    /// width [`defaults::MOLLIFIER_WIDTH_CELLS`].
    pub fn solve_from_dirac(
        &self,
        origin: f64,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, StableError> {
        self.solve_from_dirac_with_curve(origin, defaults::MOLLIFIER_WIDTH_CELLS, curve, window)
    }

    /// March from a mollified Dirac at `origin` with an explicit mollifier
    /// width (in scenario cells) under the frozen feedback `curve`.
    ///
    /// The origin must clear the scenario boundary by the stable
    /// localization margin
    /// `DIRAC_MARGIN_FACTOR * (a_hi * span)^{1/alpha_s}`.
    pub fn solve_from_dirac_with_curve(
        &self,
        origin: f64,
        width_cells: f64,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, StableError> {
        if !(width_cells.is_finite() && width_cells > 0.0) {
            return Err(StableError::InvalidParameter {
                reason: format!("mollifier width {width_cells} cells must be positive"),
            });
        }
        let scenario = self.workspace.scenario_grid();
        let margin = self.stable_margin(window.span());
        if origin - scenario.x_min() < margin || scenario.x_max() - origin < margin {
            return Err(StableError::DiracTooClose {
                origin,
                margin,
                x_min: scenario.x_min(),
                x_max: scenario.x_max(),
            });
        }
        let std = width_cells * scenario.dx();
        let initial = Density::mollified_dirac(scenario.clone(), origin, width_cells)?;
        let state = self.workspace.embed(&initial)?;
        self.march(state, curve, window, Some((origin, std)))
    }

    /// Localization margin `DIRAC_MARGIN_FACTOR * (a_hi * horizon)^{1/alpha_s}`;
    /// for `alpha_s = 2`, `a = sigma^2 / 2` this reduces to the diffusive
    /// `DIRAC_MARGIN_FACTOR * sqrt(m * horizon)`.
    #[must_use]
    pub fn stable_margin(&self, horizon: f64) -> f64 {
        let a_hi = self.model.a_bounds.1;
        defaults::DIRAC_MARGIN_FACTOR * (a_hi * horizon).powf(1.0 / self.model.alpha_s)
    }

    /// Largest drift magnitude over the extended grid and the window,
    /// probed at 33 times along the frozen curve.
    fn measured_drift_bound(&self, curve: &QuantileCurve, window: TimeWindow) -> f64 {
        let grid = self.workspace.extended_grid();
        let mut max_b = 0.0f64;
        for p in 0..=32 {
            let t = window.t_start + window.span() * f64::from(p) / 32.0;
            let omega = curve.eval(t);
            for j in 0..grid.n() {
                max_b = max_b.max(self.model.drift(t, grid.center(j), omega).abs());
            }
        }
        max_b
    }

    fn march(
        &self,
        mut state: Vec<f64>,
        curve: &QuantileCurve,
        window: TimeWindow,
        dirac: Option<(f64, f64)>,
    ) -> Result<DensityPath, StableError> {
        let ws = &self.workspace;
        let grid = ws.extended_grid().clone();
        let n = grid.n();
        let dx = grid.dx();
        let (steps, dt) = window.resolve();

        // Drift CFL on the half-step; a measured bound of zero lets the
        // march skip the advection stage entirely.
        let max_b = self.measured_drift_bound(curve, window);
        if max_b > 0.0 {
            let dt_max = 2.0 * 0.9 * dx / max_b;
            if dt > dt_max {
                return Err(StableError::CflViolation { dt, dt_max, max_drift: max_b });
            }
        }

        // Fractional-step tables. Constant coefficient: exact exponential.
        // Variable coefficient: integrating factor at the bound midpoint
        // plus a semi-implicit remainder (see the module docs).
        let (a_lo, a_hi) = self.model.a_bounds;
        let constant_a = a_lo == a_hi;
        let a_mid = 0.5 * (a_lo + a_hi);
        let decay: Vec<f64> = ws.multiplier.iter().map(|&m| (-dt * a_mid * m).exp()).collect();
        let delta_a: Vec<f64> = if constant_a {
            Vec::new()
        } else {
            (0..n).map(|j| self.model.a(grid.center(j)) - a_mid).collect()
        };

        ws.boundary_check(&state, 0)?;
        let mass0: f64 = state.iter().sum::<f64>() * dx;

        // Strided storage mirroring the diffusive solver: both endpoints
        // are always kept.
        let budget = self.max_stored_nodes.max(2);
        let stride = steps.div_ceil(budget - 1).max(1);
        let mut times = Vec::new();
        let mut nodes = Vec::new();
        let mut clipped_mass = 0.0;
        let mut max_mass_drift = 0.0f64;

        let (values, clipped) = clip_nonnegative(&state, dx);
        clipped_mass += clipped;
        nodes.push(Density::new(grid.clone(), values)?);
        times.push(window.t_start);

        let mut stage = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut flux = vec![0.0; n + 1];

        for k in 0..steps {
            let t = window.t_start + k as f64 * dt;

            if max_b > 0.0 {
                self.drift_half(&mut state, t, 0.5 * dt, curve, &mut stage, &mut rhs, &mut flux);
            }

            // Fractional step over the full dt.
            let mut spectrum = ws.spectrum(&state);
            if constant_a {
                for (m, c) in spectrum.iter_mut().enumerate() {
                    *c *= decay[m];
                }
            } else {
                let product: Vec<f64> = state.iter().zip(&delta_a).map(|(&v, &d)| d * v).collect();
                let correction = ws.spectrum(&product);
                for (m, c) in spectrum.iter_mut().enumerate() {
                    *c = decay[m] * (*c - dt * ws.multiplier[m] * correction[m]);
                }
            }
            state = ws.inverse_real(spectrum);

            if max_b > 0.0 {
                self.drift_half(
                    &mut state,
                    t + 0.5 * dt,
                    0.5 * dt,
                    curve,
                    &mut stage,
                    &mut rhs,
                    &mut flux,
                );
            }

            let step = k + 1;
            let min = state.iter().copied().fold(f64::INFINITY, f64::min);
            if min < defaults::SPECTRAL_CLIP_FLOOR {
                return Err(StableError::ExcessiveRinging {
                    min,
                    floor: defaults::SPECTRAL_CLIP_FLOOR,
                    step,
                });
            }
            ws.boundary_check(&state, step)?;
            let drift = (state.iter().sum::<f64>() * dx - mass0).abs();
            max_mass_drift = max_mass_drift.max(drift);
            if drift > defaults::MASS_TOL {
                return Err(StableError::MassDrift { drift, tol: defaults::MASS_TOL, step });
            }

            if step % stride == 0 || step == steps {
                let t_node = window.t_start + step as f64 * dt;
                if times.last().copied() != Some(t_node) {
                    let (values, clipped) = clip_nonnegative(&state, dx);
                    clipped_mass += clipped;
                    nodes.push(Density::new(grid.clone(), values)?);
                    times.push(t_node);
                }
            }
        }

        let meta = PathMeta {
            scheme: "strang-spectral".to_string(),
            dt,
            steps,
            stored_nodes: nodes.len(),
            max_mass_drift,
            clipped_mass,
            // The hard per-step budget subsumes the soft alarm used by the
            // diffusive solver: a run that would trip it errors out instead.
            boundary_alarm: false,
            dirac_origin: dirac.map(|(origin, _)| origin),
            mollifier_std: dirac.map(|(_, std)| std),
        };
        Ok(DensityPath::from_parts(grid, times, nodes, meta))
    }

    /// One MUSCL/Heun advection half-step of size `h` at time `t`.
    #[allow(clippy::too_many_arguments)]
    fn drift_half(
        &self,
        state: &mut [f64],
        t: f64,
        h: f64,
        curve: &QuantileCurve,
        stage: &mut [f64],
        rhs: &mut [f64],
        flux: &mut [f64],
    ) {
        self.drift_rhs(state, t, curve.eval(t), rhs, flux);
        for j in 0..state.len() {
            stage[j] = state[j] + h * rhs[j];
        }
        self.drift_rhs(stage, t + h, curve.eval(t + h), rhs, flux);
        for j in 0..state.len() {
            state[j] = 0.5 * state[j] + 0.5 * (stage[j] + h * rhs[j]);
        }
    }

    /// Conservative upwind divergence `-(d/dx)(b u)` with MUSCL
    /// reconstruction (monotonized-central limiter) and zero-flux ends.
    fn drift_rhs(&self, u: &[f64], t: f64, omega: f64, rhs: &mut [f64], flux: &mut [f64]) {
        let grid = self.workspace.extended_grid();
        let n = u.len();
        let dx = grid.dx();
        flux[0] = 0.0;
        flux[n] = 0.0;
        for j in 1..n {
            let left = u[j - 1] + 0.5 * mc_slope(u, j - 1);
            let right = u[j] - 0.5 * mc_slope(u, j);
            let b = self.model.drift(t, grid.left_edge(j), omega);
            flux[j] = if b >= 0.0 { b * left } else { b * right };
        }
        for j in 0..n {
            rhs[j] = -(flux[j + 1] - flux[j]) / dx;
        }
    }
}

/// Copy `state` with negatives clipped to zero; returns the values and the
/// total mass discarded.
fn clip_nonnegative(state: &[f64], dx: f64) -> (Vec<f64>, f64) {
    let mut clipped = 0.0;
    let values = state
        .iter()
        .map(|&v| {
            if v < 0.0 {
                clipped += -v * dx;
                0.0
            } else {
                v
            }
        })
        .collect();
    (values, clipped)
}

/// Monotonized-central limited slope of `u` in cell `j` (per cell, not per
/// unit length); end cells use zero slope.
fn mc_slope(u: &[f64], j: usize) -> f64 {
    if j == 0 || j + 1 >= u.len() {
        return 0.0;
    }
    let central = 0.5 * (u[j + 1] - u[j - 1]);
    let lower = 2.0 * (u[j] - u[j - 1]);
    let upper = 2.0 * (u[j + 1] - u[j]);
    minmod3(central, lower, upper)
}

fn minmod3(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

fn to_nonlinear(err: StableError) -> NonlinearError {
    NonlinearError::Solver { message: err.to_string() }
}

impl PathSolver for StableSolver {
    fn solve_window(
        &self,
        initial: &Density,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, NonlinearError> {
        self.solve(initial, curve, window).map_err(to_nonlinear)
    }

    fn solve_dirac_window(
        &self,
        grid: &Grid,
        origin: f64,
        width_cells: f64,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, NonlinearError> {
        if !grids_equal(grid, self.workspace.scenario_grid()) {
            return Err(NonlinearError::InvalidParameter {
                reason: "dirac grid does not match the solver's scenario grid".to_string(),
            });
        }
        self.solve_from_dirac_with_curve(origin, width_cells, curve, window).map_err(to_nonlinear)
    }

    fn dirac_margin(&self, horizon: f64) -> f64 {
        self.stable_margin(horizon)
    }

    fn localization_exponent(&self) -> f64 {
        1.0 / self.model.alpha_s
    }
}

/// Solve the coupled problem with the spectral solver; thin wrapper over
/// [`nonlinear::solve_nonlinear`] for API symmetry.
pub fn solve_stable_nonlinear(
    solver: &StableSolver,
    u0: &Density,
    alpha: f64,
    window: TimeWindow,
    options: &PicardOptions,
) -> Result<NonlinearSolution, NonlinearError> {
    nonlinear::solve_nonlinear(solver, u0, alpha, window, options)
}

/// Solve the coupled problem from a mollified Dirac start; thin wrapper
/// over [`nonlinear::solve_nonlinear_dirac`].
pub fn solve_stable_nonlinear_dirac(
    solver: &StableSolver,
    origin: f64,
    width_cells: f64,
    alpha: f64,
    window: TimeWindow,
    options: &PicardOptions,
) -> Result<NonlinearSolution, NonlinearError> {
    let grid = solver.workspace().scenario_grid().clone();
    nonlinear::solve_nonlinear_dirac(solver, &grid, origin, width_cells, alpha, window, options)
}
