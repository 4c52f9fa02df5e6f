//! Fixed-point solution of the quantile-coupled nonlinear problem.
//!
//! The nonlinear law couples to itself only through the scalar curve
//! `omega(t) = Q_alpha(u_t)`, so the solution is the fixed point of the map
//! `omega -> Q_alpha(u[omega])`, where `u[omega]` solves the *linear* problem
//! with the curve frozen. On a window of length `T` that map contracts like
//! `kappa sqrt(T)` (for the median-attracting catalog models the one-step
//! ratio is exactly `1 - e^{-rate T}`), so Picard iteration converges once
//! windows are short enough: when an iteration stalls, the whole horizon is
//! re-run with [`defaults::PICARD_SPLIT_FACTOR`] times more windows, up to
//! [`defaults::PICARD_MAX_SPLITS`] times.
//!
//! The linear backend is abstracted behind [`PathSolver`] so the same
//! iteration drives both the diffusive solver
//! ([`LinearSolver`](crate::linfp::LinearSolver)) and the spectral
//! fractional solver; the trait also exposes the two scalars the
//! Dirac-start machinery needs (the boundary margin and the localization
//! exponent of the driving noise).

use serde::Serialize;
use thiserror::Error;

use crate::defaults;
use crate::density::{Density, DensityError};
use crate::grid::Grid;
use crate::linfp::{DensityPath, LinearSolver, LinfpError, QuantileCurve, TimeWindow};

/// Errors from the fixed-point iteration.
#[derive(Debug, Error)]
pub enum NonlinearError {
    /// Malformed level, options, or window.
    #[error("invalid parameter: {reason}")]
    InvalidParameter {
        /// What is wrong.
        reason: String,
    },
    /// The iteration stalled even at the shortest window length.
    #[error(
        "fixed point not reached: {windows} windows of span {window_span:.6} left a gap of \
         {last_gap:e} (tol {tol:e}) after {iterations} iterations and {splits} splits"
    )]
    NoConvergence {
        /// Window count of the last attempt.
        windows: usize,
        /// Window span of the last attempt.
        window_span: f64,
        /// Iterations spent on the stalling window.
        iterations: usize,
        /// Final curve update size.
        last_gap: f64,
        /// Requested tolerance.
        tol: f64,
        /// Splits performed before giving up.
        splits: usize,
    },
    /// A backend refused a window solve for a reason of its own.
    #[error("window solve failed: {message}")]
    Solver {
        /// Backend message.
        message: String,
    },
    /// Errors bubbled up from the diffusive backend.
    #[error(transparent)]
    Linfp(#[from] LinfpError),
    /// Errors bubbled up from density handling.
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// A linear solver the Picard iteration can drive.
///
/// Implementations replay the same window for different frozen curves; the
/// iteration owns the curve updates and the window schedule.
pub trait PathSolver {
    /// Advance `initial` over `window` with the frozen curve.
    fn solve_window(
        &self,
        initial: &Density,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, NonlinearError>;

    /// Advance a mollified Dirac at `origin` (width in cells) over `window`
    /// with the frozen curve.
    fn solve_dirac_window(
        &self,
        grid: &Grid,
        origin: f64,
        width_cells: f64,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, NonlinearError>;

    /// Margin a Dirac origin must keep from both grid ends over `horizon`.
    fn dirac_margin(&self, horizon: f64) -> f64;

    /// Exponent `e` of the localization scale `t^e` of the driving noise
    /// (`1/2` for diffusions, `1/alpha_s` for stable generators).
    fn localization_exponent(&self) -> f64;
}

impl PathSolver for LinearSolver {
    fn solve_window(
        &self,
        initial: &Density,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, NonlinearError> {
        Ok(self.solve(initial, curve, window)?)
    }

    fn solve_dirac_window(
        &self,
        grid: &Grid,
        origin: f64,
        width_cells: f64,
        curve: &QuantileCurve,
        window: TimeWindow,
    ) -> Result<DensityPath, NonlinearError> {
        Ok(self.solve_from_dirac_with_curve(grid, origin, width_cells, curve, window)?)
    }

    fn dirac_margin(&self, horizon: f64) -> f64 {
        defaults::DIRAC_MARGIN_FACTOR * (self.field().m * horizon).sqrt()
    }

    fn localization_exponent(&self) -> f64 {
        0.5
    }
}

/// Knobs of the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardOptions {
    /// Convergence tolerance on the sup distance between curve iterates.
    pub tol: f64,
    /// Iteration budget per window before the horizon is split.
    pub max_iter: usize,
    /// Window multiplication factor on each split.
    pub split_factor: usize,
    /// How many times the horizon may be split.
    pub max_splits: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: defaults::PICARD_TOL,
            max_iter: defaults::PICARD_MAX_ITER,
            split_factor: defaults::PICARD_SPLIT_FACTOR,
            max_splits: defaults::PICARD_MAX_SPLITS,
        }
    }
}

impl PicardOptions {
    fn validate(&self) -> Result<(), NonlinearError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(NonlinearError::InvalidParameter {
                reason: format!("tolerance must be positive, got {}", self.tol),
            });
        }
        if self.max_iter < 1 {
            return Err(NonlinearError::InvalidParameter {
                reason: "iteration budget must be at least 1".into(),
            });
        }
        if self.split_factor < 2 {
            return Err(NonlinearError::InvalidParameter {
                reason: format!("split factor must be at least 2, got {}", self.split_factor),
            });
        }
        Ok(())
    }
}

/// Convergence record of one full solve.
#[derive(Debug, Clone, Serialize)]
pub struct PicardTrace {
    /// Number of windows of the successful attempt.
    pub windows: usize,
    /// Splits performed before the successful attempt.
    pub splits: usize,
    /// Iterations spent per window.
    pub iterations: Vec<usize>,
    /// Sup curve-update per iteration, per window.
    pub gaps: Vec<Vec<f64>>,
    /// Defect of one extra frozen-curve pass under the converged curve:
    /// `sup_t |Q_alpha(v_t) - omega(t)|`.
    pub residual: f64,
}

/// A converged nonlinear solution: the path, its quantile curve, and the
/// convergence record.
#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    /// Stitched density path over the whole horizon.
    pub path: DensityPath,
    /// Fixed-point curve `omega(t) = Q_alpha(u_t)` at the stored nodes.
    pub curve: QuantileCurve,
    /// Convergence record.
    pub trace: PicardTrace,
}

/// How a Picard run starts.
#[derive(Clone, Copy)]
enum Start<'a> {
    /// From an explicit initial law.
    Law(&'a Density),
    /// From a mollified Dirac (only meaningful for the first window).
    Dirac { grid: &'a Grid, origin: f64, width_cells: f64 },
}

impl Start<'_> {
    fn initial_quantile(&self, alpha: f64) -> Result<f64, NonlinearError> {
        match self {
            Start::Law(u0) => Ok(u0.quantile(alpha)?),
            Start::Dirac { origin, .. } => Ok(*origin),
        }
    }
}

/// Solve the nonlinear problem from an initial law with the default
/// first guess `omega(t) = Q_alpha(u_0)`.
pub fn solve_nonlinear<S: PathSolver + ?Sized>(
    solver: &S,
    u0: &Density,
    alpha: f64,
    window: TimeWindow,
    options: &PicardOptions,
) -> Result<NonlinearSolution, NonlinearError> {
    run_picard(solver, Start::Law(u0), alpha, window, None, options)
}

/// Solve the nonlinear problem starting the iteration from an arbitrary
/// curve instead of the constant guess: with a contracting map the result
/// must agree with [`solve_nonlinear`] within twice the tolerance, which is
/// the practical uniqueness check.
pub fn solve_nonlinear_from_curve<S: PathSolver + ?Sized>(
    solver: &S,
    u0: &Density,
    alpha: f64,
    window: TimeWindow,
    initial_curve: &QuantileCurve,
    options: &PicardOptions,
) -> Result<NonlinearSolution, NonlinearError> {
    run_picard(solver, Start::Law(u0), alpha, window, Some(initial_curve), options)
}

/// Solve the nonlinear problem from a mollified Dirac at `origin`.
///
/// The mollifier width is in cells; the origin must respect
/// [`PathSolver::dirac_margin`] (enforced by the backend).
pub fn solve_nonlinear_dirac<S: PathSolver + ?Sized>(
    solver: &S,
    grid: &Grid,
    origin: f64,
    width_cells: f64,
    alpha: f64,
    window: TimeWindow,
    options: &PicardOptions,
) -> Result<NonlinearSolution, NonlinearError> {
    if !(width_cells.is_finite() && width_cells > 0.0) {
        return Err(NonlinearError::InvalidParameter {
            reason: format!("mollifier width must be positive, got {width_cells} cells"),
        });
    }
    run_picard(solver, Start::Dirac { grid, origin, width_cells }, alpha, window, None, options)
}

fn validate_alpha(alpha: f64) -> Result<(), NonlinearError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(NonlinearError::InvalidParameter {
            reason: format!("quantile level must lie in (0, 1), got {alpha}"),
        });
    }
    Ok(())
}

/// The window schedule of one attempt: equal subdivisions with exact
/// endpoints.
fn schedule(window: TimeWindow, count: usize) -> Vec<TimeWindow> {
    let span = window.span();
    (0..count)
        .map(|w| {
            let t0 = window.t_start + span * w as f64 / count as f64;
            let t1 = if w + 1 == count {
                window.t_end
            } else {
                window.t_start + span * (w + 1) as f64 / count as f64
            };
            TimeWindow { t_start: t0, t_end: t1, dt: window.dt }
        })
        .collect()
}

fn run_picard<S: PathSolver + ?Sized>(
    solver: &S,
    start: Start<'_>,
    alpha: f64,
    window: TimeWindow,
    initial_curve: Option<&QuantileCurve>,
    options: &PicardOptions,
) -> Result<NonlinearSolution, NonlinearError> {
    validate_alpha(alpha)?;
    options.validate()?;
    let mut windows = 1usize;
    let mut last_failure = (0usize, 0.0f64); // (iterations, gap) of the stalled window
    for split in 0..=options.max_splits {
        match attempt(solver, start, alpha, &schedule(window, windows), initial_curve, options)? {
            AttemptOutcome::Converged { path, curve, iterations, gaps } => {
                let residual =
                    residual_pass(solver, start, alpha, &curve, &schedule(window, windows))?;
                return Ok(NonlinearSolution {
                    path,
                    curve,
                    trace: PicardTrace { windows, splits: split, iterations, gaps, residual },
                });
            }
            AttemptOutcome::Stalled { iterations, gap } => {
                last_failure = (iterations, gap);
                windows = windows.saturating_mul(options.split_factor);
            }
        }
    }
    Err(NonlinearError::NoConvergence {
        windows: windows / options.split_factor,
        window_span: window.span() * options.split_factor as f64 / windows as f64,
        iterations: last_failure.0,
        last_gap: last_failure.1,
        tol: options.tol,
        splits: options.max_splits,
    })
}

enum AttemptOutcome {
    Converged {
        path: DensityPath,
        curve: QuantileCurve,
        iterations: Vec<usize>,
        gaps: Vec<Vec<f64>>,
    },
    Stalled {
        iterations: usize,
        gap: f64,
    },
}

/// One full-horizon attempt at a fixed window schedule. Windows are solved
/// in order; each window iterates the frozen-curve solve until the measured
/// quantile curve stops moving, then hands its final law to the next window.
fn attempt<S: PathSolver + ?Sized>(
    solver: &S,
    start: Start<'_>,
    alpha: f64,
    windows: &[TimeWindow],
    initial_curve: Option<&QuantileCurve>,
    options: &PicardOptions,
) -> Result<AttemptOutcome, NonlinearError> {
    let mut stitched: Option<DensityPath> = None;
    let mut carried_law: Option<Density> = None;
    let mut iterations = Vec::with_capacity(windows.len());
    let mut gaps = Vec::with_capacity(windows.len());
    for (w, &win) in windows.iter().enumerate() {
        let mut curve = match (w, initial_curve) {
            (0, Some(c)) => c.clone(),
            (0, None) => QuantileCurve::constant(start.initial_quantile(alpha)?)?,
            _ => QuantileCurve::constant(
                carried_law
                    .as_ref()
                    .expect("windows after the first carry a law")
                    .quantile(alpha)?,
            )?,
        };
        let mut window_gaps = Vec::new();
        let mut converged_path: Option<DensityPath> = None;
        for _ in 0..options.max_iter {
            let path = match (w, carried_law.as_ref(), start) {
                (0, None, Start::Law(u0)) => solver.solve_window(u0, &curve, win)?,
                (0, None, Start::Dirac { grid, origin, width_cells }) => {
                    solver.solve_dirac_window(grid, origin, width_cells, &curve, win)?
                }
                (_, Some(law), _) => solver.solve_window(law, &curve, win)?,
                _ => unreachable!("only the first window starts without a carried law"),
            };
            let next = path.quantile_curve(alpha)?;
            let gap = next.sup_distance(&curve);
            window_gaps.push(gap);
            curve = next;
            if gap <= options.tol {
                converged_path = Some(path);
                break;
            }
        }
        let Some(path) = converged_path else {
            return Ok(AttemptOutcome::Stalled {
                iterations: window_gaps.len(),
                gap: window_gaps.last().copied().unwrap_or(f64::NAN),
            });
        };
        iterations.push(window_gaps.len());
        gaps.push(window_gaps);
        carried_law = Some(path.node(path.len() - 1).clone());
        stitched = match stitched {
            None => Some(path),
            Some(mut acc) => {
                acc.append(&path)?;
                Some(acc)
            }
        };
    }
    let path = stitched.expect("schedules are nonempty");
    let curve = path.quantile_curve(alpha)?;
    Ok(AttemptOutcome::Converged { path, curve, iterations, gaps })
}

/// One extra frozen-curve pass under the converged curve; the sup gap
/// between the measured quantiles and the curve is the reported residual.
fn residual_pass<S: PathSolver + ?Sized>(
    solver: &S,
    start: Start<'_>,
    alpha: f64,
    curve: &QuantileCurve,
    windows: &[TimeWindow],
) -> Result<f64, NonlinearError> {
    let mut carried_law: Option<Density> = None;
    let mut residual = 0.0f64;
    for (w, &win) in windows.iter().enumerate() {
        let path = match (w, carried_law.as_ref(), start) {
            (0, None, Start::Law(u0)) => solver.solve_window(u0, curve, win)?,
            (0, None, Start::Dirac { grid, origin, width_cells }) => {
                solver.solve_dirac_window(grid, origin, width_cells, curve, win)?
            }
            (_, Some(law), _) => solver.solve_window(law, curve, win)?,
            _ => unreachable!("only the first window starts without a carried law"),
        };
        for (i, &t) in path.times().iter().enumerate() {
            let q = path.node(i).quantile(alpha)?;
            residual = residual.max((q - curve.eval(t)).abs());
        }
        carried_law = Some(path.node(path.len() - 1).clone());
    }
    Ok(residual)
}

/// One-step contraction probe of the map `omega -> Q_alpha(u[omega])`.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    /// Probe horizon.
    pub horizon: f64,
    /// Input curve perturbation.
    pub perturbation: f64,
    /// Output sup gap between the two measured quantile curves.
    pub gap_out: f64,
    /// Contraction ratio `gap_out / perturbation`.
    pub ratio: f64,
    /// Whether the probe observed a strict contraction.
    pub contracting: bool,
}

/// Probe the one-step contraction ratio: solve the frozen-curve problem
/// under `omega` and `omega + perturbation` (both constants) and compare the
/// resulting quantile curves in sup norm. For the median-attracting
/// catalog model the exact ratio over `[0, T]` is `1 - e^{-rate T}`.
pub fn contraction_diagnostic<S: PathSolver + ?Sized>(
    solver: &S,
    u0: &Density,
    alpha: f64,
    window: TimeWindow,
    perturbation: f64,
) -> Result<ContractionReport, NonlinearError> {
    validate_alpha(alpha)?;
    if !(perturbation.is_finite() && perturbation > 0.0) {
        return Err(NonlinearError::InvalidParameter {
            reason: format!("perturbation must be positive, got {perturbation}"),
        });
    }
    let base = u0.quantile(alpha)?;
    let curve1 = QuantileCurve::constant(base)?;
    let curve2 = QuantileCurve::constant(base + perturbation)?;
    let path1 = solver.solve_window(u0, &curve1, window)?;
    let path2 = solver.solve_window(u0, &curve2, window)?;
    let q1 = path1.quantile_curve(alpha)?;
    let q2 = path2.quantile_curve(alpha)?;
    let gap_out = q1.sup_distance(&q2);
    let ratio = gap_out / perturbation;
    Ok(ContractionReport {
        horizon: window.span(),
        perturbation,
        gap_out,
        ratio,
        contracting: ratio < 1.0,
    })
}

/// Robustness of the Dirac-start solution under the mollifier width.
#[derive(Debug, Clone, Serialize)]
pub struct DiracFamilyReport {
    /// Widths tried, in cells.
    pub widths_cells: Vec<f64>,
    /// Earliest time entering the comparison (mollifier forgetting time).
    pub compared_from: f64,
    /// Sup over compared times of the largest pairwise curve gap.
    pub sup_pairwise_gap: f64,
}

/// Solve the Dirac-start nonlinear problem once per mollifier width and
/// compare the fixed-point curves pairwise past the forgetting time
/// `max(T_FLOOR, MOLLIFIER_HORIZON_CELLS * width^2)` of the widest
/// mollifier: physically meaningful answers must not depend on the
/// regularization.
pub fn dirac_width_family<S: PathSolver + ?Sized>(
    solver: &S,
    grid: &Grid,
    origin: f64,
    alpha: f64,
    window: TimeWindow,
    widths_cells: &[f64],
    options: &PicardOptions,
) -> Result<(DiracFamilyReport, Vec<NonlinearSolution>), NonlinearError> {
    if widths_cells.len() < 2 {
        return Err(NonlinearError::InvalidParameter {
            reason: "width family needs at least two widths".into(),
        });
    }
    let mut solutions = Vec::with_capacity(widths_cells.len());
    let mut compared_from: f64 = defaults::T_FLOOR.max(window.t_start);
    for &w in widths_cells {
        let sol = solve_nonlinear_dirac(solver, grid, origin, w, alpha, window, options)?;
        let std = sol.path.meta.mollifier_std.unwrap_or(w * grid.dx());
        compared_from = compared_from.max(defaults::MOLLIFIER_HORIZON_CELLS * std * std);
        solutions.push(sol);
    }
    let mut sup_gap = 0.0f64;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            let (a, b) = (&solutions[i].curve, &solutions[j].curve);
            for &t in a.times().iter().chain(b.times().iter()) {
                if t >= compared_from {
                    sup_gap = sup_gap.max((a.eval(t) - b.eval(t)).abs());
                }
            }
        }
    }
    Ok((
        DiracFamilyReport {
            widths_cells: widths_cells.to_vec(),
            compared_from,
            sup_pairwise_gap: sup_gap,
        },
        solutions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::ModelSpec;
    use approx::assert_abs_diff_eq;

    /// Asymmetric two-bump law: its median moves under pure diffusion, so
    /// decoupled fixed points are still nontrivial.
    fn mixture(grid: Grid, shift: f64) -> Density {
        Density::from_fn_normalized(grid, |x| {
            let z1 = (x - shift + 1.0) / 0.3;
            let z2 = (x - shift - 1.0) / 0.3;
            0.7 * (-0.5 * z1 * z1).exp() + 0.3 * (-0.5 * z2 * z2).exp()
        })
        .unwrap()
    }

    fn attracting_solver(rate: f64) -> LinearSolver {
        let field = ModelSpec::MedianAttractingOu { rate, sigma: 1.0 }
            .build((-8.0, 8.0), (-2.0, 2.0))
            .unwrap();
        LinearSolver::new(field)
    }

    #[test]
    fn decoupled_model_converges_in_exactly_two_iterations() {
        // kappa = 0: the first solve already produces the fixed point, and
        // the second solve replays it bit for bit, so the measured gap is
        // exactly zero.
        let grid = Grid::new(-8.0, 8.0, 400).unwrap();
        let field = ModelSpec::Brownian { sigma: 1.0 }.build((-8.0, 8.0), (-2.0, 2.0)).unwrap();
        let solver = LinearSolver::new(field);
        let u0 = mixture(grid, 0.0);
        let window = TimeWindow::to(0.5, 1e-3).unwrap();
        let sol = solve_nonlinear(&solver, &u0, 0.5, window, &PicardOptions::default()).unwrap();
        assert_eq!(sol.trace.windows, 1);
        assert_eq!(sol.trace.splits, 0);
        assert_eq!(sol.trace.iterations, vec![2]);
        assert!(sol.trace.gaps[0][0] > 0.01, "median should move: {:?}", sol.trace.gaps);
        assert_eq!(sol.trace.gaps[0][1], 0.0);
        assert_eq!(sol.trace.residual, 0.0);
        let values = sol.curve.values();
        assert!((values[values.len() - 1] - values[0]).abs() > 0.01);
    }

    #[test]
    fn contraction_ratio_matches_the_exponential_oracle() {
        // For b = -rate (x - omega) with constant curves, the alpha-quantile
        // responds through the mean alone: the gap at time t is exactly
        // eps (1 - e^{-rate t}), so the sup over [0, T] is 1 - e^{-rate T}.
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 800).unwrap();
        let u0 = Density::gaussian(grid, 0.0, 1.0).unwrap();
        let probe = defaults::CONTRACTION_PROBE;
        let long =
            contraction_diagnostic(&solver, &u0, 0.5, TimeWindow::to(1.0, 5e-4).unwrap(), probe)
                .unwrap();
        assert_abs_diff_eq!(long.ratio, 1.0 - (-1.0f64).exp(), epsilon = 2e-3);
        assert!(long.contracting);
        let short =
            contraction_diagnostic(&solver, &u0, 0.5, TimeWindow::to(0.25, 5e-4).unwrap(), probe)
                .unwrap();
        assert_abs_diff_eq!(short.ratio, 1.0 - (-0.25f64).exp(), epsilon = 2e-3);
    }

    #[test]
    fn two_starting_curves_reach_the_same_fixed_point() {
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 800).unwrap();
        let u0 = Density::gaussian(grid, 0.5, 0.7).unwrap();
        let window = TimeWindow::to(0.5, 5e-4).unwrap();
        let options = PicardOptions::default();
        let from_default = solve_nonlinear(&solver, &u0, 0.5, window, &options).unwrap();
        let other_start = QuantileCurve::constant(-0.5).unwrap();
        let from_other =
            solve_nonlinear_from_curve(&solver, &u0, 0.5, window, &other_start, &options).unwrap();
        let gap = from_default.curve.sup_distance(&from_other.curve);
        assert!(gap <= 2.0 * options.tol, "fixed points differ by {gap:e}");
        assert!(from_default.trace.residual <= 2.0 * options.tol);
        assert!(from_other.trace.residual <= 2.0 * options.tol);
        assert_eq!(from_default.trace.windows, 1);
    }

    #[test]
    fn splitting_restarts_the_horizon_with_shorter_windows() {
        // Two iterations per window cannot close a 2-second window for a
        // moving median; once the windows are short enough the second
        // iterate lands within tolerance. The per-window gap shrinks like
        // (window span)^2, so the attempt succeeds after a handful of splits.
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 400).unwrap();
        let u0 = mixture(grid, 0.0);
        let window = TimeWindow::to(2.0, 1.5e-3).unwrap();
        let options = PicardOptions { tol: 8e-3, max_iter: 2, split_factor: 2, max_splits: 6 };
        let sol = solve_nonlinear(&solver, &u0, 0.5, window, &options).unwrap();
        assert!(
            (3..=6).contains(&sol.trace.splits),
            "expected a mid-range split count, got {}",
            sol.trace.splits
        );
        assert_eq!(sol.trace.windows, 1 << sol.trace.splits);
        assert!(sol.trace.iterations.iter().all(|&m| m <= 2));
        assert!(sol.trace.gaps.iter().all(|g| *g.last().unwrap() <= options.tol));
        // The stitched path covers the full horizon contiguously.
        assert_abs_diff_eq!(sol.path.times().last().unwrap(), &2.0, epsilon = 1e-12);
        assert_eq!(sol.path.times()[0], 0.0);
    }

    #[test]
    fn exhausted_splits_report_no_convergence() {
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 400).unwrap();
        let u0 = mixture(grid, 0.0);
        let window = TimeWindow::to(2.0, 1.5e-3).unwrap();
        let options = PicardOptions { tol: 1e-9, max_iter: 2, split_factor: 2, max_splits: 1 };
        match solve_nonlinear(&solver, &u0, 0.5, window, &options) {
            Err(NonlinearError::NoConvergence { splits, windows, .. }) => {
                assert_eq!(splits, 1);
                assert_eq!(windows, 2);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn fixed_point_is_shift_equivariant() {
        // b = -(x - omega) has no preferred origin: shifting the initial law
        // by 35 whole cells shifts the fixed-point curve by exactly the same
        // amount, up to roundoff.
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 800).unwrap();
        let shift = 0.7; // 35 cells of 0.02
        let u0 = mixture(grid.clone(), 0.0);
        let u0_shifted = mixture(grid, shift);
        let window = TimeWindow::to(0.5, 5e-4).unwrap();
        let options = PicardOptions::default();
        let base = solve_nonlinear(&solver, &u0, 0.5, window, &options).unwrap();
        let moved = solve_nonlinear(&solver, &u0_shifted, 0.5, window, &options).unwrap();
        let translated = QuantileCurve::new(
            base.curve.times().to_vec(),
            base.curve.values().iter().map(|v| v + shift).collect(),
        )
        .unwrap();
        let gap = translated.sup_distance(&moved.curve);
        assert!(gap <= 1e-9, "equivariance defect {gap:e}");
    }

    #[test]
    fn sigma_coupling_enters_through_the_quantile() {
        let grid = Grid::new(-8.0, 8.0, 400).unwrap();
        let window = TimeWindow::to(0.5, 1e-3).unwrap();
        let options = PicardOptions::default();
        let coupled = LinearSolver::new(
            ModelSpec::MedianCoupledSigma { rate: 1.0, coupling: 0.3 }
                .build((-8.0, 8.0), (-2.0, 2.0))
                .unwrap(),
        );
        // Symmetric start: omega = 0 is the fixed point and sigma(0) = 1, so
        // the curve stays at zero through every iterate.
        let symmetric = Density::gaussian(grid.clone(), 0.0, 0.6).unwrap();
        let sol = solve_nonlinear(&coupled, &symmetric, 0.5, window, &options).unwrap();
        let sup = sol.curve.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup <= 1e-9, "median left zero by {sup:e}");
        // Asymmetric start: the median sits below zero, sigma(omega) < 1
        // slows the spreading, and the fixed point departs from the
        // uncoupled one.
        let skew = mixture(grid, 0.0);
        let with_coupling = solve_nonlinear(&coupled, &skew, 0.5, window, &options).unwrap();
        let uncoupled = LinearSolver::new(
            ModelSpec::MedianCoupledSigma { rate: 1.0, coupling: 0.0 }
                .build((-8.0, 8.0), (-2.0, 2.0))
                .unwrap(),
        );
        let without = solve_nonlinear(&uncoupled, &skew, 0.5, window, &options).unwrap();
        let gap = with_coupling.curve.sup_distance(&without.curve);
        assert!(gap > 1e-3, "coupling had no effect: {gap:e}");
    }

    #[test]
    fn dirac_width_family_curves_agree() {
        // The width of the starting mollifier is a numerical artifact; past
        // the forgetting time the fixed-point curves of widths 1, 2, and 4
        // cells must agree closely (but not trivially: the level is off the
        // median, so the curves genuinely move).
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 800).unwrap();
        let window = TimeWindow::to(0.3, 4e-4).unwrap();
        let options = PicardOptions::default();
        let (report, solutions) =
            dirac_width_family(&solver, &grid, 0.0, 0.55, window, &[1.0, 2.0, 4.0], &options)
                .unwrap();
        assert_eq!(report.widths_cells, vec![1.0, 2.0, 4.0]);
        assert!(report.compared_from < 0.15, "floor {} eats the window", report.compared_from);
        assert!(report.sup_pairwise_gap <= 5e-3, "gap {}", report.sup_pairwise_gap);
        // Sanity: the curves are nontrivial and the solves were real.
        let last = solutions[0].curve.values().last().copied().unwrap();
        assert!(last > 1e-3, "curve never left the origin: {last}");
        for sol in &solutions {
            assert!(sol.trace.residual <= 10.0 * options.tol);
            assert!(sol.path.meta.mollifier_std.is_some());
        }
    }

    #[test]
    fn parameters_are_validated() {
        let solver = attracting_solver(1.0);
        let grid = Grid::new(-8.0, 8.0, 100).unwrap();
        let u0 = Density::gaussian(grid.clone(), 0.0, 1.0).unwrap();
        let window = TimeWindow::to(0.1, 1e-3).unwrap();
        let bad_alpha = solve_nonlinear(&solver, &u0, 1.0, window, &PicardOptions::default());
        assert!(matches!(bad_alpha, Err(NonlinearError::InvalidParameter { .. })));
        let bad_tol = PicardOptions { tol: -1.0, ..PicardOptions::default() };
        assert!(matches!(
            solve_nonlinear(&solver, &u0, 0.5, window, &bad_tol),
            Err(NonlinearError::InvalidParameter { .. })
        ));
        let bad_factor = PicardOptions { split_factor: 1, ..PicardOptions::default() };
        assert!(matches!(
            solve_nonlinear(&solver, &u0, 0.5, window, &bad_factor),
            Err(NonlinearError::InvalidParameter { .. })
        ));
        assert!(matches!(
            contraction_diagnostic(&solver, &u0, 0.5, window, 0.0),
            Err(NonlinearError::InvalidParameter { .. })
        ));
        assert!(matches!(
            dirac_width_family(&solver, &grid, 0.0, 0.5, window, &[2.0], &PicardOptions::default()),
            Err(NonlinearError::InvalidParameter { .. })
        ));
    }
}
