//! Centralized numeric defaults and tolerances.
//!
//! Every tolerance that a solver, check, or gate relies on is named here and
//! echoed into run manifests, so an artifact directory records the exact
//! constants it was produced under.

use serde::Serialize;

/// Mass tolerance for a validated density: `|mass - 1| <= MASS_TOL`.
pub const MASS_TOL: f64 = 1e-8;

/// Most negative value tolerated in a solver slice before it is an error.
pub const NEGATIVITY_FLOOR: f64 = -1e-14;

/// Per-step mass drift budget of the conservative solver.
pub const STEP_MASS_DRIFT: f64 = 1e-12;

/// Mass clipped to zero per step must stay below this.
pub const STEP_CLIP_BUDGET: f64 = 1e-12;

/// Boundary-cell tail mass that triggers the truncation alarm on a path.
pub const BOUNDARY_TAIL_ALARM: f64 = 1e-6;

/// Earliest time at which kernel-type checks are evaluated.
pub const T_FLOOR: f64 = 0.01;

/// Dirac initial data is mollified by a Gaussian of this many cells of
/// standard deviation.
pub const MOLLIFIER_WIDTH_CELLS: f64 = 2.0;

/// Kernel checks on a mollified Dirac start begin at
/// `max(T_FLOOR, MOLLIFIER_HORIZON_CELLS * dx^2)`.
pub const MOLLIFIER_HORIZON_CELLS: f64 = 16.0;

/// A Dirac center must sit at least `DIRAC_MARGIN_FACTOR * sqrt(m T)` away
/// from both grid ends.
pub const DIRAC_MARGIN_FACTOR: f64 = 4.0;

/// Relative slack granted to the quantile sensitivity bound.
pub const SENSITIVITY_SLACK: f64 = 1e-9;

/// Half-width factor `c` of the moving box `|x - xi| <= c sqrt(t)` on which
/// pointwise kernel bounds are checked.
pub const LOCAL_BOX_FACTOR: f64 = 3.0;

/// Relative headroom applied to fitted envelope constants so a certified
/// envelope re-verifies at finer resolution.
pub const ENVELOPE_HEADROOM: f64 = 1e-3;

/// Number of log-spaced sigma candidates tried by the envelope fitter.
pub const ENVELOPE_SIGMA_CANDIDATES: usize = 20;

/// Picard stopping tolerance on the sup-difference of quantile curves.
pub const PICARD_TOL: f64 = 1e-6;

/// Picard iteration budget per window.
pub const PICARD_MAX_ITER: usize = 50;

/// Horizon split factor used when the measured contraction ratio is >= 1.
pub const PICARD_SPLIT_FACTOR: usize = 2;

/// Maximum number of successive horizon splits before giving up.
pub const PICARD_MAX_SPLITS: usize = 5;

/// Step size of the finite-difference contraction diagnostic.
pub const CONTRACTION_PROBE: f64 = 0.01;

/// Periodic extension factor of the spectral stable solver.
pub const SPECTRAL_EXTENSION_FACTOR: usize = 4;

/// Tail mass allowed near the periodic boundary of the spectral grid.
pub const SPECTRAL_BOUNDARY_BUDGET: f64 = 1e-8;

/// Mass defect allowed per application of the fractional operator.
pub const FRACTIONAL_MASS_NEUTRALITY: f64 = 1e-10;

/// Clip floor of the spectral solver (ringing below this is an error).
pub const SPECTRAL_CLIP_FLOOR: f64 = -1e-12;

/// Default number of stored time nodes on a density path.
pub const PATH_NODE_BUDGET: usize = 400;

/// Default probe count per axis of sampling-based coefficient checks.
pub const SAMPLE_POINTS_PER_AXIS: usize = 11;

/// Significant digits used when writing floating-point text artifacts.
pub const CSV_SIG_DIGITS: usize = 17;

/// Snapshot of every default above, embedded into run manifests.
#[derive(Debug, Clone, Serialize)]
pub struct DefaultsEcho {
    /// `MASS_TOL`
    pub mass_tol: f64,
    /// `NEGATIVITY_FLOOR`
    pub negativity_floor: f64,
    /// `STEP_MASS_DRIFT`
    pub step_mass_drift: f64,
    /// `STEP_CLIP_BUDGET`
    pub step_clip_budget: f64,
    /// `BOUNDARY_TAIL_ALARM`
    pub boundary_tail_alarm: f64,
    /// `T_FLOOR`
    pub t_floor: f64,
    /// `MOLLIFIER_WIDTH_CELLS`
    pub mollifier_width_cells: f64,
    /// `MOLLIFIER_HORIZON_CELLS`
    pub mollifier_horizon_cells: f64,
    /// `DIRAC_MARGIN_FACTOR`
    pub dirac_margin_factor: f64,
    /// `SENSITIVITY_SLACK`
    pub sensitivity_slack: f64,
    /// `LOCAL_BOX_FACTOR`
    pub local_box_factor: f64,
    /// `ENVELOPE_HEADROOM`
    pub envelope_headroom: f64,
    /// `ENVELOPE_SIGMA_CANDIDATES`
    pub envelope_sigma_candidates: usize,
    /// `PICARD_TOL`
    pub picard_tol: f64,
    /// `PICARD_MAX_ITER`
    pub picard_max_iter: usize,
    /// `PICARD_SPLIT_FACTOR`
    pub picard_split_factor: usize,
    /// `PICARD_MAX_SPLITS`
    pub picard_max_splits: usize,
    /// `CONTRACTION_PROBE`
    pub contraction_probe: f64,
    /// `SPECTRAL_EXTENSION_FACTOR`
    pub spectral_extension_factor: usize,
    /// `SPECTRAL_BOUNDARY_BUDGET`
    pub spectral_boundary_budget: f64,
    /// `FRACTIONAL_MASS_NEUTRALITY`
    pub fractional_mass_neutrality: f64,
    /// `SPECTRAL_CLIP_FLOOR`
    pub spectral_clip_floor: f64,
    /// `PATH_NODE_BUDGET`
    pub path_node_budget: usize,
    /// `SAMPLE_POINTS_PER_AXIS`
    pub sample_points_per_axis: usize,
    /// `CSV_SIG_DIGITS`
    pub csv_sig_digits: usize,
}

impl DefaultsEcho {
    /// Capture the compiled-in defaults.
    #[must_use]
    pub fn current() -> Self {
        Self {
            mass_tol: MASS_TOL,
            negativity_floor: NEGATIVITY_FLOOR,
            step_mass_drift: STEP_MASS_DRIFT,
            step_clip_budget: STEP_CLIP_BUDGET,
            boundary_tail_alarm: BOUNDARY_TAIL_ALARM,
            t_floor: T_FLOOR,
            mollifier_width_cells: MOLLIFIER_WIDTH_CELLS,
            mollifier_horizon_cells: MOLLIFIER_HORIZON_CELLS,
            dirac_margin_factor: DIRAC_MARGIN_FACTOR,
            sensitivity_slack: SENSITIVITY_SLACK,
            local_box_factor: LOCAL_BOX_FACTOR,
            envelope_headroom: ENVELOPE_HEADROOM,
            envelope_sigma_candidates: ENVELOPE_SIGMA_CANDIDATES,
            picard_tol: PICARD_TOL,
            picard_max_iter: PICARD_MAX_ITER,
            picard_split_factor: PICARD_SPLIT_FACTOR,
            picard_max_splits: PICARD_MAX_SPLITS,
            contraction_probe: CONTRACTION_PROBE,
            spectral_extension_factor: SPECTRAL_EXTENSION_FACTOR,
            spectral_boundary_budget: SPECTRAL_BOUNDARY_BUDGET,
            fractional_mass_neutrality: FRACTIONAL_MASS_NEUTRALITY,
            spectral_clip_floor: SPECTRAL_CLIP_FLOOR,
            path_node_budget: PATH_NODE_BUDGET,
            sample_points_per_axis: SAMPLE_POINTS_PER_AXIS,
            csv_sig_digits: CSV_SIG_DIGITS,
        }
    }
}
