//! Reference kernels and envelope certification for Green-function paths.
//!
//! Three families of closed-form references live here:
//!
//! * the Gaussian heat kernel `G_sigma(t, x) = (2 pi t sigma^2)^{-1/2}
//!   exp(-x^2 / (2 t sigma^2))`, exact for constant coefficients;
//! * symmetric stable kernels `S(t, x)` with Fourier transform
//!   `exp(-t a |k|^{alpha_s})`, computed by an inverse FFT on the grid's
//!   periodic wavenumbers (the grid sum is then exactly the `k = 0` spectral
//!   value, so unit mass holds to roundoff);
//! * the comparison machinery that certifies solver output from a Dirac
//!   start against two-sided envelopes `C_1 G_{sigma_1} <= u <= C_2
//!   G_{sigma_2}`, against the derivative bound `|d_x u| <= C t^{-e} u`, and
//!   against localization certificates `(K, delta, epsilon)`.
//!
//! Dirac starts are mollified (see
//! [`LinearSolver::solve_from_dirac`](crate::linfp::LinearSolver::solve_from_dirac)),
//! so Gaussian references are evaluated at the shifted time
//! `t + tau / sigma^2`, where `tau` is the squared mollifier width recorded
//! on the path; with that shift the constant-coefficient control is compared
//! against its *exact* solution and tight constants snap to `1` within
//! [`defaults::ENVELOPE_HEADROOM`]. All pointwise checks run over a window
//! `t in [t_min, t_max]`, `|x - xi| <= min(halfwidth, c * scale(t))` with
//! `c = ` [`defaults::LOCAL_BOX_FACTOR`] and `scale(t)` the family's spread
//! (`sigma_hi sqrt(t)`, or `(a_hi t)^{1/alpha_s}`): outside the local box the
//! discrete Green function is dominated by lattice effects and pointwise
//! ratios to the continuum kernel are not meaningful at any affordable
//! resolution. Checks also never start before
//! `max(T_FLOOR, MOLLIFIER_HORIZON_CELLS * dx^2)`.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defaults;
use crate::density::{Density, DensityError, LocalizationCertificate, QuantileLevels};
use crate::grid::Grid;
use crate::linfp::DensityPath;

/// Errors from kernel evaluation and envelope certification.
#[derive(Debug, Error)]
pub enum KernelsError {
    /// Kernels are defined for positive times only.
    #[error("kernel time must be positive, got t = {t}")]
    NonPositiveTime {
        /// Offending time.
        t: f64,
    },
    /// The Gaussian family needs a positive sigma.
    #[error("sigma must be positive, got {sigma}")]
    NonPositiveSigma {
        /// Offending sigma.
        sigma: f64,
    },
    /// The stable index must lie in `(1, 2]`.
    #[error("stable index must lie in (1, 2], got alpha_s = {alpha_s}")]
    IndexOutOfRange {
        /// Offending index.
        alpha_s: f64,
    },
    /// The stable intensity must be positive.
    #[error("stable intensity must be positive, got a = {a}")]
    NonPositiveCoefficient {
        /// Offending intensity.
        a: f64,
    },
    /// Spectral inversion produced a negative value beyond the ringing floor.
    #[error("spectral ringing produced {min:e}, below the {floor:e} floor; refine the grid or widen the box")]
    ExcessiveRinging {
        /// Most negative value encountered.
        min: f64,
        /// The floor it crossed.
        floor: f64,
    },
    /// Kernel comparisons need a Green-function path (Dirac start).
    #[error("path was not started from a Dirac; kernel comparisons need a Green-function path")]
    NotADiracPath,
    /// No stored node falls inside the requested window.
    #[error("empty comparison window: {reason}")]
    WindowEmpty {
        /// Explanation.
        reason: String,
    },
    /// No envelope of the requested family covers the path on the window.
    #[error(
        "no {side} envelope in the {family} family: worst ratio {worst_ratio:e} at (t, x) = ({t}, {x})"
    )]
    NoEnvelopeFound {
        /// Which side failed (`"lower"` or `"upper"`).
        side: String,
        /// Family name.
        family: String,
        /// The ratio at the worst offending point.
        worst_ratio: f64,
        /// Time of the worst point.
        t: f64,
        /// Position of the worst point.
        x: f64,
    },
    /// No `(K, delta, epsilon)` certificate exists on the given grid.
    #[error("localization certificate unobtainable: {reason}")]
    CertificateUnobtainable {
        /// Explanation.
        reason: String,
    },
    /// A parameter failed validation.
    #[error("invalid parameter: {reason}")]
    InvalidParameter {
        /// Explanation.
        reason: String,
    },
    /// Errors bubbled up from density handling.
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// The Gaussian heat kernel `(2 pi t sigma^2)^{-1/2} exp(-x^2/(2 t sigma^2))`.
pub fn gaussian_kernel(sigma: f64, t: f64, x: f64) -> Result<f64, KernelsError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(KernelsError::NonPositiveSigma { sigma });
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(KernelsError::NonPositiveTime { t });
    }
    let v = t * sigma * sigma;
    Ok((2.0 * std::f64::consts::PI * v).sqrt().recip() * (-x * x / (2.0 * v)).exp())
}

/// Raw symmetric stable kernel values on `grid`, centered at `center`:
/// the inverse DFT of `exp(-t a |k|^{alpha_s})` over the grid's periodic
/// wavenumbers. Values may carry ringing at the `1e-16` scale and are not
/// validated; [`stable_density`] wraps this into a checked [`Density`].
pub fn stable_kernel_on_grid(
    alpha_s: f64,
    a: f64,
    t: f64,
    grid: &Grid,
    center: f64,
) -> Result<Vec<f64>, KernelsError> {
    if !(alpha_s.is_finite() && alpha_s > 1.0 && alpha_s <= 2.0) {
        return Err(KernelsError::IndexOutOfRange { alpha_s });
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(KernelsError::NonPositiveCoefficient { a });
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(KernelsError::NonPositiveTime { t });
    }
    let n = grid.n();
    let length = grid.x_max() - grid.x_min();
    // Offset of the first cell center relative to the kernel center; folding
    // it into the spectrum keeps the inverse transform a plain DFT.
    let phase_origin = grid.x_min() + 0.5 * grid.dx() - center;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|m| {
            let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let k = 2.0 * std::f64::consts::PI * freq / length;
            let magnitude = (-t * a * k.abs().powf(alpha_s)).exp() / length;
            Complex::from_polar(magnitude, k * phase_origin)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    Ok(buf.into_iter().map(|c| c.re).collect())
}

/// Symmetric stable kernel `S(t, .)` with Fourier transform
/// `exp(-t a |k|^{alpha_s})`, as a validated density on `grid`.
///
/// The grid sum is the `k = 0` spectral value, so mass is `1` to roundoff;
/// values are non-negative up to spectral ringing, which is clipped when it
/// stays above [`defaults::SPECTRAL_CLIP_FLOOR`] and rejected otherwise.
/// `alpha_s = 2`, `a = 1/2` reproduces the unit Gaussian kernel.
pub fn stable_density(alpha_s: f64, a: f64, t: f64, grid: &Grid) -> Result<Density, KernelsError> {
    let mut values = stable_kernel_on_grid(alpha_s, a, t, grid, 0.0)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < defaults::SPECTRAL_CLIP_FLOOR {
        return Err(KernelsError::ExcessiveRinging { min, floor: defaults::SPECTRAL_CLIP_FLOOR });
    }
    for v in &mut values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(Density::new(grid.clone(), values)?)
}

/// Kernel family an envelope is fitted in. The two range parameters bound
/// the grid search: 20 log-spaced candidates including both endpoints
/// ([`defaults::ENVELOPE_SIGMA_CANDIDATES`]). A degenerate range pins the
/// candidate, which is how constant-coefficient controls assert exact
/// constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum EnvelopeFamily {
    /// Gaussian references `G_sigma`, searched over `sigma`.
    Gaussian {
        /// Inclusive search range for sigma.
        sigma_range: (f64, f64),
    },
    /// Symmetric stable references of fixed index, searched over the
    /// intensity `a`.
    Stable {
        /// Stable index in `(1, 2]`.
        alpha_s: f64,
        /// Inclusive search range for the intensity `a`.
        a_range: (f64, f64),
    },
}

impl EnvelopeFamily {
    fn validate(&self) -> Result<(), KernelsError> {
        let check_range = |(lo, hi): (f64, f64), what: &str| {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
                return Err(KernelsError::InvalidParameter {
                    reason: format!("{what} range must satisfy 0 < lo <= hi, got ({lo}, {hi})"),
                });
            }
            Ok(())
        };
        match self {
            Self::Gaussian { sigma_range } => check_range(*sigma_range, "sigma"),
            Self::Stable { alpha_s, a_range } => {
                if !(alpha_s.is_finite() && *alpha_s > 1.0 && *alpha_s <= 2.0) {
                    return Err(KernelsError::IndexOutOfRange { alpha_s: *alpha_s });
                }
                check_range(*a_range, "intensity")
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Stable { .. } => "stable",
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            Self::Gaussian { sigma_range } => *sigma_range,
            Self::Stable { a_range, .. } => *a_range,
        }
    }

    /// The fixed time exponent of the family's localization scale:
    /// `1/2` for diffusions, `1/alpha_s` for stable generators.
    #[must_use]
    pub fn localization_exponent(&self) -> f64 {
        match self {
            Self::Gaussian { .. } => 0.5,
            Self::Stable { alpha_s, .. } => 1.0 / alpha_s,
        }
    }

    /// Representative spread at time `t` (upper end of the search range).
    #[must_use]
    pub fn scale(&self, t: f64) -> f64 {
        match self {
            Self::Gaussian { sigma_range } => sigma_range.1 * t.sqrt(),
            Self::Stable { alpha_s, a_range } => (a_range.1 * t).powf(1.0 / alpha_s),
        }
    }
}

/// Where an envelope or bound is checked: a time slab intersected with the
/// family's local box around the Dirac origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeWindow {
    /// Earliest checked time (clipped below by the mollifier horizon).
    pub t_min: f64,
    /// Latest checked time.
    pub t_max: f64,
    /// Hard cap on `|x - xi|`, on top of the local box scaling.
    pub x_halfwidth: f64,
}

impl EnvelopeWindow {
    /// Validate a window: `0 < t_min <= t_max`, positive halfwidth.
    pub fn new(t_min: f64, t_max: f64, x_halfwidth: f64) -> Result<Self, KernelsError> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min > 0.0 && t_max >= t_min) {
            return Err(KernelsError::InvalidParameter {
                reason: format!(
                    "window times must satisfy 0 < t_min <= t_max, got [{t_min}, {t_max}]"
                ),
            });
        }
        if !(x_halfwidth.is_finite() && x_halfwidth > 0.0) {
            return Err(KernelsError::InvalidParameter {
                reason: format!("window halfwidth must be positive, got {x_halfwidth}"),
            });
        }
        Ok(Self { t_min, t_max, x_halfwidth })
    }
}

/// A fitted two-sided envelope `C_1 R_{p_1} <= u <= C_2 R_{p_2}`, where `R_p`
/// is the family reference at parameter `p` (sigma for Gaussian, intensity
/// `a` for stable; the parameter is stored in the `sigma_*` slots either way).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEnvelope {
    /// Family the envelope was fitted in.
    pub family: EnvelopeFamily,
    /// Lower constant `C_1 > 0`.
    pub c_lower: f64,
    /// Lower reference parameter.
    pub sigma_lower: f64,
    /// Upper constant `C_2`.
    pub c_upper: f64,
    /// Upper reference parameter (`>= sigma_lower`).
    pub sigma_upper: f64,
}

/// Outcome of a pointwise envelope verification.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Constants the check ran with (envelope constants, mollifier shift, ...).
    pub constants: BTreeMap<String, f64>,
    /// Number of `(t, x)` points checked.
    pub checked_points: usize,
    /// Points violating a bound beyond the headroom slack.
    pub violations: usize,
    /// Largest normalized ratio (`1` sits exactly on the bound).
    pub worst_ratio: f64,
    /// Window the check ran over.
    pub window: EnvelopeWindow,
}

/// Smallest-constant fit of the derivative bound `|d_x u| <= C t^{-e} u`.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeBoundReport {
    /// Smallest admissible constant over the window.
    pub c: f64,
    /// Time exponent `e` used (fixed by the family unless overridden).
    pub exponent: f64,
    /// Per-slice smallest constants `(t, C_t)`, for uniformity checks.
    pub per_slice: Vec<(f64, f64)>,
    /// Number of `(t, x)` points checked.
    pub checked_points: usize,
}

/// Dirac localization diagnostic: how fast the level-`alpha` quantile leaves
/// the starting point.
#[derive(Debug, Clone, Serialize)]
pub struct DiracLocalizationReport {
    /// Dirac origin `xi`.
    pub origin: f64,
    /// Scale exponent `e` used in the fit `|Q - xi| <= K t^e`.
    pub exponent: f64,
    /// Smallest `K` covering all checked nodes.
    pub k_fit: f64,
    /// Log-log slope of `|Q - xi|` against `t`, where the gap resolves
    /// above half a cell; `None` when too few nodes resolve (e.g. at the
    /// median of a symmetric kernel).
    pub slope: Option<f64>,
    /// The `(t, |Q - xi|)` pairs entering the fit.
    pub points: Vec<(f64, f64)>,
}

/// `count` log-spaced values covering `[lo, hi]` with exact endpoints.
fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if hi <= lo || count < 2 {
        return vec![lo];
    }
    let ratio = hi / lo;
    let mut out: Vec<f64> =
        (0..count).map(|i| lo * ratio.powf(i as f64 / (count - 1) as f64)).collect();
    out[0] = lo;
    out[count - 1] = hi;
    out
}

/// Node indices of `path` admissible for kernel comparison: inside the
/// window, past the mollifier horizon, and strictly past the path start.
fn admissible_nodes(
    path: &DensityPath,
    t_min: f64,
    t_max: f64,
) -> Result<(f64, f64, Vec<usize>), KernelsError> {
    let origin = path.meta.dirac_origin.ok_or(KernelsError::NotADiracPath)?;
    let moll_std = path.meta.mollifier_std.unwrap_or(0.0);
    let dx = path.grid().dx();
    let floor = t_min.max(defaults::T_FLOOR).max(defaults::MOLLIFIER_HORIZON_CELLS * dx * dx);
    let t_start = path.times()[0];
    let indices: Vec<usize> = path
        .times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= floor && t <= t_max * (1.0 + 1e-12) && t > t_start)
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(KernelsError::WindowEmpty {
            reason: format!(
                "no stored node in [{floor}, {t_max}] (path covers [{t_start}, {}])",
                path.times().last().copied().unwrap_or(t_start)
            ),
        });
    }
    Ok((origin, moll_std, indices))
}

/// Family reference values at the window cells of one node. For Gaussian
/// references the time is shifted by `tau / sigma^2` to absorb the mollifier;
/// stable references have no exact composite, which the mollifier-horizon
/// floor renders immaterial.
fn reference_slice(
    family: &EnvelopeFamily,
    param: f64,
    t: f64,
    tau: f64,
    grid: &Grid,
    origin: f64,
    cells: std::ops::Range<usize>,
) -> Result<Vec<f64>, KernelsError> {
    match family {
        EnvelopeFamily::Gaussian { .. } => {
            let t_eff = t + tau / (param * param);
            cells.map(|j| gaussian_kernel(param, t_eff, grid.center(j) - origin)).collect()
        }
        EnvelopeFamily::Stable { alpha_s, .. } => {
            let all = stable_kernel_on_grid(*alpha_s, param, t, grid, origin)?;
            Ok(all[cells].to_vec())
        }
    }
}

/// Cell range of the check box at time `t`: `|x - origin|` below the window
/// halfwidth and the family's local box `LOCAL_BOX_FACTOR * scale(t)`.
fn box_cells(
    grid: &Grid,
    origin: f64,
    family: &EnvelopeFamily,
    t: f64,
    halfwidth: f64,
) -> std::ops::Range<usize> {
    let half = halfwidth.min(defaults::LOCAL_BOX_FACTOR * family.scale(t));
    let lo = origin - half;
    let hi = origin + half;
    let n = grid.n();
    let start = (0..n).find(|&j| grid.center(j) >= lo).unwrap_or(n);
    let end = (0..n).rev().find(|&j| grid.center(j) <= hi).map_or(start, |j| j + 1);
    start..end.max(start)
}

/// Snap a tight constant to `1` when it already sits within the headroom.
fn snap_constant(c: f64) -> f64 {
    if (c - 1.0).abs() <= defaults::ENVELOPE_HEADROOM {
        1.0
    } else {
        c
    }
}

/// Fit a two-sided envelope to a Green-function path over `window`.
///
/// Both sides grid-search the family parameter over
/// [`defaults::ENVELOPE_SIGMA_CANDIDATES`] log-spaced candidates (endpoints
/// included) and then take the tight constant: the upper side minimizes the
/// worst ratio `u / R_p`, the lower side maximizes the smallest ratio among
/// candidates not exceeding the chosen upper parameter, so that
/// `sigma_lower <= sigma_upper` always holds. Constants within
/// [`defaults::ENVELOPE_HEADROOM`] of `1` snap to exactly `1`, which makes
/// constant-coefficient controls report `(1, sigma, 1, sigma)`.
pub fn fit_envelope(
    path: &DensityPath,
    family: &EnvelopeFamily,
    window: &EnvelopeWindow,
) -> Result<KernelEnvelope, KernelsError> {
    family.validate()?;
    let (origin, moll_std, nodes) = admissible_nodes(path, window.t_min, window.t_max)?;
    let tau = moll_std * moll_std;
    let grid = path.grid();
    let (lo, hi) = family.range();
    let candidates = log_spaced(lo, hi, defaults::ENVELOPE_SIGMA_CANDIDATES);

    // Per candidate: (max ratio, argmax point, min ratio, argmin point).
    let mut stats = Vec::with_capacity(candidates.len());
    for &p in &candidates {
        let mut max_ratio = f64::NEG_INFINITY;
        let mut max_at = (f64::NAN, f64::NAN);
        let mut min_ratio = f64::INFINITY;
        let mut min_at = (f64::NAN, f64::NAN);
        for &i in &nodes {
            let t = path.times()[i];
            let cells = box_cells(grid, origin, family, t, window.x_halfwidth);
            if cells.is_empty() {
                continue;
            }
            let reference = reference_slice(family, p, t, tau, grid, origin, cells.clone())?;
            let values = &path.node(i).values()[cells.clone()];
            for (offset, (&u, &g)) in values.iter().zip(&reference).enumerate() {
                let x = grid.center(cells.start + offset);
                let ratio = if g > 0.0 {
                    u / g
                } else if u > 0.0 {
                    f64::INFINITY
                } else {
                    continue;
                };
                if ratio > max_ratio {
                    max_ratio = ratio;
                    max_at = (t, x);
                }
                if ratio < min_ratio {
                    min_ratio = ratio;
                    min_at = (t, x);
                }
            }
        }
        stats.push((max_ratio, max_at, min_ratio, min_at));
    }

    let upper_idx = (0..candidates.len())
        .min_by(|&i, &j| stats[i].0.total_cmp(&stats[j].0))
        .expect("candidate list is nonempty");
    let (c_up_raw, up_at, ..) = stats[upper_idx];
    if !c_up_raw.is_finite() || c_up_raw <= 0.0 {
        return Err(KernelsError::NoEnvelopeFound {
            side: "upper".into(),
            family: family.name().into(),
            worst_ratio: c_up_raw,
            t: up_at.0,
            x: up_at.1,
        });
    }
    let lower_idx = (0..candidates.len())
        .filter(|&i| candidates[i] <= candidates[upper_idx] * (1.0 + 1e-12))
        .max_by(|&i, &j| stats[i].2.total_cmp(&stats[j].2))
        .expect("upper candidate always qualifies");
    let (_, _, c_lo_raw, lo_at) = stats[lower_idx];
    if !(c_lo_raw.is_finite() && c_lo_raw > 0.0) {
        return Err(KernelsError::NoEnvelopeFound {
            side: "lower".into(),
            family: family.name().into(),
            worst_ratio: c_lo_raw,
            t: lo_at.0,
            x: lo_at.1,
        });
    }
    Ok(KernelEnvelope {
        family: family.clone(),
        c_lower: snap_constant(c_lo_raw),
        sigma_lower: candidates[lower_idx],
        c_upper: snap_constant(c_up_raw),
        sigma_upper: candidates[upper_idx],
    })
}

/// Re-verify a fitted envelope pointwise on a (possibly different) path.
///
/// A point violates when `u > C_2 R (1 + headroom)` or
/// `u < C_1 R (1 - headroom)`; the headroom covers both constant snapping
/// and resolution changes, so an envelope fitted on a coarse path must
/// re-verify with zero violations on the doubled-resolution solve.
pub fn verify_envelope(
    path: &DensityPath,
    envelope: &KernelEnvelope,
    window: &EnvelopeWindow,
) -> Result<BoundReport, KernelsError> {
    let family = &envelope.family;
    family.validate()?;
    let (origin, moll_std, nodes) = admissible_nodes(path, window.t_min, window.t_max)?;
    let tau = moll_std * moll_std;
    let grid = path.grid();
    let headroom = defaults::ENVELOPE_HEADROOM;
    let mut checked_points = 0usize;
    let mut violations = 0usize;
    let mut worst_ratio = 0.0f64;
    for &i in &nodes {
        let t = path.times()[i];
        let cells = box_cells(grid, origin, family, t, window.x_halfwidth);
        if cells.is_empty() {
            continue;
        }
        let upper =
            reference_slice(family, envelope.sigma_upper, t, tau, grid, origin, cells.clone())?;
        let lower =
            reference_slice(family, envelope.sigma_lower, t, tau, grid, origin, cells.clone())?;
        let values = &path.node(i).values()[cells];
        for ((&u, &g_up), &g_lo) in values.iter().zip(&upper).zip(&lower) {
            checked_points += 1;
            let above = if g_up > 0.0 { u / (envelope.c_upper * g_up) } else { f64::INFINITY };
            let below = if u > 0.0 {
                envelope.c_lower * g_lo / u
            } else if g_lo > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            let ratio = above.max(below);
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 1.0 + headroom {
                violations += 1;
            }
        }
    }
    let mut constants = BTreeMap::new();
    constants.insert("c_lower".into(), envelope.c_lower);
    constants.insert("sigma_lower".into(), envelope.sigma_lower);
    constants.insert("c_upper".into(), envelope.c_upper);
    constants.insert("sigma_upper".into(), envelope.sigma_upper);
    constants.insert("mollifier_tau".into(), tau);
    constants.insert("headroom".into(), headroom);
    Ok(BoundReport { constants, checked_points, violations, worst_ratio, window: *window })
}

/// Fit the smallest `C` in the derivative bound `|d_x u| <= C t^{-e} u`.
///
/// The exponent is *not* fitted: it is `1/2` for the Gaussian family and
/// `1/alpha_s` for the stable family, unless `exponent_override` substitutes
/// a deliberately wrong value (the negative control, whose per-slice
/// constants then grow toward small times instead of staying uniform).
/// Derivatives are centered differences; cells below `1e-12` of the slice
/// peak are skipped to keep roundoff tails out of the ratio.
pub fn check_derivative_bound(
    path: &DensityPath,
    family: &EnvelopeFamily,
    window: &EnvelopeWindow,
    exponent_override: Option<f64>,
) -> Result<DerivativeBoundReport, KernelsError> {
    family.validate()?;
    let (origin, _, nodes) = admissible_nodes(path, window.t_min, window.t_max)?;
    let grid = path.grid();
    let dx = grid.dx();
    let exponent = exponent_override.unwrap_or_else(|| family.localization_exponent());
    let mut per_slice = Vec::with_capacity(nodes.len());
    let mut c = 0.0f64;
    let mut checked_points = 0usize;
    for &i in &nodes {
        let t = path.times()[i];
        let cells = box_cells(grid, origin, family, t, window.x_halfwidth);
        let values = path.node(i).values();
        let peak = values.iter().copied().fold(0.0f64, f64::max);
        let floor = 1e-12 * peak;
        let mut c_slice = 0.0f64;
        let weight = t.powf(exponent);
        for j in cells {
            if j == 0 || j + 1 >= values.len() || values[j] <= floor {
                continue;
            }
            let derivative = (values[j + 1] - values[j - 1]) / (2.0 * dx);
            c_slice = c_slice.max(derivative.abs() * weight / values[j]);
            checked_points += 1;
        }
        per_slice.push((t, c_slice));
        c = c.max(c_slice);
    }
    Ok(DerivativeBoundReport { c, exponent, per_slice, checked_points })
}

/// Extract a shared localization certificate `(K, delta, epsilon)` from one
/// or more solved paths: tail mass outside `[-K, K]` at most `epsilon`,
/// density at least `delta` on `[-2K, 2K]`, and all requested quantiles
/// inside `[-K, K]`, for every stored node of every path.
///
/// `K` is the smallest such half-width (up to one cell); requesting a larger
/// `epsilon` therefore never enlarges it. Fails with
/// [`KernelsError::CertificateUnobtainable`] when the doubled box does not
/// fit inside a grid, a node has a zero cell inside the doubled box, or the
/// tails never drop below `epsilon`.
pub fn localization_certificate(
    paths: &[&DensityPath],
    levels: &QuantileLevels,
    epsilon: f64,
) -> Result<LocalizationCertificate, KernelsError> {
    if paths.is_empty() {
        return Err(KernelsError::InvalidParameter { reason: "no paths given".into() });
    }
    let margin = levels.margin();
    if !(epsilon > 0.0 && epsilon < margin) {
        return Err(KernelsError::InvalidParameter {
            reason: format!(
                "epsilon must lie in (0, min(alpha, 1-alpha)) = (0, {margin}), got {epsilon}"
            ),
        });
    }
    let mut k = 0.0f64;
    for path in paths {
        let grid = path.grid();
        // Cells ordered from the outside in; the smallest admissible K for a
        // node is the first |center| whose outward mass exceeds epsilon.
        let mut order: Vec<usize> = (0..grid.n()).collect();
        order.sort_by(|&i, &j| grid.center(j).abs().total_cmp(&grid.center(i).abs()));
        for i in 0..path.len() {
            let node = path.node(i);
            let values = node.values();
            let mut outward = 0.0;
            let mut k_node = 0.0f64;
            for &j in &order {
                outward += values[j] * grid.dx();
                if outward > epsilon {
                    k_node = grid.center(j).abs();
                    break;
                }
            }
            if outward <= epsilon {
                // Even the full grid keeps the tail under epsilon; the node
                // is localized by its support.
                k_node = 0.0;
            }
            k = k.max(k_node);
            for &alpha in levels.as_slice() {
                let q = node.quantile(alpha)?;
                k = k.max(q.abs() + 0.5 * grid.dx());
            }
        }
    }
    if k == 0.0 {
        return Err(KernelsError::CertificateUnobtainable {
            reason: "paths carry no mass to localize".into(),
        });
    }
    let mut delta = f64::INFINITY;
    for path in paths {
        let grid = path.grid();
        let capacity = (-grid.x_min()).min(grid.x_max());
        if 2.0 * k > capacity {
            return Err(KernelsError::CertificateUnobtainable {
                reason: format!(
                    "doubled box [-2K, 2K] = [-{0}, {0}] exceeds the grid half-width {capacity}",
                    2.0 * k
                ),
            });
        }
        for i in 0..path.len() {
            delta = delta.min(path.node(i).min_on_box(2.0 * k));
        }
    }
    if !(delta > 0.0) {
        return Err(KernelsError::CertificateUnobtainable {
            reason: format!("density floor on the doubled box is {delta:e}; need a positive delta"),
        });
    }
    Ok(LocalizationCertificate::new(k, delta, epsilon, levels)?)
}

/// Measure how the level-`alpha` quantile of a Green-function path leaves
/// its origin: fits the smallest `K` with `|Q_alpha(u_t) - xi| <= K t^e`
/// over nodes past `t_min` and reports the log-log slope of the gap where
/// it resolves above half a cell. `t_min` lets heavy-tailed paths override
/// the diffusive mollifier-forgetting floor, which scales differently for
/// them; pass `0.0` to keep the default floor.
pub fn dirac_localization_check(
    path: &DensityPath,
    alpha: f64,
    exponent: f64,
    t_min: f64,
) -> Result<DiracLocalizationReport, KernelsError> {
    let t_end = *path.times().last().expect("paths are nonempty");
    let (origin, _, nodes) = admissible_nodes(path, t_min, t_end)?;
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(KernelsError::InvalidParameter {
            reason: format!("scale exponent must be positive, got {exponent}"),
        });
    }
    let dx = path.grid().dx();
    let mut points = Vec::with_capacity(nodes.len());
    let mut k_fit = 0.0f64;
    for &i in &nodes {
        let t = path.times()[i];
        let gap = (path.node(i).quantile(alpha)? - origin).abs();
        k_fit = k_fit.max(gap / t.powf(exponent));
        points.push((t, gap));
    }
    let resolved: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(_, gap)| gap > 0.5 * dx).collect();
    let spread_ok =
        resolved.first().zip(resolved.last()).is_some_and(|(&(t0, _), &(t1, _))| t1 / t0 >= 4.0);
    let slope =
        if resolved.len() >= 3 && spread_ok { Some(log_log_slope(&resolved)) } else { None };
    Ok(DiracLocalizationReport { origin, exponent, k_fit, slope, points })
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::ModelSpec;
    use crate::linfp::{LinearSolver, TimeWindow};
    use approx::assert_abs_diff_eq;

    fn brownian_dirac_path(n: usize, t_end: f64, dt: f64) -> DensityPath {
        let grid = Grid::new(-8.0, 8.0, n).unwrap();
        let field = ModelSpec::Brownian { sigma: 1.0 }.build((-8.0, 8.0), (-2.0, 2.0)).unwrap();
        let solver = LinearSolver::new(field);
        solver.solve_from_dirac(&grid, 0.0, TimeWindow::to(t_end, dt).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_kernel_values_and_errors() {
        assert_abs_diff_eq!(gaussian_kernel(1.0, 1.0, 0.0).unwrap(), 0.3989423, epsilon = 1e-7);
        assert_abs_diff_eq!(
            gaussian_kernel(1.0, 1.0, 1.5).unwrap(),
            gaussian_kernel(1.0, 1.0, -1.5).unwrap(),
            epsilon = 0.0
        );
        // Scaling: G_sigma(t, x) = G_1(sigma^2 t, x).
        assert_abs_diff_eq!(
            gaussian_kernel(2.0, 0.5, 0.7).unwrap(),
            gaussian_kernel(1.0, 2.0, 0.7).unwrap(),
            epsilon = 1e-15
        );
        assert!(matches!(
            gaussian_kernel(1.0, 0.0, 0.0),
            Err(KernelsError::NonPositiveTime { .. })
        ));
        assert!(matches!(
            gaussian_kernel(-1.0, 1.0, 0.0),
            Err(KernelsError::NonPositiveSigma { .. })
        ));
    }

    #[test]
    fn gaussian_kernel_integrates_to_one() {
        let grid = Grid::new(-8.0, 8.0, 4000).unwrap();
        let mass: f64 =
            grid.centers().iter().map(|&x| gaussian_kernel(1.0, 1.0, x).unwrap() * grid.dx()).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_semigroup_under_discrete_convolution() {
        // G(s) * G(t) = G(s + t); the midpoint-rule convolution of sampled
        // kernels reproduces it to well below 1e-6 in L1.
        let grid = Grid::new(-8.0, 8.0, 1600).unwrap();
        let dx = grid.dx();
        let (s, t) = (0.3, 0.5);
        let g1: Vec<f64> =
            grid.centers().iter().map(|&x| gaussian_kernel(1.0, s, x).unwrap()).collect();
        let g2: Vec<f64> =
            grid.centers().iter().map(|&x| gaussian_kernel(1.0, t, x).unwrap()).collect();
        let n = grid.n();
        let mut l1 = 0.0;
        for j in 0..n {
            let mut conv = 0.0;
            for k in 0..n {
                // x_j - x_k lands back on a grid offset because the grid is
                // uniform: index j - k + n/2 relative to the center.
                let idx = j as isize - k as isize + (n / 2) as isize;
                if idx >= 0 && (idx as usize) < n {
                    conv += g1[k] * g2[idx as usize];
                }
            }
            conv *= dx;
            // Cell centers sit on the half-integer lattice, so their
            // differences land on the integer lattice: the convolution value
            // approximates the kernel at x_j + dx/2.
            let x = grid.center(j) + 0.5 * dx;
            l1 += (conv - gaussian_kernel(1.0, s + t, x).unwrap()).abs() * dx;
        }
        assert!(l1 <= 1e-6, "semigroup defect {l1:e}");
    }

    #[test]
    fn stable_density_recovers_gaussian_at_index_two() {
        let grid = Grid::new(-8.0, 8.0, 1024).unwrap();
        let stable = stable_density(2.0, 0.5, 1.0, &grid).unwrap();
        let gauss = Density::gaussian(grid.clone(), 0.0, 1.0).unwrap();
        assert!(stable.l1_distance(&gauss).unwrap() <= 1e-8);
    }

    #[test]
    fn stable_density_mass_positivity_and_tail_slope() {
        // Wide box: the x^{-(1 + alpha_s)} tail must clear the boundary.
        let grid = Grid::new(-409.6, 409.6, 16384).unwrap();
        let s = stable_density(1.5, 1.0, 1.0, &grid).unwrap();
        assert_abs_diff_eq!(s.mass(), 1.0, epsilon = 1e-8);
        assert!(s.values().iter().all(|&v| v >= 0.0));
        let pts: Vec<(f64, f64)> = grid
            .centers()
            .iter()
            .zip(s.values())
            .filter(|(&x, &v)| (10.0..=100.0).contains(&x) && v > 0.0)
            .map(|(&x, &v)| (x, v))
            .collect();
        assert!(pts.len() > 100);
        let slope = log_log_slope(&pts);
        assert_abs_diff_eq!(slope, -2.5, epsilon = 0.1);
    }

    #[test]
    fn stable_density_self_similarity() {
        // S(t, x) = t^{-1/a} S(1, t^{-1/a} x): scaling the grid by t^{1/a}
        // scales the spectrum to the same values, so the identity holds to
        // roundoff.
        let alpha_s = 1.5;
        let t = 0.5f64;
        let lam = t.powf(-1.0 / alpha_s);
        let g1 = Grid::new(-204.8, 204.8, 8192).unwrap();
        let g2 = Grid::new(-204.8 * lam, 204.8 * lam, 8192).unwrap();
        let st = stable_density(alpha_s, 1.0, t, &g1).unwrap();
        let s1 = stable_density(alpha_s, 1.0, 1.0, &g2).unwrap();
        for (a, b) in st.values().iter().zip(s1.values()) {
            assert_abs_diff_eq!(*a, lam * b, epsilon = 1e-8);
        }
    }

    #[test]
    fn stable_density_validates_parameters() {
        let grid = Grid::new(-8.0, 8.0, 64).unwrap();
        assert!(matches!(
            stable_density(1.0, 1.0, 1.0, &grid),
            Err(KernelsError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            stable_density(2.3, 1.0, 1.0, &grid),
            Err(KernelsError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            stable_density(1.5, 0.0, 1.0, &grid),
            Err(KernelsError::NonPositiveCoefficient { .. })
        ));
        assert!(matches!(
            stable_density(1.5, 1.0, -0.1, &grid),
            Err(KernelsError::NonPositiveTime { .. })
        ));
    }

    #[test]
    fn envelope_constant_control_is_exact() {
        // sigma = 1, b = 0: the mollifier-shifted Gaussian *is* the exact
        // solution, so with the parameter pinned the tight constants snap to
        // exactly (1, 1, 1, 1).
        let path = brownian_dirac_path(2400, 0.6, 8e-5);
        let family = EnvelopeFamily::Gaussian { sigma_range: (1.0, 1.0) };
        let window = EnvelopeWindow::new(0.3, 0.6, 3.0).unwrap();
        let envelope = fit_envelope(&path, &family, &window).unwrap();
        assert_eq!(
            (envelope.c_lower, envelope.sigma_lower, envelope.c_upper, envelope.sigma_upper),
            (1.0, 1.0, 1.0, 1.0)
        );
        let report = verify_envelope(&path, &envelope, &window).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.checked_points > 10_000);
        assert!(report.worst_ratio <= 1.0 + defaults::ENVELOPE_HEADROOM);
    }

    #[test]
    fn envelope_grid_search_recovers_the_true_sigma() {
        let path = brownian_dirac_path(2400, 0.6, 8e-5);
        let family = EnvelopeFamily::Gaussian { sigma_range: (0.5, 2.0) };
        let window = EnvelopeWindow::new(0.3, 0.6, 3.0).unwrap();
        let envelope = fit_envelope(&path, &family, &window).unwrap();
        // The candidate lattice has no exact 1.0; the nearest candidates are
        // within 4%, and they minimize the distortion.
        assert!((envelope.sigma_upper - 1.0).abs() <= 0.05, "sigma_upper {}", envelope.sigma_upper);
        assert!((envelope.sigma_lower - 1.0).abs() <= 0.05, "sigma_lower {}", envelope.sigma_lower);
        assert!(envelope.sigma_lower <= envelope.sigma_upper);
        assert!(envelope.c_upper < 1.5);
        assert!(envelope.c_lower > 0.5);
    }

    #[test]
    fn envelope_for_drifted_kernel_needs_wider_upper_sigma() {
        // b = 1 displaces the kernel by t; covering the displaced bulk with
        // a centered Gaussian forces sigma_2 > 1.
        let grid = Grid::new(-8.0, 8.0, 800).unwrap();
        let field = ModelSpec::ConstantDrift { drift: 1.0, sigma: 1.0 }
            .build((-8.0, 8.0), (-2.0, 2.0))
            .unwrap();
        let solver = LinearSolver::new(field);
        let path = solver.solve_from_dirac(&grid, 0.0, TimeWindow::to(0.6, 2e-4).unwrap()).unwrap();
        let family = EnvelopeFamily::Gaussian { sigma_range: (1.0, 2.5) };
        let window = EnvelopeWindow::new(0.2, 0.6, 3.0).unwrap();
        let envelope = fit_envelope(&path, &family, &window).unwrap();
        assert!(envelope.sigma_upper > 1.05, "sigma_upper {}", envelope.sigma_upper);
        let report = verify_envelope(&path, &envelope, &window).unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn envelope_reverifies_at_doubled_resolution() {
        // Variable diffusion a(x) = 1 + 0.5 sin x: fit on the coarse solve,
        // re-verify on the doubled-resolution solve with zero violations.
        let field = ModelSpec::SineDiffusion { base: 1.0, amplitude: 0.5 }
            .build((-8.0, 8.0), (-2.0, 2.0))
            .unwrap();
        let solver = LinearSolver::new(field);
        let window = EnvelopeWindow::new(0.3, 0.6, 3.0).unwrap();
        let family =
            EnvelopeFamily::Gaussian { sigma_range: (0.5f64.sqrt() * 0.9, 1.5f64.sqrt() * 1.1) };
        let coarse_grid = Grid::new(-8.0, 8.0, 800).unwrap();
        let coarse = solver
            .solve_from_dirac(&coarse_grid, 0.0, TimeWindow::to(0.6, 1.3e-4).unwrap())
            .unwrap();
        let envelope = fit_envelope(&coarse, &family, &window).unwrap();
        assert!(envelope.sigma_lower <= envelope.sigma_upper);
        let on_coarse = verify_envelope(&coarse, &envelope, &window).unwrap();
        assert_eq!(on_coarse.violations, 0);
        let fine_grid = Grid::new(-8.0, 8.0, 1600).unwrap();
        let fine =
            solver.solve_from_dirac(&fine_grid, 0.0, TimeWindow::to(0.6, 3.3e-5).unwrap()).unwrap();
        let on_fine = verify_envelope(&fine, &envelope, &window).unwrap();
        assert_eq!(on_fine.violations, 0, "worst ratio {:e}", on_fine.worst_ratio);
    }

    #[test]
    fn envelope_requires_dirac_path() {
        let grid = Grid::new(-8.0, 8.0, 400).unwrap();
        let field = ModelSpec::Brownian { sigma: 1.0 }.build((-8.0, 8.0), (-2.0, 2.0)).unwrap();
        let solver = LinearSolver::new(field);
        let u0 = Density::gaussian(grid, 0.0, 0.5).unwrap();
        let curve = crate::linfp::QuantileCurve::constant(0.0).unwrap();
        let path = solver.solve(&u0, &curve, TimeWindow::to(0.2, 1e-3).unwrap()).unwrap();
        let family = EnvelopeFamily::Gaussian { sigma_range: (1.0, 1.0) };
        let window = EnvelopeWindow::new(0.1, 0.2, 3.0).unwrap();
        assert!(matches!(fit_envelope(&path, &family, &window), Err(KernelsError::NotADiracPath)));
    }

    #[test]
    fn derivative_bound_constant_is_three_for_gaussian() {
        // |d_x G| = |x|/t_eff G; on the local box |x| <= 3 sqrt(t) the
        // smallest C with |d_x G| <= C t^{-1/2} G is 3 up to the mollifier
        // correction, uniformly in t.
        let path = brownian_dirac_path(1600, 1.0, 1e-4);
        let family = EnvelopeFamily::Gaussian { sigma_range: (1.0, 1.0) };
        let window = EnvelopeWindow::new(0.1, 1.0, 8.0).unwrap();
        let report = check_derivative_bound(&path, &family, &window, None).unwrap();
        assert_abs_diff_eq!(report.exponent, 0.5, epsilon = 0.0);
        assert!((report.c - 3.0).abs() <= 0.15, "C = {}", report.c);
        // Slices a factor 4 apart in time agree within 10%.
        let c_at = |target: f64| {
            report
                .per_slice
                .iter()
                .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
                .unwrap()
                .1
        };
        let (c_early, c_late) = (c_at(0.2), c_at(0.8));
        assert!(
            (c_early - c_late).abs() <= 0.1 * c_late.max(c_early),
            "C(0.2) = {c_early}, C(0.8) = {c_late}"
        );
    }

    #[test]
    fn derivative_bound_with_zero_exponent_shows_growth() {
        // Negative control: dropping the t^{-1/2} weight makes the slice
        // constants grow like t^{-1/2} toward small times.
        let path = brownian_dirac_path(1600, 1.0, 1e-4);
        let family = EnvelopeFamily::Gaussian { sigma_range: (1.0, 1.0) };
        let window = EnvelopeWindow::new(0.1, 1.0, 8.0).unwrap();
        let report = check_derivative_bound(&path, &family, &window, Some(0.0)).unwrap();
        let first = report.per_slice.first().unwrap().1;
        let last = report.per_slice.last().unwrap().1;
        assert!(
            first >= 2.0 * last,
            "no growth: C({:.2}) = {first}, C(1) = {last}",
            report.per_slice.first().unwrap().0
        );
        assert!(report.c >= 6.0);
    }

    #[test]
    fn localization_certificate_matches_the_gaussian_example() {
        // u0 = N(0, 0.5) spread to N(0, 1.5) by t = 1; epsilon = 1e-3 wants
        // K near z_{0.9995} sqrt(1.5) ~ 4.
        let grid = Grid::new(-10.0, 10.0, 1000).unwrap();
        let field = ModelSpec::Brownian { sigma: 1.0 }.build((-10.0, 10.0), (-2.0, 2.0)).unwrap();
        let solver = LinearSolver::new(field);
        let u0 = Density::gaussian(grid, 0.0, 0.5f64.sqrt()).unwrap();
        let curve = crate::linfp::QuantileCurve::constant(0.0).unwrap();
        let path = solver.solve(&u0, &curve, TimeWindow::to(1.0, 4e-4).unwrap()).unwrap();
        let levels = QuantileLevels::single(0.5).unwrap();
        let cert = localization_certificate(&[&path], &levels, 1e-3).unwrap();
        assert!((3.6..=4.4).contains(&cert.k_box), "K = {}", cert.k_box);
        assert!(cert.delta > 0.0);
        // Monotonicity: a looser tail budget never enlarges the box.
        let looser = localization_certificate(&[&path], &levels, 1e-2).unwrap();
        assert!(looser.k_box <= cert.k_box);
        // All nodes satisfy the certificate clauses.
        for i in 0..path.len() {
            cert.check(path.node(i), &levels).unwrap();
        }
    }

    #[test]
    fn localization_certificate_shared_across_a_drift_family() {
        let grid = Grid::new(-10.0, 10.0, 1000).unwrap();
        let curve = crate::linfp::QuantileCurve::constant(0.0).unwrap();
        let window = TimeWindow::to(0.5, 4e-4).unwrap();
        let levels = QuantileLevels::single(0.5).unwrap();
        let mut paths = Vec::new();
        for drift in [-1.0, 0.0, 1.0] {
            let field = ModelSpec::ConstantDrift { drift, sigma: 1.0 }
                .build((-10.0, 10.0), (-2.0, 2.0))
                .unwrap();
            let u0 = Density::gaussian(grid.clone(), 0.0, 0.5f64.sqrt()).unwrap();
            paths.push(LinearSolver::new(field).solve(&u0, &curve, window).unwrap());
        }
        let refs: Vec<&DensityPath> = paths.iter().collect();
        let cert = localization_certificate(&refs, &levels, 1e-3).unwrap();
        assert!(cert.k_box < 5.0, "K = {}", cert.k_box);
        for path in &paths {
            for i in 0..path.len() {
                cert.check(path.node(i), &levels).unwrap();
            }
        }
    }

    #[test]
    fn localization_certificate_preconditions_and_capacity() {
        let grid = Grid::new(-6.0, 6.0, 600).unwrap();
        let field = ModelSpec::Brownian { sigma: 1.0 }.build((-6.0, 6.0), (-2.0, 2.0)).unwrap();
        let solver = LinearSolver::new(field);
        let u0 = Density::gaussian(grid, 0.0, 2.0).unwrap();
        let curve = crate::linfp::QuantileCurve::constant(0.0).unwrap();
        let path = solver.solve(&u0, &curve, TimeWindow::to(0.1, 4e-4).unwrap()).unwrap();
        let levels = QuantileLevels::single(0.5).unwrap();
        // epsilon at or above the level margin is a precondition error.
        assert!(matches!(
            localization_certificate(&[&path], &levels, 0.6),
            Err(KernelsError::InvalidParameter { .. })
        ));
        // A wide law on a narrow grid cannot host the doubled box.
        assert!(matches!(
            localization_certificate(&[&path], &levels, 1e-3),
            Err(KernelsError::CertificateUnobtainable { .. })
        ));
    }

    #[test]
    fn dirac_localization_slope_is_half_for_brownian() {
        let path = brownian_dirac_path(1600, 1.0, 1e-4);
        // Phi(1) level: the quantile sits one standard deviation out, so the
        // gap is sqrt(t + tau) and K fits just above 1.
        let report = dirac_localization_check(&path, 0.8413447460685429, 0.5, 0.0).unwrap();
        let slope = report.slope.expect("gaps resolve at this level");
        assert_abs_diff_eq!(slope, 0.5, epsilon = 0.05);
        assert!((0.9..=1.1).contains(&report.k_fit), "K = {}", report.k_fit);
    }

    #[test]
    fn dirac_localization_median_never_leaves_a_cell() {
        let path = brownian_dirac_path(1600, 1.0, 1e-4);
        let report = dirac_localization_check(&path, 0.5, 0.5, 0.0).unwrap();
        let dx = 16.0 / 1600.0;
        assert!(report.points.iter().all(|&(_, gap)| gap <= dx));
        assert!(report.slope.is_none());
    }
}
