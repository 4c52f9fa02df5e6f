//! Coefficient fields `b(t, x, omega)`, `sigma(t, x, omega)` and their
//! declared regularity constants.
//!
//! A [`CoefficientField`] carries the drift and diffusion callables together
//! with the constants the solvers and estimates rely on:
//!
//! * `m`  - two-sided ellipticity: `1/m <= sigma^2 <= m`;
//! * `cap_m` - size bound `M` on `|b|` and on `|d(sigma^2)/dx|`;
//! * `kappa` - Lipschitz constant of `b` (and `sigma`, when it couples) in
//!   the quantile argument `omega`.
//!
//! Declared constants are *claims*; [`ellipticity_check`] and
//! [`lipschitz_check`] verify them on a sampled lattice and report the
//! tightest observed constants alongside any violations. Fields whose drift
//! is unbounded in `x` (e.g. Ornstein-Uhlenbeck) are admitted with `M` taken
//! as the supremum over the scenario box; such fields carry
//! `bounds_from_box = true` so reports can flag the convention.
//!
//! The stable-like variant replaces `sigma` by a spectral coefficient
//! `a(x)`; see [`StableModel`].

use crate::defaults;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Errors from coefficient-field construction and checks.
#[derive(Debug, Error)]
pub enum CoeffsError {
    /// A declared constant is not admissible.
    #[error("inadmissible constant: {reason}")]
    BadConstant {
        /// What is wrong.
        reason: String,
    },
    /// Stability index outside the supported range.
    #[error("stability index alpha_s = {alpha_s} outside (1, 2]")]
    AlphaOutOfRange {
        /// Requested index.
        alpha_s: f64,
    },
    /// A coefficient table has inconsistent shape.
    #[error("coefficient table malformed: {reason}")]
    TableShape {
        /// What is wrong.
        reason: String,
    },
    /// A sampling specification is degenerate.
    #[error("sample spec malformed: {reason}")]
    BadSampleSpec {
        /// What is wrong.
        reason: String,
    },
}

type ScalarField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Drift/diffusion pair with declared constants.
#[derive(Clone)]
pub struct CoefficientField {
    drift: ScalarField,
    sigma: ScalarField,
    /// Two-sided ellipticity constant `m`: `1/m <= sigma^2 <= m`.
    pub m: f64,
    /// Size bound `M` on `|b|` and `|d(sigma^2)/dx|`.
    pub cap_m: f64,
    /// Lipschitz constant of the coefficients in `omega`.
    pub kappa: f64,
    /// Whether `sigma` genuinely depends on `omega`.
    pub sigma_depends_on_omega: bool,
    /// Whether `M` was computed as a supremum over a scenario box.
    pub bounds_from_box: bool,
    /// Catalog name or description.
    pub name: String,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("cap_m", &self.cap_m)
            .field("kappa", &self.kappa)
            .field("sigma_depends_on_omega", &self.sigma_depends_on_omega)
            .field("bounds_from_box", &self.bounds_from_box)
            .finish()
    }
}

impl CoefficientField {
    /// Assemble a field from callables and declared constants.
    pub fn new(
        name: impl Into<String>,
        drift: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        m: f64,
        cap_m: f64,
        kappa: f64,
        sigma_depends_on_omega: bool,
    ) -> Result<Self, CoeffsError> {
        if !(m.is_finite() && m >= 1.0) {
            return Err(CoeffsError::BadConstant {
                reason: format!("ellipticity constant m must be >= 1, got {m}"),
            });
        }
        if !(cap_m.is_finite() && cap_m >= 0.0) {
            return Err(CoeffsError::BadConstant {
                reason: format!("size bound M must be nonnegative, got {cap_m}"),
            });
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(CoeffsError::BadConstant {
                reason: format!("Lipschitz constant kappa must be nonnegative, got {kappa}"),
            });
        }
        Ok(Self {
            drift: Arc::new(drift),
            sigma: Arc::new(sigma),
            m,
            cap_m,
            kappa,
            sigma_depends_on_omega,
            bounds_from_box: false,
            name: name.into(),
        })
    }

    /// Drift `b(t, x, omega)`.
    #[must_use]
    pub fn drift(&self, t: f64, x: f64, omega: f64) -> f64 {
        (self.drift)(t, x, omega)
    }

    /// Diffusion coefficient `sigma(t, x, omega)` (not squared).
    #[must_use]
    pub fn sigma(&self, t: f64, x: f64, omega: f64) -> f64 {
        (self.sigma)(t, x, omega)
    }

    /// Squared diffusion `a = sigma^2`.
    #[must_use]
    pub fn a(&self, t: f64, x: f64, omega: f64) -> f64 {
        let s = self.sigma(t, x, omega);
        s * s
    }

    fn with_bounds_from_box(mut self) -> Self {
        self.bounds_from_box = true;
        self
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

/// A sampled lattice over `(t, x, omega)` on which checks are evaluated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSpec {
    /// Time range.
    pub t_range: (f64, f64),
    /// Space range (the scenario box).
    pub x_range: (f64, f64),
    /// Quantile range.
    pub omega_range: (f64, f64),
    /// Points per axis.
    pub points_per_axis: usize,
}

impl SampleSpec {
    /// A spec with the default [`defaults::SAMPLE_POINTS_PER_AXIS`] points per
    /// axis.
    pub fn new(
        t_range: (f64, f64),
        x_range: (f64, f64),
        omega_range: (f64, f64),
    ) -> Result<Self, CoeffsError> {
        Self::with_points(t_range, x_range, omega_range, defaults::SAMPLE_POINTS_PER_AXIS)
    }

    /// A spec with an explicit number of points per axis.
    pub fn with_points(
        t_range: (f64, f64),
        x_range: (f64, f64),
        omega_range: (f64, f64),
        points_per_axis: usize,
    ) -> Result<Self, CoeffsError> {
        for (name, (lo, hi)) in [("t", t_range), ("x", x_range), ("omega", omega_range)] {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(CoeffsError::BadSampleSpec {
                    reason: format!("{name} range [{lo}, {hi}] is not a finite interval"),
                });
            }
        }
        if points_per_axis == 0 {
            return Err(CoeffsError::BadSampleSpec {
                reason: "points_per_axis must be positive".into(),
            });
        }
        Ok(Self { t_range, x_range, omega_range, points_per_axis })
    }

    /// The probe lattice.
    #[must_use]
    pub fn probes(&self) -> Vec<(f64, f64, f64)> {
        let ts = linspace(self.t_range.0, self.t_range.1, self.points_per_axis);
        let xs = linspace(self.x_range.0, self.x_range.1, self.points_per_axis);
        let ws = linspace(self.omega_range.0, self.omega_range.1, self.points_per_axis);
        let mut probes = Vec::with_capacity(ts.len() * xs.len() * ws.len());
        for &t in &ts {
            for &x in &xs {
                for &w in &ws {
                    probes.push((t, x, w));
                }
            }
        }
        probes
    }
}

/// One probe at which a declared constant failed.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeViolation {
    /// Probe time.
    pub t: f64,
    /// Probe position.
    pub x: f64,
    /// Probe quantile (for pair checks, the first of the pair).
    pub omega: f64,
    /// Observed value that broke the declared constant.
    pub observed: f64,
}

/// Result of an ellipticity sweep.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    /// Declared `m`.
    pub m_declared: f64,
    /// Tightest constant consistent with the probes:
    /// `max(sup sigma^2, 1 / inf sigma^2)`.
    pub m_observed: f64,
    /// Number of probes evaluated.
    pub checked_points: usize,
    /// Probes violating the declared two-sided bound.
    pub violations: Vec<ProbeViolation>,
    /// Whether `M` came from a box supremum.
    pub bounds_from_box: bool,
}

/// Relative slack for comparing observed against declared constants, so exact
/// equality (sigma identically 1 with m = 1) does not trip.
const CHECK_SLACK: f64 = 1e-9;

/// Verify `1/m <= sigma(t,x,omega)^2 <= m` on the sampled lattice.
pub fn ellipticity_check(field: &CoefficientField, spec: &SampleSpec) -> EllipticityReport {
    let probes = spec.probes();
    let mut m_observed = 1.0f64;
    let mut violations = Vec::new();
    for &(t, x, w) in &probes {
        let a = field.a(t, x, w);
        m_observed = m_observed.max(a).max(1.0 / a);
        if a > field.m * (1.0 + CHECK_SLACK) || a < (1.0 / field.m) * (1.0 - CHECK_SLACK) {
            violations.push(ProbeViolation { t, x, omega: w, observed: a });
        }
    }
    EllipticityReport {
        m_declared: field.m,
        m_observed,
        checked_points: probes.len(),
        violations,
        bounds_from_box: field.bounds_from_box,
    }
}

/// Result of a Lipschitz sweep in the `omega` argument.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    /// Declared `kappa`.
    pub kappa_declared: f64,
    /// Largest difference quotient observed.
    pub kappa_observed: f64,
    /// Number of `(t, x, omega_1, omega_2)` pairs evaluated.
    pub checked_pairs: usize,
    /// Pairs violating the declared constant (probe records the first omega,
    /// `observed` is the difference quotient).
    pub violations: Vec<ProbeViolation>,
    /// Probes where `sigma` varied with `omega` despite
    /// `sigma_depends_on_omega = false`.
    pub sigma_invariance_violations: Vec<ProbeViolation>,
}

/// Verify `|b(t,x,w1) - b(t,x,w2)| <= kappa |w1 - w2|` (and the same for
/// `sigma` when it couples to `omega`) over all probe pairs. When the field
/// declares `sigma_depends_on_omega = false`, also verify that `sigma` is
/// invariant in `omega` at the probes.
pub fn lipschitz_check(field: &CoefficientField, spec: &SampleSpec) -> LipschitzReport {
    let ts = linspace(spec.t_range.0, spec.t_range.1, spec.points_per_axis);
    let xs = linspace(spec.x_range.0, spec.x_range.1, spec.points_per_axis);
    let ws = linspace(spec.omega_range.0, spec.omega_range.1, spec.points_per_axis);
    let mut kappa_observed = 0.0f64;
    let mut checked_pairs = 0usize;
    let mut violations = Vec::new();
    let mut sigma_invariance_violations = Vec::new();
    for &t in &ts {
        for &x in &xs {
            for (i, &w1) in ws.iter().enumerate() {
                for &w2 in ws.iter().skip(i + 1) {
                    if w2 == w1 {
                        continue;
                    }
                    checked_pairs += 1;
                    let gap = (w2 - w1).abs();
                    let mut quotient = (field.drift(t, x, w2) - field.drift(t, x, w1)).abs() / gap;
                    let sigma_gap = (field.sigma(t, x, w2) - field.sigma(t, x, w1)).abs();
                    if field.sigma_depends_on_omega {
                        quotient = quotient.max(sigma_gap / gap);
                    } else if sigma_gap > 0.0 {
                        sigma_invariance_violations.push(ProbeViolation {
                            t,
                            x,
                            omega: w1,
                            observed: sigma_gap,
                        });
                    }
                    kappa_observed = kappa_observed.max(quotient);
                    if quotient > field.kappa * (1.0 + CHECK_SLACK) {
                        violations.push(ProbeViolation { t, x, omega: w1, observed: quotient });
                    }
                }
            }
        }
    }
    LipschitzReport {
        kappa_declared: field.kappa,
        kappa_observed,
        checked_pairs,
        violations,
        sigma_invariance_violations,
    }
}

/// A coefficient sampled on a `(t, x, omega)` lattice, evaluated by
/// multilinear interpolation (clamped outside the lattice).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientTable {
    /// Lattice times (sorted, nonempty).
    pub t_nodes: Vec<f64>,
    /// Lattice positions (sorted, nonempty).
    pub x_nodes: Vec<f64>,
    /// Lattice quantiles (sorted, nonempty).
    pub omega_nodes: Vec<f64>,
    /// Values in `t`-major, then `x`, then `omega` order:
    /// `values[(it * nx + ix) * nw + iw]`.
    pub values: Vec<f64>,
}

impl CoefficientTable {
    /// Validate shape and monotone axes.
    pub fn validate(&self) -> Result<(), CoeffsError> {
        for (name, nodes) in
            [("t", &self.t_nodes), ("x", &self.x_nodes), ("omega", &self.omega_nodes)]
        {
            if nodes.is_empty() {
                return Err(CoeffsError::TableShape { reason: format!("{name} axis is empty") });
            }
            if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(CoeffsError::TableShape {
                    reason: format!("{name} axis is not strictly increasing"),
                });
            }
        }
        let expect = self.t_nodes.len() * self.x_nodes.len() * self.omega_nodes.len();
        if self.values.len() != expect {
            return Err(CoeffsError::TableShape {
                reason: format!("expected {expect} values, got {}", self.values.len()),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(CoeffsError::TableShape { reason: "non-finite table value".into() });
        }
        Ok(())
    }

    fn bracket(nodes: &[f64], v: f64) -> (usize, f64) {
        // Clamped bracketing: returns lower index and interpolation weight.
        if nodes.len() == 1 || v <= nodes[0] {
            return (0, 0.0);
        }
        let last = nodes.len() - 1;
        if v >= nodes[last] {
            return (last - 1, 1.0);
        }
        let mut lo = 0;
        let mut hi = last;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if nodes[mid] <= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (v - nodes[lo]) / (nodes[lo + 1] - nodes[lo]);
        (lo, w)
    }

    /// Multilinear interpolation at `(t, x, omega)`.
    #[must_use]
    pub fn eval(&self, t: f64, x: f64, omega: f64) -> f64 {
        let nx = self.x_nodes.len();
        let nw = self.omega_nodes.len();
        let (it, wt) = Self::bracket(&self.t_nodes, t);
        let (ix, wx) = Self::bracket(&self.x_nodes, x);
        let (iw, ww) = Self::bracket(&self.omega_nodes, omega);
        let at = |it: usize, ix: usize, iw: usize| self.values[(it * nx + ix) * nw + iw];
        let it1 = (it + 1).min(self.t_nodes.len() - 1);
        let ix1 = (ix + 1).min(nx - 1);
        let iw1 = (iw + 1).min(nw - 1);
        let mut acc = 0.0;
        for (jt, ft) in [(it, 1.0 - wt), (it1, wt)] {
            if ft == 0.0 {
                continue;
            }
            for (jx, fx) in [(ix, 1.0 - wx), (ix1, wx)] {
                if fx == 0.0 {
                    continue;
                }
                for (jw, fw) in [(iw, 1.0 - ww), (iw1, ww)] {
                    if fw == 0.0 {
                        continue;
                    }
                    acc += ft * fx * fw * at(jt, jx, jw);
                }
            }
        }
        acc
    }

    fn range(&self) -> (f64, f64) {
        let lo = self.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = self.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        (lo, hi)
    }
}

/// Build a [`CoefficientField`] from drift and sigma tables. Constants are
/// derived from the table ranges (multilinear interpolation cannot exceed
/// them); the `omega`-Lipschitz constant is measured from adjacent lattice
/// slices.
pub fn field_from_tables(
    name: impl Into<String>,
    drift: CoefficientTable,
    sigma: CoefficientTable,
) -> Result<CoefficientField, CoeffsError> {
    drift.validate()?;
    sigma.validate()?;
    let (s_lo, s_hi) = sigma.range();
    if s_lo <= 0.0 {
        return Err(CoeffsError::BadConstant {
            reason: format!("sigma table must be strictly positive, min is {s_lo}"),
        });
    }
    let m = (s_hi * s_hi).max(1.0 / (s_lo * s_lo)).max(1.0);
    let (b_lo, b_hi) = drift.range();
    // |d(sigma^2)/dx| bounded by lattice slopes of the squared values.
    let mut da_max = 0.0f64;
    let nx = sigma.x_nodes.len();
    let nw = sigma.omega_nodes.len();
    for it in 0..sigma.t_nodes.len() {
        for iw in 0..nw {
            for ix in 0..nx.saturating_sub(1) {
                let s0 = sigma.values[(it * nx + ix) * nw + iw];
                let s1 = sigma.values[(it * nx + ix + 1) * nw + iw];
                let dx = sigma.x_nodes[ix + 1] - sigma.x_nodes[ix];
                da_max = da_max.max(((s1 * s1 - s0 * s0) / dx).abs());
            }
        }
    }
    let cap_m = b_lo.abs().max(b_hi.abs()).max(da_max);
    // omega-Lipschitz from lattice difference quotients of both tables.
    let mut kappa = 0.0f64;
    let mut sigma_depends = false;
    for table in [&drift, &sigma] {
        let nx = table.x_nodes.len();
        let nw = table.omega_nodes.len();
        for it in 0..table.t_nodes.len() {
            for ix in 0..nx {
                for iw in 0..nw.saturating_sub(1) {
                    let v0 = table.values[(it * nx + ix) * nw + iw];
                    let v1 = table.values[(it * nx + ix) * nw + iw + 1];
                    let dw = table.omega_nodes[iw + 1] - table.omega_nodes[iw];
                    let q = ((v1 - v0) / dw).abs();
                    kappa = kappa.max(q);
                    if std::ptr::eq(table, &sigma) && v1 != v0 {
                        sigma_depends = true;
                    }
                }
            }
        }
    }
    let drift = Arc::new(drift);
    let sigma = Arc::new(sigma);
    CoefficientField::new(
        name,
        {
            let drift = Arc::clone(&drift);
            move |t, x, w| drift.eval(t, x, w)
        },
        {
            let sigma = Arc::clone(&sigma);
            move |t, x, w| sigma.eval(t, x, w)
        },
        m,
        cap_m,
        kappa,
        sigma_depends,
    )
    .map(CoefficientField::with_bounds_from_box)
}

fn default_one() -> f64 {
    1.0
}

fn default_half() -> f64 {
    0.5
}

fn default_fifth() -> f64 {
    0.2
}

fn default_two() -> f64 {
    2.0
}

/// Serializable catalog of named coefficient models.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// `b = 0`, constant `sigma`.
    Brownian {
        /// Diffusion coefficient.
        #[serde(default = "default_one")]
        sigma: f64,
    },
    /// Constant drift and diffusion.
    ConstantDrift {
        /// Drift value.
        drift: f64,
        /// Diffusion coefficient.
        #[serde(default = "default_one")]
        sigma: f64,
    },
    /// `b = -rate (x - omega)`, constant `sigma`: the quantile-attracting
    /// Ornstein-Uhlenbeck model.
    MedianAttractingOu {
        /// Attraction rate.
        #[serde(default = "default_one")]
        rate: f64,
        /// Diffusion coefficient.
        #[serde(default = "default_one")]
        sigma: f64,
    },
    /// `b = -x`, `sigma = sqrt(2)`: stationary law is the standard normal.
    OrnsteinUhlenbeck,
    /// `b = 0`, `sigma^2(x) = base + amplitude sin x`.
    SineDiffusion {
        /// Mean of `sigma^2`.
        #[serde(default = "default_one")]
        base: f64,
        /// Amplitude of the modulation; must stay below `base`.
        #[serde(default = "default_half")]
        amplitude: f64,
    },
    /// `b = -rate (x - omega)` with `sigma(omega) = 1 + coupling tanh(omega)`:
    /// diffusion genuinely couples to the quantile.
    MedianCoupledSigma {
        /// Attraction rate.
        #[serde(default = "default_one")]
        rate: f64,
        /// Size of the `tanh` coupling; must stay below 1.
        #[serde(default = "default_fifth")]
        coupling: f64,
    },
    /// Space-free drift `b = tanh(gain * omega)`, constant `sigma`.
    TanhDrift {
        /// Gain inside the tanh; equals the omega-Lipschitz constant.
        #[serde(default = "default_two")]
        gain: f64,
        /// Diffusion coefficient.
        #[serde(default = "default_one")]
        sigma: f64,
    },
}

impl ModelSpec {
    /// Instantiate the model. `x_box` and `omega_box` bound the scenario and
    /// are used to compute the size bound `M` for drifts unbounded in `x`.
    pub fn build(
        &self,
        x_box: (f64, f64),
        omega_box: (f64, f64),
    ) -> Result<CoefficientField, CoeffsError> {
        let sup = |(lo, hi): (f64, f64)| lo.abs().max(hi.abs());
        match *self {
            ModelSpec::Brownian { sigma } => {
                check_sigma(sigma)?;
                CoefficientField::new(
                    "brownian",
                    |_, _, _| 0.0,
                    move |_, _, _| sigma,
                    (sigma * sigma).max(1.0 / (sigma * sigma)),
                    0.0,
                    0.0,
                    false,
                )
            }
            ModelSpec::ConstantDrift { drift, sigma } => {
                check_sigma(sigma)?;
                CoefficientField::new(
                    "constant-drift",
                    move |_, _, _| drift,
                    move |_, _, _| sigma,
                    (sigma * sigma).max(1.0 / (sigma * sigma)),
                    drift.abs(),
                    0.0,
                    false,
                )
            }
            ModelSpec::MedianAttractingOu { rate, sigma } => {
                check_sigma(sigma)?;
                check_positive("rate", rate)?;
                let cap_m = rate * (sup(x_box) + sup(omega_box));
                CoefficientField::new(
                    "median-attracting-ou",
                    move |_, x, w| -rate * (x - w),
                    move |_, _, _| sigma,
                    (sigma * sigma).max(1.0 / (sigma * sigma)),
                    cap_m,
                    rate,
                    false,
                )
                .map(CoefficientField::with_bounds_from_box)
            }
            ModelSpec::OrnsteinUhlenbeck => CoefficientField::new(
                "ornstein-uhlenbeck",
                |_, x, _| -x,
                |_, _, _| std::f64::consts::SQRT_2,
                2.0,
                sup(x_box),
                0.0,
                false,
            )
            .map(CoefficientField::with_bounds_from_box),
            ModelSpec::SineDiffusion { base, amplitude } => {
                if !(amplitude >= 0.0 && amplitude < base) {
                    return Err(CoeffsError::BadConstant {
                        reason: format!(
                            "sine diffusion needs 0 <= amplitude < base, got base {base}, amplitude {amplitude}"
                        ),
                    });
                }
                let a_hi = base + amplitude;
                let a_lo = base - amplitude;
                CoefficientField::new(
                    "sine-diffusion",
                    |_, _, _| 0.0,
                    move |_, x, _| (base + amplitude * x.sin()).sqrt(),
                    a_hi.max(1.0 / a_lo),
                    amplitude,
                    0.0,
                    false,
                )
            }
            ModelSpec::MedianCoupledSigma { rate, coupling } => {
                check_positive("rate", rate)?;
                if !(coupling >= 0.0 && coupling < 1.0) {
                    return Err(CoeffsError::BadConstant {
                        reason: format!("coupling must lie in [0, 1), got {coupling}"),
                    });
                }
                let cap_m = rate * (sup(x_box) + sup(omega_box));
                let s_lo = 1.0 - coupling;
                let s_hi = 1.0 + coupling;
                CoefficientField::new(
                    "median-coupled-sigma",
                    move |_, x, w| -rate * (x - w),
                    move |_, _, w| 1.0 + coupling * w.tanh(),
                    (s_hi * s_hi).max(1.0 / (s_lo * s_lo)),
                    cap_m,
                    rate.max(coupling),
                    coupling > 0.0,
                )
                .map(CoefficientField::with_bounds_from_box)
            }
            ModelSpec::TanhDrift { gain, sigma } => {
                check_sigma(sigma)?;
                check_positive("gain", gain)?;
                CoefficientField::new(
                    "tanh-drift",
                    move |_, _, w| (gain * w).tanh(),
                    move |_, _, _| sigma,
                    (sigma * sigma).max(1.0 / (sigma * sigma)),
                    1.0,
                    gain,
                    false,
                )
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<(), CoeffsError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(CoeffsError::BadConstant {
            reason: format!("sigma must be positive, got {sigma}"),
        });
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), CoeffsError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(CoeffsError::BadConstant {
            reason: format!("{name} must be positive, got {v}"),
        });
    }
    Ok(())
}

type PositionField = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficients of the stable-like generator
/// `L = (b, grad) - a(x) |Delta|^{alpha_s/2}`.
#[derive(Clone)]
pub struct StableModel {
    /// Stability index in `(1, 2]`; the value 2 is admitted for
    /// cross-validation against the diffusion solver only.
    pub alpha_s: f64,
    a: PositionField,
    /// Two-sided bounds of the spectral coefficient `a`.
    pub a_bounds: (f64, f64),
    drift: ScalarField,
    /// omega-Lipschitz constant of the drift.
    pub kappa: f64,
    /// Size bound on `|b|` (box supremum where applicable).
    pub drift_bound: f64,
    /// Catalog name or description.
    pub name: String,
}

impl fmt::Debug for StableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StableModel")
            .field("name", &self.name)
            .field("alpha_s", &self.alpha_s)
            .field("a_bounds", &self.a_bounds)
            .field("kappa", &self.kappa)
            .field("drift_bound", &self.drift_bound)
            .finish()
    }
}

impl StableModel {
    /// Assemble a stable model; validates `alpha_s` in `(1, 2]` and positive
    /// coefficient bounds.
    pub fn new(
        name: impl Into<String>,
        alpha_s: f64,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_bounds: (f64, f64),
        drift: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        kappa: f64,
        drift_bound: f64,
    ) -> Result<Self, CoeffsError> {
        if !(alpha_s > 1.0 && alpha_s <= 2.0) {
            return Err(CoeffsError::AlphaOutOfRange { alpha_s });
        }
        if !(a_bounds.0 > 0.0 && a_bounds.1 >= a_bounds.0 && a_bounds.1.is_finite()) {
            return Err(CoeffsError::BadConstant {
                reason: format!("spectral coefficient bounds {a_bounds:?} inadmissible"),
            });
        }
        Ok(Self {
            alpha_s,
            a: Arc::new(a),
            a_bounds,
            drift: Arc::new(drift),
            kappa,
            drift_bound,
            name: name.into(),
        })
    }

    /// Spectral coefficient `a(x)`.
    #[must_use]
    pub fn a(&self, x: f64) -> f64 {
        (self.a)(x)
    }

    /// Drift `b(t, x, omega)`.
    #[must_use]
    pub fn drift(&self, t: f64, x: f64, omega: f64) -> f64 {
        (self.drift)(t, x, omega)
    }

    /// Driftless model with constant coefficient `a`.
    pub fn constant(alpha_s: f64, a: f64) -> Result<Self, CoeffsError> {
        check_positive("a", a)?;
        Self::new("stable-constant", alpha_s, move |_| a, (a, a), |_, _, _| 0.0, 0.0, 0.0)
    }

    /// Quantile-attracting drift `b = -rate (x - omega)` with constant `a`.
    pub fn median_attracting(
        alpha_s: f64,
        a: f64,
        rate: f64,
        x_box: (f64, f64),
        omega_box: (f64, f64),
    ) -> Result<Self, CoeffsError> {
        check_positive("a", a)?;
        check_positive("rate", rate)?;
        let sup = |(lo, hi): (f64, f64)| f64::max(lo.abs(), hi.abs());
        let bound = rate * (sup(x_box) + sup(omega_box));
        Self::new(
            "stable-median-attracting",
            alpha_s,
            move |_| a,
            (a, a),
            move |_, x, w| -rate * (x - w),
            rate,
            bound,
        )
    }
}
