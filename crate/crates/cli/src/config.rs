//! Scenario configuration: one TOML document per run.
//!
//! The schema is deliberately small and fully validated up front. Every
//! default applied here is echoed (with the rest of the parsed config)
//! into the run manifest, so each number in a report traces back to an
//! explicit config value or a documented default. Unknown keys are
//! rejected rather than ignored: a typo must fail loudly, not silently
//! fall back to a default.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use quantfp::coeffs::{CoefficientField, ModelSpec, StableModel};
use quantfp::defaults;
use quantfp::linfp::TimeWindow;
use quantfp::nonlinear::PicardOptions;
use quantfp::verify;
use quantfp::Grid;

/// Errors raised while loading or validating a config. These map to exit
/// code 2: the run never started.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The config file could not be read.
    #[error("cannot read config `{path}`: {source}")]
    Read {
        /// Offending path.
        path: PathBuf,
        /// Underlying I/O error.
        source: std::io::Error,
    },
    /// The file is not valid TOML for the published schema.
    #[error("cannot parse config `{path}`: {message}")]
    Parse {
        /// Offending path.
        path: PathBuf,
        /// Parser message (includes the offending key or span).
        message: String,
    },
    /// A field parsed but is out of range or inconsistent.
    #[error("invalid config field `{field}`: {reason}")]
    Invalid {
        /// Dotted path of the offending field.
        field: String,
        /// What was wrong with it.
        reason: String,
    },
    /// A section required by the invoked scenario is missing.
    #[error("missing config section `[{section}]`, required by `{scenario}` runs")]
    MissingSection {
        /// The absent table.
        section: String,
        /// The scenario that needs it.
        scenario: ScenarioKind,
    },
    /// The config names a different scenario than the invoked subcommand.
    #[error("config declares scenario `{declared}` but the invoked command runs `{invoked}`")]
    ScenarioMismatch {
        /// Kind written in the file.
        declared: ScenarioKind,
        /// Kind implied by the subcommand.
        invoked: ScenarioKind,
    },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

/// Scenario kinds, one per runner subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Linear solve under a frozen feedback value.
    Linfp,
    /// Nonlinear quantile-coupled fixed point.
    Nonlinear,
    /// Stable-driven (fractional) scenario.
    Stable,
    /// Interacting-particle Monte Carlo.
    Particles,
    /// The verification gate suite.
    Verify,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ScenarioKind::Linfp => "linfp",
            ScenarioKind::Nonlinear => "nonlinear",
            ScenarioKind::Stable => "stable",
            ScenarioKind::Particles => "particles",
            ScenarioKind::Verify => "verify",
        };
        f.write_str(name)
    }
}

/// Spatial grid section.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Left box end.
    pub x_min: f64,
    /// Right box end.
    pub x_max: f64,
    /// Cell count.
    pub n: usize,
}

impl GridConfig {
    /// Build the grid, mapping construction errors onto the field path.
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.x_min, self.x_max, self.n).map_err(|e| invalid("grid", e.to_string()))
    }
}

/// Time horizon section.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Horizon end.
    pub t_end: f64,
    /// Target step (the solvers use the nearest step dividing the horizon).
    pub dt: f64,
}

impl TimeConfig {
    /// Build the `[0, t_end]` window.
    pub fn window(&self) -> Result<TimeWindow, ConfigError> {
        TimeWindow::to(self.t_end, self.dt).map_err(|e| invalid("time", e.to_string()))
    }
}

/// Catalog model section. The diffusive kinds drive the linear, nonlinear,
/// and particle runners; the `stable-*` kinds drive the stable runner.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Pure diffusion, `b = 0`.
    Brownian {
        /// Diffusion coefficient.
        sigma: f64,
    },
    /// Constant drift and diffusion.
    ConstantDrift {
        /// Drift value.
        drift: f64,
        /// Diffusion coefficient.
        sigma: f64,
    },
    /// Quantile-attracting Ornstein-Uhlenbeck drift `b = -rate (x - omega)`.
    MedianAttractingOu {
        /// Attraction rate.
        rate: f64,
        /// Diffusion coefficient.
        sigma: f64,
    },
    /// Variable diffusion `sigma^2(x) = base + amplitude sin x`, `b = 0`.
    SineDiffusion {
        /// Constant part of `sigma^2`.
        base: f64,
        /// Oscillation amplitude of `sigma^2`.
        amplitude: f64,
    },
    /// Attracting drift with quantile-dependent diffusion
    /// `sigma(omega) = 1 + coupling * tanh(omega)`.
    MedianCoupledSigma {
        /// Attraction rate.
        rate: f64,
        /// Diffusion coupling strength.
        coupling: f64,
    },
    /// Space-free drift `b = tanh(gain * omega)`, constant diffusion.
    TanhDrift {
        /// Gain inside the tanh.
        gain: f64,
        /// Diffusion coefficient.
        sigma: f64,
    },
    /// Stable-driven, constant intensity `a`, no drift.
    StableConstant {
        /// Stable index in `(1, 2]`.
        alpha_s: f64,
        /// Fractional-operator intensity.
        a: f64,
    },
    /// Stable-driven with quantile-attracting drift `b = -rate (x - omega)`.
    StableMedianAttracting {
        /// Stable index in `(1, 2]`.
        alpha_s: f64,
        /// Fractional-operator intensity.
        a: f64,
        /// Attraction rate.
        rate: f64,
    },
}

impl ModelConfig {
    /// Whether this is a stable-driven model.
    pub fn is_stable(&self) -> bool {
        matches!(
            self,
            ModelConfig::StableConstant { .. } | ModelConfig::StableMedianAttracting { .. }
        )
    }

    /// Build the diffusive coefficient field (sampling constants over the
    /// given boxes). Fails on stable kinds.
    pub fn build_field(
        &self,
        x_box: (f64, f64),
        omega_box: (f64, f64),
    ) -> Result<CoefficientField, ConfigError> {
        let spec = match *self {
            ModelConfig::Brownian { sigma } => ModelSpec::Brownian { sigma },
            ModelConfig::ConstantDrift { drift, sigma } => {
                ModelSpec::ConstantDrift { drift, sigma }
            }
            ModelConfig::MedianAttractingOu { rate, sigma } => {
                ModelSpec::MedianAttractingOu { rate, sigma }
            }
            ModelConfig::SineDiffusion { base, amplitude } => {
                ModelSpec::SineDiffusion { base, amplitude }
            }
            ModelConfig::MedianCoupledSigma { rate, coupling } => {
                ModelSpec::MedianCoupledSigma { rate, coupling }
            }
            ModelConfig::TanhDrift { gain, sigma } => ModelSpec::TanhDrift { gain, sigma },
            ModelConfig::StableConstant { .. } | ModelConfig::StableMedianAttracting { .. } => {
                return Err(invalid("model.kind", "stable models need the `stable solve` runner"));
            }
        };
        spec.build(x_box, omega_box).map_err(|e| invalid("model", e.to_string()))
    }

    /// Build the stable model. Fails on diffusive kinds.
    pub fn build_stable(
        &self,
        x_box: (f64, f64),
        omega_box: (f64, f64),
    ) -> Result<StableModel, ConfigError> {
        match *self {
            ModelConfig::StableConstant { alpha_s, a } => {
                StableModel::constant(alpha_s, a).map_err(|e| invalid("model", e.to_string()))
            }
            ModelConfig::StableMedianAttracting { alpha_s, a, rate } => {
                StableModel::median_attracting(alpha_s, a, rate, x_box, omega_box)
                    .map_err(|e| invalid("model", e.to_string()))
            }
            _ => Err(invalid("model.kind", "diffusive models need a non-stable runner")),
        }
    }
}

/// Initial law section.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Gaussian of the given mean and standard deviation (renormalized on
    /// the grid).
    Gaussian {
        /// Mean.
        mean: f64,
        /// Standard deviation.
        std: f64,
    },
    /// Mollified point mass (PDE runners only).
    Dirac {
        /// Dirac location.
        origin: f64,
        /// Mollifier width in cells; solver default when omitted.
        width_cells: Option<f64>,
    },
    /// True point mass (particle runner only; no mollifier).
    Point {
        /// Common starting position.
        origin: f64,
    },
}

/// Quantile coupling section. Every field may be omitted independently.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantileConfig {
    /// Coupling level, in `(0, 1)`.
    pub alpha: f64,
    /// Feedback value frozen into linear (`linfp`) runs.
    pub frozen_omega: f64,
    /// Sampling box for the model's omega argument; defaults to a quarter
    /// of the spatial box.
    pub omega_box: Option<[f64; 2]>,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self { alpha: 0.5, frozen_omega: 0.0, omega_box: None }
    }
}

/// Picard iteration section; omitted fields take the library defaults.
#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    /// Convergence tolerance on the curve sup distance.
    pub tol: Option<f64>,
    /// Iteration budget per window.
    pub max_iter: Option<usize>,
    /// Window multiplication factor per split.
    pub split_factor: Option<usize>,
    /// Split budget.
    pub max_splits: Option<usize>,
}

impl PicardConfig {
    /// Merge with the library defaults.
    pub fn options(&self) -> PicardOptions {
        let defaults = PicardOptions::default();
        PicardOptions {
            tol: self.tol.unwrap_or(defaults.tol),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            split_factor: self.split_factor.unwrap_or(defaults.split_factor),
            max_splits: self.max_splits.unwrap_or(defaults.max_splits),
        }
    }
}

/// Particle ensemble section.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesConfig {
    /// Ensemble size.
    pub n: usize,
    /// Particle step; defaults to the `[time]` step.
    pub dt: Option<f64>,
    /// Seeds, one independent replication each.
    pub seeds: Vec<u64>,
    /// Times at which to store full position snapshots.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

/// Verification section.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Named gate subset.
    pub subset: String,
}

/// A full scenario configuration.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Which runner this config is meant for.
    pub scenario: ScenarioKind,
    /// Spatial grid; required by the PDE runners and by density-started
    /// particle runs.
    pub grid: Option<GridConfig>,
    /// Horizon; required by every runner except `verify`.
    pub time: Option<TimeConfig>,
    /// Model; required by every runner except `verify`.
    pub model: Option<ModelConfig>,
    /// Initial law; required by every runner except `verify`.
    pub initial: Option<InitialConfig>,
    /// Quantile coupling parameters.
    #[serde(default)]
    pub quantile: QuantileConfig,
    /// Picard overrides.
    #[serde(default)]
    pub picard: PicardConfig,
    /// Particle section; required by `particles` runs.
    pub particles: Option<ParticlesConfig>,
    /// Verify section; optional (`subset = "all"` when omitted).
    pub verify: Option<VerifyConfig>,
}

impl ScenarioConfig {
    /// Load and parse a TOML config.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let body = fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        toml::from_str(&body)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Validate against the invoked scenario kind: section presence, field
    /// ranges, and model/runner compatibility.
    pub fn validate(&self, invoked: ScenarioKind) -> Result<(), ConfigError> {
        if self.scenario != invoked {
            return Err(ConfigError::ScenarioMismatch { declared: self.scenario, invoked });
        }
        if !(self.quantile.alpha > 0.0 && self.quantile.alpha < 1.0) {
            return Err(invalid(
                "quantile.alpha",
                format!("must lie in (0, 1), got {}", self.quantile.alpha),
            ));
        }
        if !self.quantile.frozen_omega.is_finite() {
            return Err(invalid("quantile.frozen_omega", "must be finite"));
        }
        if let Some([lo, hi]) = self.quantile.omega_box {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(
                    "quantile.omega_box",
                    format!("must be a finite increasing pair, got [{lo}, {hi}]"),
                ));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.n < 2 {
                return Err(invalid("grid.n", format!("need at least 2 cells, got {}", grid.n)));
            }
            if !(grid.x_min.is_finite() && grid.x_max.is_finite() && grid.x_min < grid.x_max) {
                return Err(invalid(
                    "grid.x_min",
                    format!(
                        "box must be finite and increasing, got [{}, {}]",
                        grid.x_min, grid.x_max
                    ),
                ));
            }
        }
        if let Some(time) = &self.time {
            if !(time.t_end.is_finite() && time.t_end > 0.0) {
                return Err(invalid("time.t_end", format!("must be positive, got {}", time.t_end)));
            }
            if !(time.dt.is_finite() && time.dt > 0.0) {
                return Err(invalid("time.dt", format!("must be positive, got {}", time.dt)));
            }
        }
        if let Some(tol) = self.picard.tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(invalid("picard.tol", format!("must be positive, got {tol}")));
            }
        }
        if self.picard.max_iter == Some(0) {
            return Err(invalid("picard.max_iter", "must be at least 1"));
        }
        if let Some(factor) = self.picard.split_factor {
            if factor < 2 {
                return Err(invalid("picard.split_factor", format!("must be >= 2, got {factor}")));
            }
        }
        match invoked {
            ScenarioKind::Verify => self.validate_verify(),
            ScenarioKind::Particles => self.validate_particles(),
            ScenarioKind::Stable => self.validate_pde(invoked, true),
            ScenarioKind::Linfp | ScenarioKind::Nonlinear => self.validate_pde(invoked, false),
        }
    }

    fn validate_pde(&self, invoked: ScenarioKind, wants_stable: bool) -> Result<(), ConfigError> {
        self.require_grid(invoked)?;
        self.require_time(invoked)?;
        let model = self.require_model(invoked)?;
        if model.is_stable() != wants_stable {
            let reason = if wants_stable {
                "stable runs need a `stable-*` model kind"
            } else {
                "this runner needs a diffusive model kind, not `stable-*`"
            };
            return Err(invalid("model.kind", reason));
        }
        match self.require_initial(invoked)? {
            InitialConfig::Point { .. } => Err(invalid(
                "initial.kind",
                "`point` is particle-only; PDE runs start from `dirac` (mollified) or `gaussian`",
            )),
            InitialConfig::Gaussian { std, .. } if !(std.is_finite() && *std > 0.0) => {
                Err(invalid("initial.std", format!("must be positive, got {std}")))
            }
            InitialConfig::Dirac { width_cells: Some(w), .. } if !(w.is_finite() && *w > 0.0) => {
                Err(invalid("initial.width_cells", format!("must be positive, got {w}")))
            }
            _ => Ok(()),
        }
    }

    fn validate_particles(&self) -> Result<(), ConfigError> {
        let invoked = ScenarioKind::Particles;
        self.require_time(invoked)?;
        let model = self.require_model(invoked)?;
        if model.is_stable() {
            return Err(invalid("model.kind", "particle runs drive diffusive models only"));
        }
        let particles = self.particles.as_ref().ok_or(ConfigError::MissingSection {
            section: "particles".to_string(),
            scenario: invoked,
        })?;
        if particles.n < 2 {
            return Err(invalid(
                "particles.n",
                format!("need at least 2 particles, got {}", particles.n),
            ));
        }
        if particles.seeds.is_empty() {
            return Err(invalid("particles.seeds", "need at least one seed"));
        }
        if let Some(dt) = particles.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(invalid("particles.dt", format!("must be positive, got {dt}")));
            }
        }
        let t_end = self.time.as_ref().expect("checked above").t_end;
        for &t in &particles.snapshot_times {
            if !(t.is_finite() && t >= 0.0 && t <= t_end) {
                return Err(invalid(
                    "particles.snapshot_times",
                    format!("snapshot {t} outside [0, {t_end}]"),
                ));
            }
        }
        match self.require_initial(invoked)? {
            InitialConfig::Dirac { .. } => Err(invalid(
                "initial.kind",
                "`dirac` is a PDE mollifier; particle runs start from `point` or `gaussian`",
            )),
            InitialConfig::Gaussian { .. } if self.grid.is_none() => {
                Err(ConfigError::MissingSection { section: "grid".to_string(), scenario: invoked })
            }
            InitialConfig::Gaussian { std, .. } if !(std.is_finite() && *std > 0.0) => {
                Err(invalid("initial.std", format!("must be positive, got {std}")))
            }
            _ => Ok(()),
        }
    }

    fn validate_verify(&self) -> Result<(), ConfigError> {
        let subset = self.subset();
        if !verify::SUBSETS.iter().any(|(name, _)| *name == subset) {
            let known =
                verify::SUBSETS.iter().map(|(name, _)| *name).collect::<Vec<_>>().join(", ");
            return Err(invalid(
                "verify.subset",
                format!("unknown subset `{subset}`; known subsets: {known}"),
            ));
        }
        Ok(())
    }

    /// The configured gate subset (default `all`).
    pub fn subset(&self) -> &str {
        self.verify.as_ref().map(|v| v.subset.as_str()).unwrap_or("all")
    }

    /// The grid section, or the missing-section error.
    pub fn require_grid(&self, scenario: ScenarioKind) -> Result<&GridConfig, ConfigError> {
        self.grid
            .as_ref()
            .ok_or(ConfigError::MissingSection { section: "grid".to_string(), scenario })
    }

    /// The time section, or the missing-section error.
    pub fn require_time(&self, scenario: ScenarioKind) -> Result<&TimeConfig, ConfigError> {
        self.time
            .as_ref()
            .ok_or(ConfigError::MissingSection { section: "time".to_string(), scenario })
    }

    /// The model section, or the missing-section error.
    pub fn require_model(&self, scenario: ScenarioKind) -> Result<&ModelConfig, ConfigError> {
        self.model
            .as_ref()
            .ok_or(ConfigError::MissingSection { section: "model".to_string(), scenario })
    }

    /// The initial-law section, or the missing-section error.
    pub fn require_initial(&self, scenario: ScenarioKind) -> Result<&InitialConfig, ConfigError> {
        self.initial
            .as_ref()
            .ok_or(ConfigError::MissingSection { section: "initial".to_string(), scenario })
    }

    /// Sampling box for the model's omega argument: configured, or a quarter
    /// of the spatial box.
    pub fn omega_box(&self) -> Result<(f64, f64), ConfigError> {
        if let Some([lo, hi]) = self.quantile.omega_box {
            return Ok((lo, hi));
        }
        let grid = self.require_grid(self.scenario)?;
        Ok((grid.x_min / 4.0, grid.x_max / 4.0))
    }

    /// Default mollifier width for Dirac starts.
    pub fn dirac_width(width_cells: Option<f64>) -> f64 {
        width_cells.unwrap_or(defaults::MOLLIFIER_WIDTH_CELLS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> ScenarioConfig {
        toml::from_str(body).expect("test configs parse")
    }

    const LINFP: &str = r#"
        scenario = "linfp"
        [grid]
        x_min = -8.0
        x_max = 8.0
        n = 400
        [time]
        t_end = 0.1
        dt = 1e-3
        [model]
        kind = "brownian"
        sigma = 1.0
        [initial]
        kind = "gaussian"
        mean = 0.0
        std = 0.5
    "#;

    #[test]
    fn minimal_linfp_config_validates() {
        let config = parse(LINFP);
        config.validate(ScenarioKind::Linfp).unwrap();
        assert_eq!(config.quantile.alpha, 0.5);
        assert_eq!(config.subset(), "all");
        assert_eq!(config.omega_box().unwrap(), (-2.0, 2.0));
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        let config = parse(LINFP);
        let err = config.validate(ScenarioKind::Nonlinear).unwrap_err();
        assert!(matches!(err, ConfigError::ScenarioMismatch { .. }), "{err}");
    }

    #[test]
    fn out_of_range_quantile_level_names_the_field() {
        let body = format!("{LINFP}\n[quantile]\nalpha = 1.2\nfrozen_omega = 0.0\n");
        let config = parse(&body);
        let err = config.validate(ScenarioKind::Linfp).unwrap_err().to_string();
        assert!(err.contains("quantile.alpha") && err.contains("1.2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let body = format!("{LINFP}\ntypo_section = 1\n");
        let err = toml::from_str::<ScenarioConfig>(&body).unwrap_err().to_string();
        assert!(err.contains("typo_section"), "{err}");
    }

    #[test]
    fn stable_model_on_diffusive_runner_is_rejected() {
        let body = LINFP.replace(
            "kind = \"brownian\"\n        sigma = 1.0",
            "kind = \"stable-constant\"\n        alpha_s = 1.5\n        a = 1.0",
        );
        let config = parse(&body);
        let err = config.validate(ScenarioKind::Linfp).unwrap_err().to_string();
        assert!(err.contains("model.kind"), "{err}");
    }

    #[test]
    fn particles_require_their_section_and_point_or_gaussian_start() {
        let body = LINFP.replace("scenario = \"linfp\"", "scenario = \"particles\"");
        let config = parse(&body);
        let err = config.validate(ScenarioKind::Particles).unwrap_err().to_string();
        assert!(err.contains("[particles]"), "{err}");

        let with_particles = format!("{body}\n[particles]\nn = 100\nseeds = [1]\n");
        let config = parse(&with_particles);
        config.validate(ScenarioKind::Particles).unwrap();

        let dirac = with_particles.replace(
            "kind = \"gaussian\"\n        mean = 0.0\n        std = 0.5",
            "kind = \"dirac\"\n        origin = 0.0",
        );
        let config = parse(&dirac);
        let err = config.validate(ScenarioKind::Particles).unwrap_err().to_string();
        assert!(err.contains("initial.kind"), "{err}");
    }

    #[test]
    fn unknown_verify_subset_names_the_field() {
        let body = "scenario = \"verify\"\n[verify]\nsubset = \"bogus\"\n";
        let config = parse(body);
        let err = config.validate(ScenarioKind::Verify).unwrap_err().to_string();
        assert!(err.contains("verify.subset") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn picard_overrides_merge_with_defaults() {
        let body = format!("{LINFP}\n[picard]\ntol = 1e-8\n");
        let config = parse(&body);
        let options = config.picard.options();
        assert_eq!(options.tol, 1e-8);
        assert_eq!(options.max_iter, PicardOptions::default().max_iter);
    }
}
