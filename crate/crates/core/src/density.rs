//! Validated grid densities, quantiles, norms, and the quantile Lipschitz bound.
//!
//! A [`Density`] couples a [`Grid`] with one nonnegative value per cell and is
//! interpreted as piecewise constant, so its CDF is piecewise linear and the
//! quantile at level `alpha` is found by linear interpolation inside the
//! bracketing cell. Construction validates nonnegativity and unit mass (within
//! [`defaults::MASS_TOL`]).
//!
//! Quantiles use the left-continuous generalized inverse
//! `Q_alpha(u) = inf { x : F(x) >= alpha }`. When the CDF reaches `alpha`
//! exactly at a cell edge and zero-density cells follow, the level set
//! `{F = alpha}` has positive width and the quantile is not unique; such
//! inputs (e.g. `(delta_a + delta_b)/2` at the median) are rejected with
//! [`DensityError::DegenerateDensity`]. A plateau *below or above* the level
//! is harmless: the generalized inverse lands on its left endpoint.
//!
//! The quantile sensitivity bound realized by
//! [`quantile_sensitivity_bound`] is
//!
//! ```text
//!   |Q_alpha(u2) - Q_alpha(u1)| <= ||u1 - u2||_L1 / (delta K^{d-1}),
//! ```
//!
//! valid whenever both densities satisfy a localization certificate
//! `(K, delta, epsilon)`: tail mass at most `epsilon` outside the `K`-box, a
//! density floor `delta` on the `2K`-box, and quantiles confined to the
//! `K`-box.

use crate::defaults;
use crate::grid::{Grid, Grid2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from density construction and operations.
#[derive(Debug, Error)]
pub enum DensityError {
    /// Value vector does not match the grid.
    #[error("value count {got} does not match grid cell count {expected}")]
    LengthMismatch {
        /// Cells in the grid.
        expected: usize,
        /// Values supplied.
        got: usize,
    },
    /// A negative value.
    #[error("negative value {value:e} at cell {index}")]
    NegativeValue {
        /// Offending cell.
        index: usize,
        /// Offending value.
        value: f64,
    },
    /// A NaN or infinite value.
    #[error("non-finite value at cell {index}")]
    NonFiniteValue {
        /// Offending cell.
        index: usize,
    },
    /// Mass deviates from 1 beyond tolerance.
    #[error("mass {mass} deviates from 1 by more than {tol:e}")]
    MassOutOfTolerance {
        /// Measured mass.
        mass: f64,
        /// Tolerance applied.
        tol: f64,
    },
    /// Two operands live on different grids.
    #[error("operands live on different grids")]
    GridMismatch,
    /// Quantile level outside the open unit interval.
    #[error("quantile level {level} outside (0, 1)")]
    LevelOutOfRange {
        /// Offending level.
        level: f64,
    },
    /// The CDF is flat at the requested level over positive width, so the
    /// quantile is not unique.
    #[error("flat CDF plateau at level {level}: quantile not unique on [{left}, {right}]")]
    DegenerateDensity {
        /// Requested level.
        level: f64,
        /// Left end of the plateau.
        left: f64,
        /// Right end of the plateau.
        right: f64,
    },
    /// Sobolev order beyond what the grid supports.
    #[error("derivative order {order} out of range (max {max})")]
    OrderOutOfRange {
        /// Requested order.
        order: usize,
        /// Largest supported order.
        max: usize,
    },
    /// A density fails its localization certificate.
    #[error("localization certificate violated: {reason}")]
    CertificateViolated {
        /// Which certificate clause failed, with measured numbers.
        reason: String,
    },
    /// Certificate parameters are not admissible.
    #[error("certificate parameters inadmissible: {reason}")]
    BadCertificate {
        /// What is wrong with the parameters.
        reason: String,
    },
    /// An invalid argument to a constructor or operation.
    #[error("invalid parameter: {reason}")]
    InvalidParameter {
        /// What is wrong with the argument.
        reason: String,
    },
}

/// Absolute tolerance for detecting that a cumulative hits a level exactly
/// (flat-plateau detection).
const PLATEAU_TOL: f64 = 1e-12;

/// A vector of quantile levels, one per coordinate (`d <= 2`), each in (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    /// Build a level vector, validating every entry.
    pub fn new(levels: Vec<f64>) -> Result<Self, DensityError> {
        if levels.is_empty() || levels.len() > 2 {
            return Err(DensityError::InvalidParameter {
                reason: format!("need 1 or 2 quantile levels, got {}", levels.len()),
            });
        }
        for &a in &levels {
            check_level(a)?;
        }
        Ok(Self(levels))
    }

    /// Single-level (d = 1) constructor.
    pub fn single(alpha: f64) -> Result<Self, DensityError> {
        Self::new(vec![alpha])
    }

    /// The levels.
    #[must_use]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Smallest distance of any level to the ends of (0,1); an admissible
    /// certificate needs `epsilon` strictly below this.
    #[must_use]
    pub fn margin(&self) -> f64 {
        self.0.iter().map(|&a| a.min(1.0 - a)).fold(f64::INFINITY, f64::min)
    }
}

fn check_level(alpha: f64) -> Result<(), DensityError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(DensityError::LevelOutOfRange { level: alpha });
    }
    Ok(())
}

/// A localization certificate `(K, delta, epsilon)` for a set of densities and
/// quantile levels: tail mass `<= epsilon` outside `[-K, K]^d`, density
/// `>= delta` on `[-2K, 2K]^d`, and all quantiles inside `[-K, K]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationCertificate {
    /// Half-width `K` of the confinement box.
    pub k_box: f64,
    /// Density floor on the doubled box.
    pub delta: f64,
    /// Tail mass budget outside the box.
    pub epsilon: f64,
}

impl LocalizationCertificate {
    /// Validate and build a certificate for the given levels. Requires
    /// `K > 0`, `delta > 0`, and `0 < epsilon < min_j min(alpha_j, 1-alpha_j)`.
    pub fn new(
        k_box: f64,
        delta: f64,
        epsilon: f64,
        levels: &QuantileLevels,
    ) -> Result<Self, DensityError> {
        if !(k_box.is_finite() && k_box > 0.0) {
            return Err(DensityError::BadCertificate {
                reason: format!("K must be positive and finite, got {k_box}"),
            });
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(DensityError::BadCertificate {
                reason: format!("delta must be positive and finite, got {delta}"),
            });
        }
        let margin = levels.margin();
        if !(epsilon > 0.0 && epsilon < margin) {
            return Err(DensityError::BadCertificate {
                reason: format!(
                    "epsilon must lie in (0, min(alpha, 1-alpha)) = (0, {margin}), got {epsilon}"
                ),
            });
        }
        Ok(Self { k_box, delta, epsilon })
    }

    /// Check that a 1-d density (with the first level of `levels`) satisfies
    /// every certificate clause.
    pub fn check(&self, u: &Density, levels: &QuantileLevels) -> Result<(), DensityError> {
        let tail = u.tail_mass_outside(self.k_box);
        if tail > self.epsilon {
            return Err(DensityError::CertificateViolated {
                reason: format!(
                    "tail mass {tail:e} outside [-{k}, {k}] exceeds epsilon {eps:e}",
                    k = self.k_box,
                    eps = self.epsilon
                ),
            });
        }
        let floor = u.min_on_box(2.0 * self.k_box);
        if floor < self.delta {
            return Err(DensityError::CertificateViolated {
                reason: format!(
                    "density floor {floor:e} on the 2K-box is below delta {delta:e}",
                    delta = self.delta
                ),
            });
        }
        for &alpha in levels.as_slice() {
            let q = u.quantile(alpha)?;
            if q.abs() > self.k_box {
                return Err(DensityError::CertificateViolated {
                    reason: format!(
                        "quantile {q} at level {alpha} escapes the box of half-width {}",
                        self.k_box
                    ),
                });
            }
        }
        Ok(())
    }

    /// Check a 2-d density against the certificate (square boxes, marginal
    /// quantiles).
    pub fn check_2d(&self, u: &Density2, levels: &QuantileLevels) -> Result<(), DensityError> {
        let tail = u.tail_mass_outside_square(self.k_box);
        if tail > self.epsilon {
            return Err(DensityError::CertificateViolated {
                reason: format!(
                    "tail mass {tail:e} outside the K-square exceeds epsilon {:e}",
                    self.epsilon
                ),
            });
        }
        let floor = u.min_on_square(2.0 * self.k_box);
        if floor < self.delta {
            return Err(DensityError::CertificateViolated {
                reason: format!(
                    "density floor {floor:e} on the 2K-square is below delta {:e}",
                    self.delta
                ),
            });
        }
        let q = u.quantile_vector(levels)?;
        for (axis, &qi) in q.iter().enumerate() {
            if qi.abs() > self.k_box {
                return Err(DensityError::CertificateViolated {
                    reason: format!(
                        "marginal quantile {qi} on axis {axis} escapes the box of half-width {}",
                        self.k_box
                    ),
                });
            }
        }
        Ok(())
    }
}

/// A probability density on a 1-d cell-centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

impl Density {
    /// Build and validate a density: matching length, finite nonnegative
    /// values, mass within [`defaults::MASS_TOL`] of 1.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, DensityError> {
        Self::with_mass_tol(grid, values, defaults::MASS_TOL)
    }

    /// As [`Density::new`] with an explicit mass tolerance.
    pub fn with_mass_tol(grid: Grid, values: Vec<f64>, tol: f64) -> Result<Self, DensityError> {
        if values.len() != grid.n() {
            return Err(DensityError::LengthMismatch { expected: grid.n(), got: values.len() });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(DensityError::NonFiniteValue { index });
            }
            if value < 0.0 {
                return Err(DensityError::NegativeValue { index, value });
            }
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.dx();
        if (mass - 1.0).abs() > tol {
            return Err(DensityError::MassOutOfTolerance { mass, tol });
        }
        Ok(Self { grid, values })
    }

    /// Evaluate `f` at the cell centers and rescale to exactly unit mass.
    /// Truncation to the grid is absorbed by the normalization.
    pub fn from_fn_normalized(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self, DensityError> {
        let mut values: Vec<f64> = (0..grid.n()).map(|j| f(grid.center(j))).collect();
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(DensityError::NonFiniteValue { index });
            }
            if value < 0.0 {
                return Err(DensityError::NegativeValue { index, value });
            }
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.dx();
        if mass <= 0.0 {
            return Err(DensityError::MassOutOfTolerance { mass, tol: defaults::MASS_TOL });
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self { grid, values })
    }

    /// A grid-normalized Gaussian with the given mean and standard deviation.
    pub fn gaussian(grid: Grid, mean: f64, std: f64) -> Result<Self, DensityError> {
        if !(std.is_finite() && std > 0.0) {
            return Err(DensityError::InvalidParameter {
                reason: format!("gaussian std must be positive, got {std}"),
            });
        }
        let inv = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
        Self::from_fn_normalized(grid, |x| {
            let z = (x - mean) / std;
            inv * (-0.5 * z * z).exp()
        })
    }

    /// A mollified Dirac mass at `xi`: a grid-normalized Gaussian of standard
    /// deviation `width_cells * dx` (default [`defaults::MOLLIFIER_WIDTH_CELLS`]).
    pub fn mollified_dirac(grid: Grid, xi: f64, width_cells: f64) -> Result<Self, DensityError> {
        let std = width_cells * grid.dx();
        Self::gaussian(grid, xi, std)
    }

    /// The underlying grid.
    #[must_use]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The cell values.
    #[must_use]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass `sum(values) * dx`.
    #[must_use]
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// Cumulative masses at the *right edge* of each cell (length `n`,
    /// nondecreasing, last entry equals the total mass).
    #[must_use]
    pub fn cdf(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|&v| {
                acc += v * dx;
                acc
            })
            .collect()
    }

    /// CDF evaluated at an arbitrary point by linear interpolation inside the
    /// containing cell; clamps outside the grid.
    #[must_use]
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.grid.x_min() {
            return 0.0;
        }
        if x >= self.grid.x_max() {
            return self.mass();
        }
        let j = self.grid.cell_of(x);
        let below: f64 = self.values[..j].iter().sum::<f64>() * self.grid.dx();
        below + self.values[j] * (x - self.grid.left_edge(j))
    }

    /// The quantile `Q_alpha` as the left-continuous generalized inverse of
    /// the piecewise-linear CDF. Levels are taken relative to the total mass
    /// (which is within [`defaults::MASS_TOL`] of 1 by construction).
    ///
    /// Errors with [`DensityError::LevelOutOfRange`] for `alpha` outside
    /// `(0, 1)` and [`DensityError::DegenerateDensity`] when `{F = alpha}` has
    /// positive width (a zero-density plateau exactly at the level).
    pub fn quantile(&self, alpha: f64) -> Result<f64, DensityError> {
        check_level(alpha)?;
        let dx = self.grid.dx();
        let target = alpha * self.mass();
        let mut acc = 0.0;
        for (j, &v) in self.values.iter().enumerate() {
            let mass_j = v * dx;
            let next = acc + mass_j;
            if next >= target {
                // Bracketing cell found (first j with C_j >= target). The
                // minimality of j forces mass_j > 0 here.
                let q = if mass_j > 0.0 {
                    self.grid.left_edge(j) + (target - acc) / v
                } else {
                    self.grid.left_edge(j)
                };
                // Reject a flat stretch exactly at the level: the cumulative
                // hits `target` at this cell's right edge and at least one
                // zero-density cell follows.
                if (next - target).abs() <= PLATEAU_TOL {
                    let mut right = j + 1;
                    while right < self.values.len() && self.values[right] <= 0.0 {
                        right += 1;
                    }
                    if right > j + 1 {
                        return Err(DensityError::DegenerateDensity {
                            level: alpha,
                            left: self.grid.left_edge(j + 1),
                            right: self.grid.left_edge(right),
                        });
                    }
                }
                return Ok(q.clamp(self.grid.left_edge(j), self.grid.left_edge(j + 1)));
            }
            acc = next;
        }
        // Unreachable for validated masses; guard anyway.
        Ok(self.grid.x_max())
    }

    /// L1 distance to another density on the same grid.
    pub fn l1_distance(&self, other: &Self) -> Result<f64, DensityError> {
        if self.grid != other.grid {
            return Err(DensityError::GridMismatch);
        }
        let dx = self.grid.dx();
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx)
    }

    /// The `H^k_1` norm: sum of the L1 norms of the density and its finite-
    /// difference derivatives up to order `k` (central differences inside,
    /// one-sided at the boundary). Supported orders: 0, 1, 2.
    pub fn sobolev_norm(&self, k: usize) -> Result<f64, DensityError> {
        if k > 2 {
            return Err(DensityError::OrderOutOfRange { order: k, max: 2 });
        }
        let dx = self.grid.dx();
        let mut total = self.values.iter().map(|v| v.abs()).sum::<f64>() * dx;
        if k >= 1 {
            total += l1_of(&finite_difference(&self.values, dx), dx);
        }
        if k >= 2 {
            total += l1_of(&second_difference(&self.values, dx), dx);
        }
        Ok(total)
    }

    /// Mass outside the closed box `[-k, k]` (cells are attributed by center).
    #[must_use]
    pub fn tail_mass_outside(&self, k: f64) -> f64 {
        let dx = self.grid.dx();
        (0..self.grid.n())
            .filter(|&j| self.grid.center(j).abs() > k)
            .map(|j| self.values[j] * dx)
            .sum()
    }

    /// Minimum value over cells whose centers lie in `[-halfwidth, halfwidth]`
    /// (intersected with the grid).
    #[must_use]
    pub fn min_on_box(&self, halfwidth: f64) -> f64 {
        (0..self.grid.n())
            .filter(|&j| self.grid.center(j).abs() <= halfwidth)
            .map(|j| self.values[j])
            .fold(f64::INFINITY, f64::min)
    }
}

fn l1_of(values: &[f64], dx: f64) -> f64 {
    values.iter().map(|v| v.abs()).sum::<f64>() * dx
}

/// First derivative by central differences (one-sided at the two ends).
fn finite_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    d[0] = (values[1] - values[0]) / dx;
    d[n - 1] = (values[n - 1] - values[n - 2]) / dx;
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * dx);
    }
    d
}

/// Second derivative by the three-point stencil (copied inward at the ends).
fn second_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - 2.0 * values[j] + values[j - 1]) / (dx * dx);
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    d
}

/// Report of one application of the quantile sensitivity bound.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityBoundReport {
    /// Measured quantile displacement per coordinate.
    pub lhs: Vec<f64>,
    /// Certified upper bound `||u1 - u2||_L1 / (delta K^{d-1})`.
    pub rhs: f64,
    /// Whether `lhs <= rhs (1 + slack) + dx` holds on every coordinate.
    pub holds: bool,
    /// Relative slack applied.
    pub slack: f64,
    /// Additive grid-interpolation allowance (one cell width).
    pub dx_allowance: f64,
}

/// Check the 1-d quantile Lipschitz bound for a pair of densities satisfying
/// a shared localization certificate.
///
/// Returns the measured left side `|Q_alpha(u2) - Q_alpha(u1)|`, the bound
/// `||u1 - u2||_L1 / delta`, and whether the bound holds with relative slack
/// [`defaults::SENSITIVITY_SLACK`] plus one cell width of interpolation
/// allowance. Errors with [`DensityError::CertificateViolated`] if either
/// density fails the certificate.
pub fn quantile_sensitivity_bound(
    u1: &Density,
    u2: &Density,
    alpha: f64,
    cert: &LocalizationCertificate,
) -> Result<SensitivityBoundReport, DensityError> {
    if u1.grid() != u2.grid() {
        return Err(DensityError::GridMismatch);
    }
    let levels = QuantileLevels::single(alpha)?;
    cert.check(u1, &levels)?;
    cert.check(u2, &levels)?;
    let lhs = (u2.quantile(alpha)? - u1.quantile(alpha)?).abs();
    let rhs = u1.l1_distance(u2)? / cert.delta;
    let slack = defaults::SENSITIVITY_SLACK;
    let dx_allowance = u1.grid().dx();
    let holds = lhs <= rhs * (1.0 + slack) + dx_allowance;
    Ok(SensitivityBoundReport { lhs: vec![lhs], rhs, holds, slack, dx_allowance })
}

/// A probability density on a 2-d tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2 {
    grid: Grid2,
    values: Vec<f64>,
}

impl Density2 {
    /// Build and validate (finite, nonnegative, unit mass within tolerance).
    pub fn new(grid: Grid2, values: Vec<f64>) -> Result<Self, DensityError> {
        if values.len() != grid.len() {
            return Err(DensityError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(DensityError::NonFiniteValue { index });
            }
            if value < 0.0 {
                return Err(DensityError::NegativeValue { index, value });
            }
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.cell_area();
        if (mass - 1.0).abs() > defaults::MASS_TOL {
            return Err(DensityError::MassOutOfTolerance { mass, tol: defaults::MASS_TOL });
        }
        Ok(Self { grid, values })
    }

    /// The product density `ux(x) uy(y)`.
    pub fn product(ux: &Density, uy: &Density) -> Result<Self, DensityError> {
        let grid = Grid2::new(ux.grid().clone(), uy.grid().clone());
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.y.n() {
            for i in 0..grid.x.n() {
                values.push(ux.values()[i] * uy.values()[j]);
            }
        }
        Self::new(grid, values)
    }

    /// The underlying tensor grid.
    #[must_use]
    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    /// Total mass.
    #[must_use]
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Marginal density on the first coordinate (integrate out `y`).
    pub fn marginal_x(&self) -> Result<Density, DensityError> {
        let nx = self.grid.x.n();
        let dy = self.grid.y.dx();
        let mut values = vec![0.0; nx];
        for j in 0..self.grid.y.n() {
            for (i, value) in values.iter_mut().enumerate() {
                *value += self.values[self.grid.index(i, j)] * dy;
            }
        }
        Density::new(self.grid.x.clone(), values)
    }

    /// Marginal density on the second coordinate (integrate out `x`).
    pub fn marginal_y(&self) -> Result<Density, DensityError> {
        let ny = self.grid.y.n();
        let dx = self.grid.x.dx();
        let mut values = vec![0.0; ny];
        for (j, value) in values.iter_mut().enumerate() {
            for i in 0..self.grid.x.n() {
                *value += self.values[self.grid.index(i, j)] * dx;
            }
        }
        Density::new(self.grid.y.clone(), values)
    }

    /// Per-coordinate quantile vector: the half-space condition reduces to the
    /// marginal CDFs, so each coordinate is the quantile of its marginal.
    pub fn quantile_vector(&self, levels: &QuantileLevels) -> Result<[f64; 2], DensityError> {
        let ls = levels.as_slice();
        if ls.len() != 2 {
            return Err(DensityError::InvalidParameter {
                reason: format!("2-d quantile vector needs 2 levels, got {}", ls.len()),
            });
        }
        let qx = self.marginal_x()?.quantile(ls[0])?;
        let qy = self.marginal_y()?.quantile(ls[1])?;
        Ok([qx, qy])
    }

    /// L1 distance on the same tensor grid.
    pub fn l1_distance(&self, other: &Self) -> Result<f64, DensityError> {
        if self.grid != other.grid {
            return Err(DensityError::GridMismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>()
            * self.grid.cell_area())
    }

    /// Mass outside the closed square `[-k, k]^2`.
    #[must_use]
    pub fn tail_mass_outside_square(&self, k: f64) -> f64 {
        let mut tail = 0.0;
        for j in 0..self.grid.y.n() {
            let y = self.grid.y.center(j);
            for i in 0..self.grid.x.n() {
                let x = self.grid.x.center(i);
                if x.abs() > k || y.abs() > k {
                    tail += self.values[self.grid.index(i, j)];
                }
            }
        }
        tail * self.grid.cell_area()
    }

    /// Minimum value over cells with centers in `[-halfwidth, halfwidth]^2`.
    #[must_use]
    pub fn min_on_square(&self, halfwidth: f64) -> f64 {
        let mut min = f64::INFINITY;
        for j in 0..self.grid.y.n() {
            let y = self.grid.y.center(j);
            if y.abs() > halfwidth {
                continue;
            }
            for i in 0..self.grid.x.n() {
                let x = self.grid.x.center(i);
                if x.abs() <= halfwidth {
                    min = min.min(self.values[self.grid.index(i, j)]);
                }
            }
        }
        min
    }
}

/// Check the 2-d quantile Lipschitz bound
/// `|Q_alpha(u2) - Q_alpha(u1)|_j <= ||u1 - u2||_L1 / (delta K)` per
/// coordinate, under a shared certificate.
pub fn quantile_sensitivity_bound_2d(
    u1: &Density2,
    u2: &Density2,
    levels: &QuantileLevels,
    cert: &LocalizationCertificate,
) -> Result<SensitivityBoundReport, DensityError> {
    if u1.grid() != u2.grid() {
        return Err(DensityError::GridMismatch);
    }
    cert.check_2d(u1, levels)?;
    cert.check_2d(u2, levels)?;
    let q1 = u1.quantile_vector(levels)?;
    let q2 = u2.quantile_vector(levels)?;
    let lhs: Vec<f64> = q1.iter().zip(q2.iter()).map(|(a, b)| (b - a).abs()).collect();
    let rhs = u1.l1_distance(u2)? / (cert.delta * cert.k_box);
    let slack = defaults::SENSITIVITY_SLACK;
    let dx_allowance = u1.grid().x.dx().max(u1.grid().y.dx());
    let holds = lhs.iter().all(|&l| l <= rhs * (1.0 + slack) + dx_allowance);
    Ok(SensitivityBoundReport { lhs, rhs, holds, slack, dx_allowance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Simpson quadrature on a uniform refinement of `[a, b]`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let n = panels * 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn normal_pdf(x: f64, var: f64) -> f64 {
        (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    /// Independent CDF oracle: quadrature of the standard normal pdf.
    fn normal_cdf_oracle(z: f64) -> f64 {
        0.5 + simpson(|x| normal_pdf(x, 1.0), 0.0, z, 4000)
    }

    fn std_normal(grid: &Grid) -> Density {
        Density::gaussian(grid.clone(), 0.0, 1.0).unwrap()
    }

    #[test]
    fn construction_validates() {
        let g = Grid::new(0.0, 1.0, 10).unwrap();
        // Uniform density integrates to 1.
        let u = Density::new(g.clone(), vec![1.0; 10]).unwrap();
        assert_relative_eq!(u.mass(), 1.0);
        // Wrong length.
        assert!(matches!(
            Density::new(g.clone(), vec![1.0; 9]),
            Err(DensityError::LengthMismatch { .. })
        ));
        // Negative value.
        let mut vals = vec![1.0; 10];
        vals[3] = -0.1;
        assert!(matches!(
            Density::new(g.clone(), vals),
            Err(DensityError::NegativeValue { index: 3, .. })
        ));
        // Non-finite value.
        let mut vals = vec![1.0; 10];
        vals[7] = f64::NAN;
        assert!(matches!(
            Density::new(g.clone(), vals),
            Err(DensityError::NonFiniteValue { index: 7 })
        ));
        // Mass off by 10%.
        assert!(matches!(
            Density::new(g, vec![1.1; 10]),
            Err(DensityError::MassOutOfTolerance { .. })
        ));
    }

    #[test]
    fn uniform_median_is_midpoint() {
        let g = Grid::new(0.0, 1.0, 200).unwrap();
        let u = Density::new(g, vec![1.0; 200]).unwrap();
        assert_abs_diff_eq!(u.quantile(0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(u.quantile(0.25).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn standard_normal_quantile_matches_cdf_inversion() {
        // Level Phi(1) = 0.841344746...; the quantile must be 1.0.
        let g = Grid::new(-8.0, 8.0, 4000).unwrap();
        let u = std_normal(&g);
        let q = u.quantile(0.841344746).unwrap();
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-3);
        // Cross-check against the independent quadrature oracle.
        assert_abs_diff_eq!(normal_cdf_oracle(q), 0.841344746, epsilon = 1e-4);
        // Median of a symmetric density.
        assert_abs_diff_eq!(u.quantile(0.5).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn exponential_median_is_ln_two() {
        let g = Grid::new(0.0, 40.0, 40_000).unwrap();
        let u = Density::from_fn_normalized(g, |x| (-x).exp()).unwrap();
        assert_abs_diff_eq!(u.quantile(0.5).unwrap(), std::f64::consts::LN_2, epsilon = 1e-4);
    }

    #[test]
    fn quantile_level_validation() {
        let g = Grid::new(-8.0, 8.0, 100).unwrap();
        let u = std_normal(&g);
        for bad in [0.0, 1.0, -0.2, 1.7, f64::NAN] {
            assert!(matches!(u.quantile(bad), Err(DensityError::LevelOutOfRange { .. })));
        }
    }

    #[test]
    fn two_point_mixture_median_is_degenerate() {
        // (delta_a + delta_b)/2 discretized as two spike cells: the CDF is
        // flat at 1/2 between the spikes, so the median is not unique.
        let g = Grid::new(0.0, 1.0, 16).unwrap();
        let mut vals = vec![0.0; 16];
        vals[2] = 0.5 / g.dx();
        vals[13] = 0.5 / g.dx();
        let u = Density::new(g, vals).unwrap();
        match u.quantile(0.5) {
            Err(DensityError::DegenerateDensity { level, left, right }) => {
                assert_eq!(level, 0.5);
                assert!(right > left);
            }
            other => panic!("expected DegenerateDensity, got {other:?}"),
        }
        // Other levels are fine: the plateau is not at their height.
        assert!(u.quantile(0.25).is_ok());
        assert!(u.quantile(0.75).is_ok());
    }

    #[test]
    fn plateau_off_level_returns_left_continuous_inverse() {
        // Density supported on [0, 0.25] and [0.75, 1.0] with 60/40 split:
        // levels inside either block interpolate; the level 0.6 sits exactly
        // at the plateau and must be rejected.
        let g = Grid::new(0.0, 1.0, 16).unwrap();
        let mut vals = vec![0.0; 16];
        for v in vals.iter_mut().take(4) {
            *v = 0.6 / (4.0 * g.dx());
        }
        for v in vals.iter_mut().skip(12) {
            *v = 0.4 / (4.0 * g.dx());
        }
        let u = Density::new(g.clone(), vals).unwrap();
        assert_abs_diff_eq!(u.quantile(0.3).unwrap(), 0.125, epsilon = 1e-12);
        assert!(matches!(u.quantile(0.6), Err(DensityError::DegenerateDensity { .. })));
        // Just above the plateau level the quantile jumps to the right block:
        // the left-continuous inverse of the next increasing stretch.
        let q = u.quantile(0.6 + 1e-9).unwrap();
        assert!(q >= 0.75 && q < 0.76, "q = {q}");
    }

    #[test]
    fn quantile_monotone_in_level() {
        let g = Grid::new(-8.0, 8.0, 1000).unwrap();
        let u = Density::from_fn_normalized(g, |x| {
            0.3 * normal_pdf(x + 1.0, 0.5) + 0.7 * normal_pdf(x - 2.0, 1.5)
        })
        .unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 1..40 {
            let q = u.quantile(i as f64 / 40.0).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn cdf_is_monotone_and_inverts_quantile() {
        let g = Grid::new(-6.0, 6.0, 500).unwrap();
        let u = std_normal(&g);
        let cdf = u.cdf();
        assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
        assert_relative_eq!(*cdf.last().unwrap(), u.mass(), max_relative = 1e-12);
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let q = u.quantile(alpha).unwrap();
            assert_abs_diff_eq!(u.cdf_at(q), alpha * u.mass(), epsilon = 1e-10);
        }
    }

    #[test]
    fn l1_distance_matches_quadrature_oracle() {
        // || G_1(0.1,.) - G_1(0.2,.) ||_L1 = 0.3321386120584504 (quadrature).
        let g = Grid::new(-8.0, 8.0, 4000).unwrap();
        let u1 = Density::gaussian(g.clone(), 0.0, 0.1f64.sqrt()).unwrap();
        let u2 = Density::gaussian(g.clone(), 0.0, 0.2f64.sqrt()).unwrap();
        let d = u1.l1_distance(&u2).unwrap();
        assert_abs_diff_eq!(d, 0.332_138_612_058_450_4, epsilon = 2e-4);
        // Identical arguments give zero; the metric is symmetric.
        assert_eq!(u1.l1_distance(&u1).unwrap(), 0.0);
        assert_relative_eq!(u2.l1_distance(&u1).unwrap(), d);
        // Mismatched grids are an error.
        let other = Grid::new(-8.0, 8.0, 2000).unwrap();
        let v = Density::gaussian(other, 0.0, 1.0).unwrap();
        assert!(matches!(u1.l1_distance(&v), Err(DensityError::GridMismatch)));
    }

    #[test]
    fn sobolev_norm_of_gaussian() {
        // ||u||_1 = 1 and ||u'||_1 = 2 / sqrt(2 pi t); at t = 0.25 the k = 1
        // norm is 1 + 1.5957691216057307.
        let g = Grid::new(-8.0, 8.0, 4000).unwrap();
        let t: f64 = 0.25;
        let u = Density::gaussian(g, 0.0, t.sqrt()).unwrap();
        assert_abs_diff_eq!(u.sobolev_norm(0).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            u.sobolev_norm(1).unwrap(),
            1.0 + 1.595_769_121_605_730_7,
            epsilon = 1e-3
        );
        // Orders above 2 are rejected.
        assert!(matches!(
            u.sobolev_norm(3),
            Err(DensityError::OrderOutOfRange { order: 3, max: 2 })
        ));
        // k = 2 includes E|Z^2 - 1| / t = 0.9678828980765734 / 0.25.
        assert_abs_diff_eq!(
            u.sobolev_norm(2).unwrap(),
            1.0 + 1.595_769_121_605_730_7 + 0.967_882_898_076_573_4 / t,
            epsilon = 2e-2
        );
    }

    #[test]
    fn sensitivity_bound_on_shifted_gaussian() {
        // G_1(1, .) against its 0.01-shift: lhs ~ 0.01, rhs = L1 / delta.
        let g = Grid::new(-10.0, 10.0, 2000).unwrap();
        let u1 = Density::gaussian(g.clone(), 0.0, 1.0).unwrap();
        let u2 = Density::gaussian(g.clone(), 0.01, 1.0).unwrap();
        let levels = QuantileLevels::single(0.5).unwrap();
        // K = 3 confines medians and tails; delta from the minimum of both
        // densities on [-6, 6].
        let delta = u1.min_on_box(6.0).min(u2.min_on_box(6.0));
        let cert = LocalizationCertificate::new(3.0, delta, 0.01, &levels).unwrap();
        let report = quantile_sensitivity_bound(&u1, &u2, 0.5, &cert).unwrap();
        assert!(report.holds, "lhs {:?} rhs {}", report.lhs, report.rhs);
        assert_abs_diff_eq!(report.lhs[0], 0.01, epsilon = 1e-6);
    }

    #[test]
    fn sensitivity_bound_rejects_bad_certificate() {
        let g = Grid::new(-10.0, 10.0, 2000).unwrap();
        let u1 = Density::gaussian(g.clone(), 0.0, 1.0).unwrap();
        let u2 = Density::gaussian(g.clone(), 0.01, 1.0).unwrap();
        let levels = QuantileLevels::single(0.5).unwrap();
        // delta far above the actual floor on the 2K-box.
        let cert = LocalizationCertificate::new(3.0, 0.5, 0.01, &levels).unwrap();
        assert!(matches!(
            quantile_sensitivity_bound(&u1, &u2, 0.5, &cert),
            Err(DensityError::CertificateViolated { .. })
        ));
        // epsilon must be below min(alpha, 1 - alpha).
        assert!(matches!(
            LocalizationCertificate::new(3.0, 1e-4, 0.6, &levels),
            Err(DensityError::BadCertificate { .. })
        ));
    }

    #[test]
    fn product_normal_quantile_vector() {
        let g = Grid::new(-8.0, 8.0, 800).unwrap();
        let ux = std_normal(&g);
        let uy = std_normal(&g);
        let u = Density2::product(&ux, &uy).unwrap();
        let levels = QuantileLevels::new(vec![0.5, 0.841344746]).unwrap();
        let q = u.quantile_vector(&levels).unwrap();
        assert_abs_diff_eq!(q[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q[1], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn marginals_of_product_recover_factors() {
        let g = Grid::new(-6.0, 6.0, 300).unwrap();
        let ux = Density::gaussian(g.clone(), 0.5, 0.8).unwrap();
        let uy = Density::gaussian(g.clone(), -0.25, 1.2).unwrap();
        let u = Density2::product(&ux, &uy).unwrap();
        assert!(u.marginal_x().unwrap().l1_distance(&ux).unwrap() < 1e-10);
        assert!(u.marginal_y().unwrap().l1_distance(&uy).unwrap() < 1e-10);
        assert_relative_eq!(u.mass(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sensitivity_bound_2d_holds_for_shifted_product() {
        let g = Grid::new(-10.0, 10.0, 400).unwrap();
        let ux1 = Density::gaussian(g.clone(), 0.0, 1.0).unwrap();
        let ux2 = Density::gaussian(g.clone(), 0.05, 1.0).unwrap();
        let uy = Density::gaussian(g.clone(), 0.0, 1.0).unwrap();
        let u1 = Density2::product(&ux1, &uy).unwrap();
        let u2 = Density2::product(&ux2, &uy).unwrap();
        let levels = QuantileLevels::new(vec![0.5, 0.5]).unwrap();
        let delta = u1.min_on_square(6.0).min(u2.min_on_square(6.0));
        let cert = LocalizationCertificate::new(3.0, delta, 0.01, &levels).unwrap();
        let report = quantile_sensitivity_bound_2d(&u1, &u2, &levels, &cert).unwrap();
        assert!(report.holds, "lhs {:?} rhs {}", report.lhs, report.rhs);
        assert_abs_diff_eq!(report.lhs[0], 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(report.lhs[1], 0.0, epsilon = 1e-12);
    }
}
