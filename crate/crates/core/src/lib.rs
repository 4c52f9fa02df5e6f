//! Quantile-coupled Fokker-Planck equations on 1-d (and tensor 2-d) grids.
//!
//! The object of study is the nonlinear diffusion whose drift and diffusion
//! coefficients depend on the evolving law only through a quantile
//! `omega_t = Q_alpha(u_t)` (median, or more generally a value-at-risk level).
//! The density `u_t` solves the divergence-form equation
//!
//! ```text
//!   d/dt u = 1/2 d^2/dx^2 [ sigma^2(t, x, omega_t) u ] - d/dx [ b(t, x, omega_t) u ],
//!   omega_t = Q_alpha(u_t),
//! ```
//!
//! and the pair `(u, omega)` is constructed as a fixed point of the map
//! `omega -> Q_alpha(u[omega])`, where `u[omega]` solves the *linear* equation
//! obtained by freezing the quantile curve.
//!
//! The crate provides, module by module:
//!
//! * [`grid`], [`density`] - cell-centered grids, validated densities, CDF and
//!   quantile extraction, L1 / Sobolev norms, and the quantile Lipschitz bound
//!   `|Q_alpha(u2) - Q_alpha(u1)| <= ||u1 - u2||_L1 / (delta K^{d-1})` under a
//!   localization certificate.
//! * [`coeffs`] - coefficient fields `b`, `sigma` with declared ellipticity /
//!   Lipschitz constants, a catalog of named models, and sampling-based checks.
//! * [`linfp`] - the conservative linear Fokker-Planck solver (Crank-Nicolson
//!   flux with Chang-Cooper weighting), Dirac starts via mollification, and
//!   coefficient-sensitivity comparisons.
//! * [`kernels`] - Gaussian / stable reference kernels, two-sided kernel
//!   envelope fitting, derivative-bound checks, and localization certificates
//!   extracted from solved paths.
//! * [`nonlinear`] - the Picard iteration on quantile curves, with window
//!   splitting for long horizons and Dirac-start diagnostics.
//! * [`stable`] - the stable-like variant driven by the fractional operator
//!   `-|Delta|^{alpha_s/2}[a(x) u]`, solved spectrally with Strang splitting.
//! * [`particles`] - the interacting particle system with per-step empirical
//!   quantile coupling and deterministic stream-per-particle noise.
//! * [`verify`] - the executable gate suite tying all of the above to pinned
//!   tolerances, plus [`io`] for reproducible artifact emission.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod coeffs;
pub mod defaults;
pub mod density;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod linfp;
pub mod nonlinear;
pub mod particles;
pub mod stable;
pub mod verify;

pub use density::Density;
pub use grid::Grid;
