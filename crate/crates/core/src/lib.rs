//! Extreme value mixture modelling for nonnegative data with an inlier atom at zero.
//!
//! The central distribution mixes three components:
//!
//! - a point mass `phi1` at exactly zero (the inliers),
//! - a gamma(`eta`, `beta`) bulk truncated to `(0, u)` carrying mass `1 - phi1 - phi2`,
//! - a generalized Pareto tail above the threshold `u` carrying mass `phi2`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `evinlier` companion crate; the
//! parallel entry points here take a [`Runner`] so callers decide how
//! replications are scheduled.
//!
//! Module map:
//!
//! - [`specfun`]: log-gamma, digamma, trigamma, incomplete gamma, gamma quantiles.
//! - [`quad`]: adaptive Gauss-Kronrod integration.
//! - [`model`]: densities, CDFs, quantiles and risk measures.
//! - [`sampler`]: exact inverse-CDF sampling.
//! - [`optim`]: Nelder-Mead simplex minimisation.
//! - [`estimation`]: likelihoods, starting values and maximum likelihood fits.
//! - [`inference`]: Fisher information, asymptotic intervals, parametric bootstrap.
//! - [`diagnostics`]: goodness of fit, threshold diagnostics, return levels.
//! - [`harness`]: Monte Carlo simulation studies.
#![no_std]
// Negated comparisons are how NaN parameters get rejected; series coefficients
// keep their full reference precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;

pub mod diagnostics;
mod error;
pub mod estimation;
pub mod harness;
pub mod inference;
pub mod model;
pub mod optim;
mod parallel;
pub mod quad;
pub mod sampler;
pub mod specfun;
mod stats;

pub use error::{Error, Result};
pub use estimation::{Dataset, FitOptions, FitResult};
pub use model::{EvmmParams, FevimmParams, FevmmParams, GpdParams, ModelKind, ModelParams};
pub use parallel::{Runner, Sequential};
pub use stats::{empirical_quantile, mean, sample_variance, spearman};
