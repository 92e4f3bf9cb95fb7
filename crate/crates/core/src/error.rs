use alloc::string::String;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error in {function}: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    /// Parameter values violate the model constraints.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A probability beyond the reachable mass was requested (e.g. p = 1 with an unbounded tail).
    #[error("unbounded support: quantile of order {p} does not exist")]
    UnboundedSupport { p: f64 },

    /// The tail mean diverges (GPD shape xi >= 1).
    #[error("infinite mean: tail shape xi = {xi} >= 1")]
    InfiniteMean { xi: f64 },

    /// The bulk density vanishes at the threshold.
    #[error("degenerate bulk: {0}")]
    DegenerateBulk(String),

    /// No positive scale makes the density differentiable at the threshold.
    #[error("no differentiable matching exists: {0}")]
    NoDifferentiableMatching(String),

    /// The dataset does not support the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An information matrix could not be inverted.
    #[error("singular information matrix ({regime}): condition number {condition:.3e}")]
    SingularInformation { regime: &'static str, condition: f64 },

    /// Too many refits or replications failed to converge.
    #[error("convergence failure: {failed} of {total} fits did not converge ({context})")]
    ConvergenceFailure {
        failed: usize,
        total: usize,
        context: String,
    },

    /// Numerical integration did not reach the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        function,
        detail: detail.into(),
    }
}
