use thiserror::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the tracking library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix expected to be symmetric positive definite failed the
    /// factorization check. `minor` is the 1-based index of the offending
    /// leading principal minor.
    #[error("matrix is not positive definite (leading minor {minor} has non-positive pivot)")]
    NotPositiveDefinite { minor: usize },

    /// Asymmetry beyond the construction tolerance.
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Degrees of freedom outside the domain of the distribution or update.
    #[error("degrees of freedom {value} outside valid domain (must exceed {min})")]
    DegreesOfFreedom { value: f64, min: f64 },

    /// Scalar argument outside a special function's domain, or an otherwise
    /// invalid parameter.
    #[error("domain violation: {0}")]
    Domain(String),

    /// The extent transformation matrix is singular at the evaluation point.
    #[error("transition transformation is singular")]
    SingularTransform,

    /// The scalar root finder failed to bracket a sign change.
    #[error("no root bracketed in ({lo:.3e}, {hi:.3e}]: {context}")]
    NoRoot { lo: f64, hi: f64, context: String },

    /// Moment set admits no inverse Wishart projection.
    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),

    /// Scenario or estimator configuration rejected; the message carries the
    /// offending key path.
    #[error("invalid configuration: {0}")]
    Config(String),
}
