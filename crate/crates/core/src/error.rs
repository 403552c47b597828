use thiserror::Error;

/// Errors raised by the estimators, the assumption checker and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} of the design is identically zero")]
    ZeroColumn(usize),
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("(X'X)P differs from A by {deviation:.3e} (allowed {allowed:.3e})")]
    IncompatiblePair { deviation: f64, allowed: f64 },
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("kernel of A does not match kernel of X (rank A = {rank_a}, rank X'X = {rank_gram})")]
    KernelMismatch { rank_a: usize, rank_gram: usize },
    #[error("P is singular or badly conditioned (condition estimate {condition:.3e})")]
    SingularP { condition: f64 },
    #[error("alternative pseudo-inverse violates A G A = A (residual {residual:.3e})")]
    InvalidPseudoInverse { residual: f64 },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("constraint region is numerically empty at level {s} (least residual correlation {min_level:.3e})")]
    Infeasible { s: f64, min_level: f64 },
    #[error("solver stopped after {iterations} iterations (primal residual {primal:.3e}, dual residual {dual:.3e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },
    #[error("penalized form is not convex: n*Omega - X'X has eigenvalue {min_eigenvalue:.3e}")]
    NonConvexPenalizedForm { min_eigenvalue: f64 },
    #[error("restricted eigenvalue ratio is unbounded: cone vector with alpha'Omega alpha = {quadratic:.3e}")]
    DegenerateRatio { quadratic: f64 },
    #[error("invalid support: {0}")]
    InvalidSupport(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
