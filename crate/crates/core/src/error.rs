use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("tangent vector is based at a different point")]
    BaseMismatch,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("non-finite value produced: {0}")]
    NonFinite(String),
    #[error("barycenter solver did not converge")]
    NotConverged,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a probability vector: {0}")]
    NotProbabilityVector(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("operation requires a Euclidean space")]
    NotEuclidean,
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("matrix is not row stochastic: {0}")]
    NotRowStochastic(String),
    #[error("no perfect matching on the positive support")]
    MatchingFailed,
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("no majorization certificate available")]
    NoCertificate,
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("functional arity {found} does not match required {expected}")]
    ArityMismatch { expected: String, found: usize },
    #[error("alpha must be >= 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("functional {0} is not permutation invariant")]
    NotSymmetric(String),
    #[error("unknown gauge: {0}")]
    UnknownGauge(String),
    #[error("precondition not met: {0}")]
    PreconditionNotMet(String),
}

pub type Result<T> = std::result::Result<T, Error>;
