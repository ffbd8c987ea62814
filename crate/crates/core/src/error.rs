use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace} instead of 1")]
    TraceNotOne { trace: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("matrix is not unitary: max |U^dagger U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("Hermitian eigensolver did not converge")]
    ConvergenceFailure,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid qubit parameters: {0}")]
    InvalidParams(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("invalid entropy order q = {0}")]
    InvalidOrder(f64),

    #[error("operation supports dimension {supported} only, got {found}")]
    UnsupportedDimension { supported: usize, found: usize },

    #[error("noise strength {0} outside [0, 1]")]
    InvalidStrength(f64),

    #[error("angle {0} deg outside [0, 90]")]
    InvalidAngle(f64),

    #[error("count record for {setting} has zero total counts")]
    EmptyRecord { setting: String },

    #[error("measurement set is not informationally complete (rank {rank} of {needed})")]
    UnderdeterminedSet { rank: usize, needed: usize },

    #[error("bootstrap statistic failed on resample {index}: {source}")]
    StatisticFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("theta = {theta} deg, stage `{stage}`: {source}")]
    Stage {
        theta: f64,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
