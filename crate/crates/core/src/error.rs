use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:.3e} below floor {floor:.3e})")]
    NotPsd { min_eigenvalue: f64, floor: f64 },
    #[error("matrix is singular or not positive definite")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("UE placement acceptance probability {0:.2e} is below 1e-3")]
    GeometryInfeasible(f64),
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("{pilots} pilots exceed the coherence block of {tau_c} samples")]
    PilotBudgetExceeded { pilots: usize, tau_c: usize },

    #[error("estimate covariance trace {0:.3e} is too small to normalize a precoder")]
    DegenerateEstimateStatistics(f64),
    #[error("stacked estimate Gram matrix is rank deficient (condition number {0:.3e})")]
    RankDeficient(f64),
    #[error("{streams} streams cannot be zero-forced with {antennas} antennas")]
    TooManyUes { streams: usize, antennas: usize },

    #[error("estimate covariance trace {0:.3e} is degenerate for a nonzero transmit power")]
    DegenerateTrace(f64),
    #[error("effective noise covariance of UE {ue} is not positive definite")]
    IndefiniteEffectiveNoise { ue: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
