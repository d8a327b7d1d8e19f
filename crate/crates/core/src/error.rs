use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid spherical point: {0}")]
    InvalidPoint(String),

    #[error("scattering cluster of radius {radius} m around a UE at {distance} m contains the array origin")]
    ClusterContainsArray { distance: f64, radius: f64 },

    #[error("empty scattering cluster")]
    EmptyCluster,

    #[error("invalid scattering cluster: {0}")]
    InvalidCluster(String),

    #[error("invalid covariance matrix: {0}")]
    InvalidCovariance(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("equal-SINR target {target} is infeasible for {users} users (target*(K-1) = {load} >= 1)")]
    InfeasibleSinr { target: f64, users: usize, load: f64 },

    #[error("invalid power control input: {0}")]
    InvalidPower(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("noise power {sigma2:e} is below the positive-definite floor {floor:e}")]
    NoiseFloor { sigma2: f64, floor: f64 },

    #[error("empty hypothesis bank")]
    EmptyBank,

    #[error("{0} failed to converge")]
    ConvergenceFailure(&'static str),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation error: {0}")]
    ConfigValidation(String),

    #[error("malformed result row: {0}")]
    MalformedRow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by the configuration rather than by the computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse { .. }
                | Error::ConfigValidation(_)
                | Error::InfeasibleSinr { .. }
                | Error::InvalidGeometry(_)
                | Error::InvalidPoint(_)
                | Error::InvalidConstellation(_)
                | Error::InvalidScenario(_)
                | Error::InvalidPower(_)
                | Error::ClusterContainsArray { .. }
        )
    }
}
