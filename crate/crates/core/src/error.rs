use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("noise temperature diverges at mu = 0")]
    DivergentTemperature,
    #[error("lookup outside kernel domain: lag {lag}")]
    DomainError { lag: f64 },
    #[error("numerics: {0}")]
    Numerics(String),
    #[error("covariance not positive semi-definite (min eigenvalue {min_eig:e}, trace {trace:e})")]
    KernelNotPsd { min_eig: f64, trace: f64 },
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("ill-conditioned system (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("singular discretized action")]
    SingularAction,
    #[error("degenerate propagation: |alpha0 + A| = {0:e}")]
    DegeneratePropagation(f64),
    #[error("normalizability lost: Re(alpha) = {0:e}")]
    NormalizabilityLost(f64),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("at {point}: {source}")]
    AtPoint { point: String, source: Box<Error> },
}

impl Error {
    pub fn at(self, point: impl Into<String>) -> Self {
        Error::AtPoint { point: point.into(), source: Box::new(self) }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
