use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode selection: {0}")]
    ModeIndex(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (max deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("unphysical state: {0}")]
    Unphysical(String),
    #[error("state is not pure: det(2V) = {0}")]
    NotPure(f64),
    #[error("state has non-zero displacement")]
    Displaced,
    #[error("probability evaluated to {0:.3e}, below the roundoff clamp")]
    NegativeProbability(f64),
    #[error("matrix of dimension {0} is too large for brute-force enumeration")]
    OracleTooLarge(usize),
    #[error("heralding pattern has zero probability")]
    ZeroProbability,
    #[error("invalid circuit: {0}")]
    Circuit(String),
    #[error("invalid target: {0}")]
    Target(String),
    #[error("objective is not finite at the evaluation point")]
    NonFinite,
    #[error("infeasible configuration: the heralding pattern has zero probability for every parameter tried")]
    Infeasible,
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[cfg(feature = "cli")]
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[cfg(feature = "cli")]
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
