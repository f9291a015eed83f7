use thiserror::Error;

/// Errors raised by the allocation engine and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfiguration(String),

    #[error("infeasible rate: {requested} bits requested but at most {capacity} can be loaded")]
    InfeasibleRate { requested: u32, capacity: u32 },

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
