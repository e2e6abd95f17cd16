use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate dressed basis: {0}")]
    DegenerateBasis(String),

    #[error("dipole angle undefined: {0}")]
    UndefinedAngle(String),

    #[error("propagation failed at t = {time}: {reason}")]
    Propagation { time: f64, reason: String },

    #[error("steady state is not unique (null space dimension {dim})")]
    NonUniqueSteadyState { dim: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
