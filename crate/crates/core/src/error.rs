use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {x} lies outside [-1, 1]")]
    Domain { x: f64 },

    #[error("order {order} exceeds degree {degree}")]
    Order { degree: u32, order: i32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {column} of the sensing matrix has zero norm")]
    DegenerateColumn { column: usize },

    #[error("theta gradient requested at pole sample {sample}")]
    PoleSingularity { sample: usize },

    #[error("grid file: {0}")]
    GridFormat(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its rendered form.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(IoError(err.to_string()))
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::GridFormat(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
