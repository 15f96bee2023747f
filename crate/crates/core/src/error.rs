use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model, coupling, or family parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Sizes of fields, maps, or couplings disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A linear system could not be factored.
    #[error("solver error: {0}")]
    Solver(String),

    /// NaN/inf produced or an iteration broke down.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
