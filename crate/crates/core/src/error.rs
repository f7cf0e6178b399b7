use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration value.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Malformed data (negative counts, non-integer cells, shape mismatch).
    #[error("invalid data: {0}")]
    Data(String),

    /// The M-matrix domain condition of the log-det constraint failed;
    /// the optimizer must reject the step that produced this point.
    #[error("acyclicity domain violation: {0}")]
    Domain(String),

    /// Training aborted (non-finite objective or persistent domain errors).
    /// Carries the reason; the partial trace is kept on the trainer side.
    #[error("training aborted: {0}")]
    Aborted(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
