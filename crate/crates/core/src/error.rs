use thiserror::Error;

#[derive(Debug, Error)]
pub enum QaoaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("approximation ratio undefined: {0}")]
    UndefinedRatio(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl QaoaError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            QaoaError::InvalidArgument(_) => "invalid-argument",
            QaoaError::ResourceLimit(_) => "resource-limit",
            QaoaError::UndefinedRatio(_) => "undefined-ratio",
            QaoaError::Numerical(_) => "numerical",
            QaoaError::Unsupported(_) => "unsupported",
            QaoaError::Io(_) => "io",
            QaoaError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, QaoaError>;

pub(crate) fn invalid(msg: impl Into<String>) -> QaoaError {
    QaoaError::InvalidArgument(msg.into())
}
