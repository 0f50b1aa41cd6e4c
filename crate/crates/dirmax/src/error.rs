use thiserror::Error;

/// Errors produced by net construction, grid operators and experiment runs.
#[derive(Debug, Error)]
pub enum DirmaxError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DirmaxError {
    /// Process exit code for the CLI: 2 for config/parse problems, 3 for
    /// numeric or geometric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DirmaxError::Config(_) | DirmaxError::Parse(_) | DirmaxError::InvalidParameter(_) => 2,
            _ => 3,
        }
    }
}
