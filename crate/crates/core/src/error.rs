use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("{n_atoms} atoms exceeds the dense limit of {cap} atoms")]
    DimensionLimit { n_atoms: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical contract violated: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub fn param(msg: impl Into<String>) -> Self {
        SimError::InvalidParameter(msg.into())
    }

    /// Process exit code used by the `sim` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Numerical(_) => 3,
            SimError::Io(_) => 1,
            _ => 2,
        }
    }
}
