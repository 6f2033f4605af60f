use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("mismatched runs: {0}")]
    Mismatch(String),
    #[error("malformed bundle {path}: {msg}")]
    Bundle { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Process exit code: 1 for solver failures, 2 for everything the user must fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Solver(_) => 1,
            _ => 2,
        }
    }
}
