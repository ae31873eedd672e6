use std::path::PathBuf;

use csep_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("bifunctions[{index}] needs explicit c1 and c2")]
    ConstantsMissing { index: usize },
    #[error("no reference solution: {0}")]
    OracleUnavailable(String),
    #[error("brute-force search found no common solution")]
    EmptyF,
    #[error("invalid run specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(String),
}

impl HarnessError {
    /// 2 for anything rejected before iterating, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. }
            | HarnessError::Schema { .. }
            | HarnessError::ConstantsMissing { .. }
            | HarnessError::InvalidSpec(_) => 2,
            HarnessError::Core(e) => match e {
                CoreError::ParameterViolation(_)
                | CoreError::IncompatibleInstance(_)
                | CoreError::UnknownConstants(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::InvalidSet(_) => 2,
                _ => 3,
            },
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
