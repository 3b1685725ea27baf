use std::path::PathBuf;

use thiserror::Error;
use twistbad_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const INVARIANT: i32 = 4;
    pub const WARNING: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } => core_exit_code(source),
            CliError::Config(_) => exit::VALIDATION,
            CliError::Io { .. } | CliError::Csv(_) => exit::IO,
        }
    }
}

pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Parse { .. }
        | CoreError::Validation(_)
        | CoreError::Domain(_)
        | CoreError::IndexOutOfRange { .. }
        | CoreError::Precondition(_)
        | CoreError::CurveSpec(_) => exit::VALIDATION,
        CoreError::BudgetExceeded { .. } => exit::BUDGET,
        CoreError::Fact1Violation { .. }
        | CoreError::Fact2Violation { .. }
        | CoreError::GammaTooLarge { .. }
        | CoreError::Invariant { .. } => exit::INVARIANT,
        CoreError::RangeExhausted { .. } => exit::WARNING,
    }
}

/// Tags a library error with the pipeline stage that raised it.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for Result<T, CoreError> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
