use std::path::PathBuf;

use thiserror::Error;

/// Exit code of a successful run.
pub const EXIT_OK: u8 = 0;
/// Invalid configuration, flags or parameters.
pub const EXIT_CONFIG: u8 = 2;
/// Unreadable, unwritable or malformed files.
pub const EXIT_IO: u8 = 3;
/// Numerical failure inside a stage.
pub const EXIT_NUMERIC: u8 = 4;
/// The solver hit its iteration cap and non-convergence was made fatal.
pub const EXIT_NOT_CONVERGED: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: njcr_core::Error,
    },
    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use njcr_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Read { .. } => EXIT_IO,
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            CliError::Stage { source, .. } => match source {
                E::Io { .. } | E::Header(_) | E::SizeMismatch { .. } | E::NonFinite(_) => EXIT_IO,
                E::InvalidParameter(_) | E::Dimensions(_) | E::Mismatch(_) => EXIT_CONFIG,
                E::Numerical(_) => EXIT_NUMERIC,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a stage name to core errors.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageContext<T> for njcr_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
