use std::path::PathBuf;

use plume::PlumeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] PlumeError),

    #[error("config file {path}: {detail}")]
    ConfigFile { path: PathBuf, detail: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {detail}")]
    Output { path: PathBuf, detail: String },
}

impl CliError {
    /// Stable, kebab-case name printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::ConfigFile { .. } => "config",
            CliError::Usage(_) => "usage",
            CliError::Output { .. } => "io",
        }
    }

    /// 2 for problems with the inputs (paths, formats, configuration), 1 for
    /// failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                PlumeError::Io { .. }
                | PlumeError::BadMagic { .. }
                | PlumeError::VersionMismatch { .. }
                | PlumeError::Truncated { .. }
                | PlumeError::Malformed { .. }
                | PlumeError::Csv { .. }
                | PlumeError::MissingSection(_)
                | PlumeError::Config(_)
                | PlumeError::AbsentClass(_) => 2,
                _ => 1,
            },
            CliError::ConfigFile { .. } | CliError::Usage(_) => 2,
            CliError::Output { .. } => 1,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.into(),
            detail: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
