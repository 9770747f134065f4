use std::fmt;

use thiserror::Error;

/// Pipeline stage, named in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Screen,
    Fit,
    Bootstrap,
    Select,
    Sweep,
    Output,
    Simulate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Screen => "screen",
            Stage::Fit => "fit",
            Stage::Bootstrap => "bootstrap",
            Stage::Select => "select",
            Stage::Sweep => "sweep",
            Stage::Output => "output",
            Stage::Simulate => "simulate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {message}")]
    Io { stage: Stage, message: String },
    #[error("{stage}: {message}")]
    Config { stage: Stage, message: String },
    #[error("{stage}: {message}")]
    Numeric { stage: Stage, message: String },
}

impl CliError {
    pub fn io(stage: Stage, message: impl Into<String>) -> Self {
        CliError::Io { stage, message: message.into() }
    }

    pub fn config(stage: Stage, message: impl Into<String>) -> Self {
        CliError::Config { stage, message: message.into() }
    }

    /// Process exit status: 2 for I/O, 3 for configuration, 4 for numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Config { .. } => 3,
            CliError::Numeric { .. } => 4,
        }
    }

    /// Classify a library error raised during `stage`.
    pub fn from_core(stage: Stage, err: esubset::Error) -> Self {
        use esubset::Error as E;
        let message = err.to_string();
        match err {
            E::Io(_) | E::Csv(_) => CliError::Io { stage, message },
            E::InvalidInput(_) | E::DimensionMismatch { .. } => CliError::Config { stage, message },
            E::Singular(_) | E::Degenerate(_) | E::NonConvergence { .. } => CliError::Numeric { stage, message },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attach a stage to library results.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> CliResult<T>;
}

impl<T> AtStage<T> for esubset::Result<T> {
    fn at(self, stage: Stage) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}
