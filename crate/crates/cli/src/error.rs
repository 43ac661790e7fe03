use std::fmt;

use bitext_core::Error as CoreError;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2. `field` is the dotted config path or flag at fault.
    Config { field: String, msg: String },
    /// Exit 3.
    Data(String),
    /// Exit 4.
    Numeric(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// Prefixes the message with a stage name, keeping the classification.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            CliError::Config { field, msg } => CliError::Config {
                field,
                msg: format!("[{stage}] {msg}"),
            },
            CliError::Data(m) => CliError::Data(format!("[{stage}] {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("[{stage}] {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, msg } => write!(f, "config error at {field}: {msg}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else if let CoreError::InvalidArgument(m) = e {
            CliError::config("argument", m)
        } else {
            CliError::Data(e.to_string())
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, name: &str) -> CliResult<T>;
}

impl<T, E: Into<CliError>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, name: &str) -> CliResult<T> {
        self.map_err(|e| e.into().in_stage(name))
    }
}
