use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration value failed validation; `field` is the full path,
    /// e.g. `gen.ratios[3]`.
    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(dabound::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Library errors raised while running block `block`, with argument
    /// names rewritten to full config paths.
    pub fn in_block(block: &str) -> impl Fn(dabound::Error) -> CliError + '_ {
        move |e| match e {
            dabound::Error::InvalidArgument { field, message } => CliError::Config {
                field: format!("{block}.{field}"),
                message,
            },
            other => CliError::Core(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                dabound::Error::Io(_) => 1,
                dabound::Error::NonFinite { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
