use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unresolvable configuration; `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Module(#[from] scatterlab::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("acceptance failures: {}", .0.join(", "))]
    Acceptance(Vec<String>),
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 configuration, 3 numerical, 4 acceptance failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse { .. } | CliError::Io { .. } => 2,
            CliError::Module(e) if e.is_config() => 2,
            CliError::Module(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}
