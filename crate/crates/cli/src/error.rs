use std::fmt;
use std::path::{Path, PathBuf};

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (exit 2).
    Config(String),
    /// A stage's input artifact is missing (exit 3).
    Upstream {
        path: PathBuf,
        stage: &'static str,
    },
    /// The LLM, retriever or similarity endpoint failed (exit 4).
    Endpoint(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Upstream { .. } => 3,
            CliError::Endpoint(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn upstream(path: &Path, stage: &'static str) -> Self {
        CliError::Upstream { path: path.to_owned(), stage }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Upstream { path, stage } => {
                write!(f, "missing input {}; run `ragate {stage}` first", path.display())
            }
            CliError::Endpoint(m) => write!(f, "endpoint failure: {m}"),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ragate_core::Error> for CliError {
    fn from(e: ragate_core::Error) -> Self {
        use ragate_core::Error as E;
        let msg = e.to_string();
        match e.root() {
            E::Config(_) | E::InvalidArgument(_) => CliError::Config(msg),
            E::Transport { .. } | E::Protocol(_) => CliError::Endpoint(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
