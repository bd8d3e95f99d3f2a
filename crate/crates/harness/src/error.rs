use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] ropo_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("every seed failed; first error: {message}")]
    AllSeedsFailed { message: String, code: i32 },
    #[error("{failed} of {total} seeds failed")]
    PartialFailure { failed: usize, total: usize },
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable error class, printed by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Core(e) => e.category(),
            HarnessError::Config(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. } => "parse",
            HarnessError::AllSeedsFailed { .. } => "all-seeds-failed",
            HarnessError::PartialFailure { .. } => "partial-failure",
        }
    }

    /// Process exit code: 2 configuration, 3 domain, 4 unsupported, 5 I/O or
    /// unreadable input, 6 some seeds failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) => match e.category() {
                "config" => 2,
                "domain" => 3,
                "unsupported" => 4,
                _ => 1,
            },
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::Parse { .. } => 5,
            HarnessError::AllSeedsFailed { code, .. } => *code,
            HarnessError::PartialFailure { .. } => 6,
        }
    }
}
