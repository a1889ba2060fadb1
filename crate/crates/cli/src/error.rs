use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Parse(String),

    #[error("invalid configuration at `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("stale artifact {path}: expected hash {expected}, found {found} (rerun with --on-stale recompute)")]
    StaleArtifact { path: String, expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Sim(#[from] kinkgate::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit status for a successful run whose checks did not all pass.
pub const EXIT_CRITERION: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Field { .. } | CliError::StaleArtifact { .. } => 1,
            CliError::Sim(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}
