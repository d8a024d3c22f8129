use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("inconsistent m rule: {0}")]
    InconsistentMRule(String),
    #[error("malformed config JSON: {0}")]
    MalformedJson(String),
    #[error("cannot read config: {0}")]
    Unreadable(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial {trial} (substream {stream_id}) failed: {source}")]
    Trial {
        trial: u64,
        stream_id: u64,
        #[source]
        source: majlab_core::Error,
    },
    #[error("trial {trial} (substream {stream_id}) panicked: {message}")]
    Panic {
        trial: u64,
        stream_id: u64,
        message: String,
    },
    #[error(transparent)]
    Numerical(#[from] majlab_core::Error),
    #[error("refusing to emit a summary with no trials")]
    EmptyTrials,
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 2 config, 3 numerical, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Trial { .. } | Self::Panic { .. } | Self::Numerical(_) | Self::EmptyTrials => 3,
            Self::Io { .. } => 4,
        }
    }
}
