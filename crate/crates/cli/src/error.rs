use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        source: causens_core::Error,
    },
    /// A check ran to completion and reported failure.
    #[error("{0}")]
    Failed(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Tags core errors with the pipeline stage that produced them.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for causens_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
