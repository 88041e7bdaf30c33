use std::path::PathBuf;

/// Errors surfaced by the command-line driver, each with a fixed exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] phydrl_core::Error),
    #[error("training aborted: {0}")]
    TrainingAborted(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 4,
            CliError::Core(phydrl_core::Error::InvalidConfig(_) | phydrl_core::Error::InvalidSpec(_)) => 4,
            CliError::Core(phydrl_core::Error::DegenerateRow { .. }) => 4,
            CliError::Core(phydrl_core::Error::Infeasible { .. }) => 2,
            CliError::TrainingAborted(_) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
