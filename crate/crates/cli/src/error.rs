use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: line {line}, column '{column}': {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Core(#[from] twostage::Error),
    #[error("model '{model}': {source}")]
    Model {
        model: String,
        #[source]
        source: twostage::Error,
    },
    #[error("bootstrap unreliable for model '{model}': {failed} of {replicates} replicates failed")]
    UnreliableBootstrap {
        model: String,
        failed: usize,
        replicates: usize,
    },
    #[error("bias correction blew up for model(s): {}", .0.join(", "))]
    CorrectionBlowup(Vec<String>),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::FileNotFound(_) | CliError::Parse { .. } | CliError::ConfigInvalid(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Model { source, .. } if source.is_numerical() => 3,
            CliError::Model { .. } => 2,
            CliError::CorrectionBlowup(_) => 3,
            CliError::UnreliableBootstrap { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::ConfigInvalid("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(twostage::Error::RankDeficient { rcond: 0.0 }).exit_code(), 3);
        assert_eq!(CliError::CorrectionBlowup(vec!["m".into()]).exit_code(), 3);
        assert_eq!(CliError::Core(twostage::Error::MissingCovariate("z".into())).exit_code(), 2);
        let e = CliError::UnreliableBootstrap { model: "m".into(), failed: 9, replicates: 100 };
        assert_eq!(e.exit_code(), 4);
    }
}
