use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(dbs_traj_core::Error),

    #[error("{0}")]
    Runtime(dbs_traj_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// Unreadable or inconsistent input to `compare`, or bad command-line use.
    #[error("{0}")]
    Input(String),

    #[error("{failed} of {total} criteria failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
            CliError::ValidationFailed { .. } => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let core = dbs_traj_core::Error::invalid("n_rays", "must be odd and ≥ 9");
        assert_eq!(CliError::Config(core.clone()).exit_code(), 1);
        assert_eq!(CliError::Input("x".into()).exit_code(), 1);
        assert_eq!(CliError::Runtime(core).exit_code(), 2);
        assert_eq!(CliError::ValidationFailed { failed: 1, total: 8 }.exit_code(), 3);
    }
}
