use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("nexus parse error at line {line}: {msg}")]
    Nexus { line: usize, msg: String },

    #[error("newick parse error at offset {offset}: {msg}")]
    Newick { offset: usize, msg: String },

    #[error("parameter file error: {0}")]
    Par(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid tree: {0}")]
    Tree(String),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
