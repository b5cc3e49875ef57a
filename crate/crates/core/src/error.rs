use std::path::PathBuf;

use crate::geometry::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible antenna deployment: {} violation(s), first at {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidDeployment(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("singular geometry: {0}")]
    Singular(String),

    #[error("degenerate channel: {0}")]
    Degenerate(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

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
