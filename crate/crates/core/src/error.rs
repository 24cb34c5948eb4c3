use thiserror::Error;

use crate::topo::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph is disconnected ({} components)", .components.len())]
    Disconnected { components: Vec<Vec<NodeId>> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unreachable destinations: {0:?}")]
    Unreachable(Vec<NodeId>),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
