use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("node {0} is both a fake seed and a mitigation seed")]
    OverlappingSeeds(NodeId),
    #[error("world space has {size:.3e} worlds, above the enumeration limit {limit:.0e}")]
    SpaceTooLarge { size: f64, limit: f64 },
    #[error("the fake campaign cannot reach any node; nothing to mitigate")]
    NoSpread,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
