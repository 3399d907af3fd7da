use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point set is empty")]
    EmptyDomain,

    #[error("no path between vertices {from} and {to}")]
    NoPath { from: usize, to: usize },

    #[error("candidate edge set still changing after {doublings} budget doublings (final k = {k})")]
    UnstablePrune { k: usize, doublings: usize },

    #[error("brute force is limited to {limit} particles, got {n}")]
    GuardExceeded { n: usize, limit: usize },

    #[error("particle {0} is not covered by the tree")]
    Coverage(usize),

    #[error("window policy: {0}")]
    WindowPolicy(String),

    #[error("regression: {0}")]
    Regression(String),

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
