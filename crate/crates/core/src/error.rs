use thiserror::Error;

/// Errors raised by game construction, the mechanism and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("share {x} outside the domain {domain}")]
    Domain { x: f64, domain: &'static str },

    #[error("size mismatch: expected {expected} entries, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid valuation: {0}")]
    InvalidValuation(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("bidder {bidder}: bid {bid} is infeasible (budget {budget})")]
    InfeasibleBid {
        bidder: usize,
        bid: f64,
        budget: f64,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("index out of range: {what} {index} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("equilibrium did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
