//! Crate-wide error type.
//!
//! All fallible operations return [`Result`]. Errors are grouped by what went
//! wrong rather than by module: bad inputs, size guards on exhaustive
//! routines, unsupported mode combinations, and I/O or format problems when
//! reading and writing artifacts.

use std::fmt;

/// Errors produced by grid construction, cost evaluation, dynamics, routing,
/// experiments, and file I/O.
#[derive(Debug)]
pub enum Error {
    /// Grid parameters out of range (dimension, side length, or total size).
    InvalidGrid(String),
    /// A node id does not belong to the grid it was used with.
    InvalidNode { id: u64, population: usize },
    /// An operation over a set of nodes received an empty set.
    EmptySourceSet,
    /// A parameter failed validation (alpha, beta, weights, epsilon, ...).
    InvalidParameter(String),
    /// A link from an agent to itself was requested.
    SelfLink,
    /// The requested link target is already present in the agent's link set.
    AlreadyLinked { agent: u64, target: u64 },
    /// The requested link target is absent from the agent's link set.
    NotLinked { agent: u64, target: u64 },
    /// An exhaustive routine was asked to run above its size guard.
    SizeGuard {
        what: &'static str,
        limit: usize,
        actual: usize,
        hint: &'static str,
    },
    /// The requested mode combination is not supported.
    UnsupportedMode(String),
    /// A file had the wrong shape: bad header, bad version, malformed row.
    Format(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidNode { id, population } => {
                write!(f, "node id {id} out of range for grid with {population} nodes")
            }
            Error::EmptySourceSet => write!(f, "source set must be non-empty"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SelfLink => write!(f, "self-links are not allowed"),
            Error::AlreadyLinked { agent, target } => {
                write!(f, "agent {agent} already links to {target}")
            }
            Error::NotLinked { agent, target } => {
                write!(f, "agent {agent} has no link to {target}")
            }
            Error::SizeGuard { what, limit, actual, hint } => {
                write!(f, "{what} is limited to {limit} nodes (got {actual}); {hint}")
            }
            Error::UnsupportedMode(msg) => write!(f, "unsupported mode: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
