//! Error type shared across the simulator.

use crate::topology::NodeId;

/// Unified error for configuration, construction, and run-time failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric or structural argument is outside its legal range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two nodes are not connected in the topology.
    #[error("no path between node {from} and node {to}")]
    NoPath { from: NodeId, to: NodeId },

    /// An objective can never be scheduled: it needs more memories at some
    /// node than the node physically has, so backoff would loop forever.
    #[error(
        "objective {objective} needs {needed} memories at node {node}, \
         which only has {available}"
    )]
    InfeasibleObjective {
        objective: u64,
        node: NodeId,
        needed: u32,
        available: u32,
    },

    /// A collection that must be non-empty was empty.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A configuration file failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure, tagged with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Serialization or deserialization failure.
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Convenience constructor for [`Error::InvalidParameter`].
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
