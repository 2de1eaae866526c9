use thiserror::Error;

use crate::{ChannelId, NodeId};

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no channel available to select from")]
    NoChannel,

    #[error("no slot frame for channel {channel}")]
    MissingFrame { channel: ChannelId },

    #[error("channel {channel} is not in the available set of node {node}")]
    ChannelNotAvailable { node: NodeId, channel: ChannelId },

    #[error("node {0} does not exist")]
    UnknownNode(NodeId),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SimError::InvalidConfig(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }
}
