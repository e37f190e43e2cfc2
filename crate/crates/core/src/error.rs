use thiserror::Error;

use crate::instance::VehicleId;
use crate::network::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("no path from node {from} to node {to}")]
    NoPath { from: NodeId, to: NodeId },

    #[error("vehicle {vehicle} references unknown node {node}")]
    Reference { vehicle: VehicleId, node: NodeId },

    #[error("vehicle {vehicle}: {reason}")]
    Vehicle { vehicle: VehicleId, reason: String },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("assignment does not match model: {0}")]
    DimensionMismatch(String),

    #[error("instance too large for exhaustive search: {0}")]
    Oversized(String),

    #[error("no feasible plan: {0}")]
    Infeasible(String),

    #[error("plan rejected: {0}")]
    InvalidPlan(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
