use thiserror::Error;

use crate::graph::EdgeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("edge {0} is not alive")]
    DeadEdge(EdgeId),

    #[error("edge {0} is not feasible under the retention constraint")]
    InfeasibleEdge(EdgeId),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("simulation exceeded {cap} steps")]
    SimulationDiverged { cap: usize },

    #[error("graph too large for exact enumeration: {nodes} nodes, {edges} edges")]
    TooLargeForExact { nodes: usize, edges: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no feasible deletion set of size {0} exists")]
    NoFeasibleSubset(usize),

    #[error("non-finite loss at episode {episode}: {detail}")]
    NonFinite { episode: usize, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
