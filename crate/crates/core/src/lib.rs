//! Rumor mitigation by budgeted edge deletion on directed social graphs.
//!
//! The crate bundles a discrete-time SIR simulator, hand-crafted node and edge
//! features, a link/route message-passing network with a rumor-aware edge
//! scoring head, REINFORCE training over randomized graphs, and the classical
//! deletion heuristics used for comparison.

pub mod baselines;
pub mod environment;
pub mod error;
pub mod features;
pub mod graph;
pub mod neural;
pub mod policy;
pub mod propagation;
pub mod report;
pub mod training;

pub use error::{Error, Result};
