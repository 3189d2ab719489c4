//! Network builders, the executable graph, parameter counting and checkpoints.

mod builders;
mod checkpoint;
mod config;
mod graph;

pub use builders::{build, build_apbsn, build_mmbsn, build_smmbsn};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{ArchKind, ArchitectureConfig};
pub use graph::{BranchSpec, ModelGraph, ModelGrads, Node, NodeId, Op, Tape};

/// Exact trainable scalar count (masked taps included).
pub fn count_params(model: &ModelGraph) -> usize {
    model.count_params()
}
