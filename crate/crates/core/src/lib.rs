//! Decentralized prototype learning: incremental LVQ nodes that gossip their
//! prototype sets to random peers, gated by a Jensen-Shannon distance test
//! and kept small by per-label DBSCAN merging, plus a deterministic
//! discrete-event simulator to run populations of such nodes.

// NaN must fail range checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compress;
pub mod data;
pub mod metrics;
pub mod node;
pub mod prototype;
pub mod sim;
pub mod similarity;

pub use compress::{compress_model, CompressionConfig};
pub use metrics::{run_experiment, ExperimentConfig, MetricsRecord, Scenario};
pub use node::{GossipMessage, NodeConfig, NodeId, NodeState};
pub use prototype::{Label, Prototype, PrototypeModel, Sample};
pub use sim::{run_simulation, SimOutcome, SimSummary};
pub use similarity::{is_it_worthy, js_distance, KdeConfig};
