//! Federated learning simulation with replica trees.
//!
//! Each client (an *anchor*) is cloned into a tree of virtual *replicas* that
//! train on perturbed subsets of their parent's data. After local training,
//! every parent blends its replicas back in with weights proportional to how
//! far each replica drifted, and the server averages the anchors.

pub mod data;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod tree;

pub use error::{Error, Result};
