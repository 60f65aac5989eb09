//! Anchor/replica trees.
//!
//! Every anchor client owns a tree: each node has `r` replicas, each replica
//! copies its parent's model and drops a window of its parent's samples,
//! recursively down to the anchor's depth.

mod config;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use config::{AggregationMode, ClientTree, FederationConfig};

use crate::data::{perturb, Dataset, PerturbationMode};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Optimizer, OptimizerKind};
use crate::seed::derive_seed;

/// `[anchor]` for anchors, `[anchor, replica, ...]` for replicas, replica
/// indices starting at 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodePath(Vec<u64>);

impl NodePath {
    pub fn anchor(index: u64) -> Self {
        NodePath(vec![index])
    }

    pub fn child(&self, replica_index: usize) -> Self {
        let mut p = self.0.clone();
        p.push(replica_index as u64);
        NodePath(p)
    }

    pub fn elements(&self) -> &[u64] {
        &self.0
    }

    pub fn anchor_index(&self) -> u64 {
        self.0[0]
    }

    /// 0 for anchors.
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Deterministic per-node seed from the run's root seed and the node path.
pub fn derive_node_seed(root_seed: u64, path: &NodePath) -> u64 {
    derive_seed(root_seed, path.elements())
}

/// One anchor or replica with its own data, parameters, optimizer state and
/// replicas.
#[derive(Clone, Debug)]
pub struct ReplicaNode {
    pub path: NodePath,
    pub params: ModelParams,
    pub dataset: Dataset,
    pub optimizer: Optimizer,
    pub children: Vec<ReplicaNode>,
}

impl ReplicaNode {
    pub fn anchor(index: u64, params: ModelParams, dataset: Dataset, optimizer: OptimizerKind) -> Self {
        ReplicaNode {
            path: NodePath::anchor(index),
            params,
            dataset,
            optimizer: optimizer.build(),
            children: Vec::new(),
        }
    }

    pub fn is_anchor(&self) -> bool {
        self.path.depth() == 0
    }

    /// Nodes in this subtree, this node included.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ReplicaNode::node_count).sum::<usize>()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ReplicaNode)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    /// Replicas adopt their parent's parameters, recursively.
    pub fn sync_children(&mut self) {
        let params = &self.params;
        for child in &mut self.children {
            child.params.clone_from(params);
            child.sync_children();
        }
    }
}

/// How replica datasets are derived from their parent's.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub mode: PerturbationMode,
    pub percent: f64,
    /// Root seed; each child's tie-break seed derives from it and the path.
    pub seed: u64,
}

/// Gives `node` `replicas` children per level down to `depth` levels. Each
/// child copies the parent's parameters and optimizer kind and perturbs the
/// parent's dataset with its own 1-based index.
pub fn create_replicas(
    node: &mut ReplicaNode,
    replicas: usize,
    depth: usize,
    perturbation: &Perturbation,
) -> Result<()> {
    if depth == 0 {
        return Ok(());
    }
    let mut children = Vec::with_capacity(replicas);
    for l in 1..=replicas {
        let path = node.path.child(l);
        let seed = derive_node_seed(perturbation.seed, &path);
        let dataset = perturb(&node.dataset, perturbation.mode, perturbation.percent, l, seed)
            .map_err(|e| Error::ReplicaCreation {
                path: path.to_string(),
                source: Box::new(e),
            })?;
        let mut optimizer = node.optimizer.clone();
        reset_optimizer(&mut optimizer);
        let mut child = ReplicaNode {
            path,
            params: node.params.clone(),
            dataset,
            optimizer,
            children: Vec::new(),
        };
        create_replicas(&mut child, replicas, depth - 1, perturbation)?;
        children.push(child);
    }
    node.children = children;
    Ok(())
}

fn reset_optimizer(opt: &mut Optimizer) {
    if let Optimizer::Adam { state, .. } = opt {
        *state = Default::default();
    }
}

/// `m + sum_i (r_i + r_i^2 + ... + r_i^d_i)`.
pub fn total_model_count(config: &FederationConfig) -> usize {
    config
        .clients
        .iter()
        .map(|c| 1 + (1..=c.depth).map(|k| c.replicas.pow(k as u32)).sum::<usize>())
        .sum()
}
