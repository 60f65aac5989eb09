use serde::{Deserialize, Serialize};

use crate::data::PerturbationMode;
use crate::error::{Error, Result};
use crate::model::{LossKind, OptimizerKind};

/// How a parent combines itself with its replicas after a round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Half parent, half diversity-weighted replicas.
    #[default]
    Diversity,
    /// Uniform mean over the parent and its replicas.
    Simple,
}

/// Replica-tree shape for one client.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientTree {
    /// Replicas per node (branching factor).
    pub replicas: usize,
    /// Percentage of the parent's samples removed per replica.
    pub perturbation: f64,
    pub depth: usize,
}

impl Default for ClientTree {
    fn default() -> Self {
        ClientTree {
            replicas: 3,
            perturbation: 10.0,
            depth: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// One entry per anchor client.
    pub clients: Vec<ClientTree>,
    pub epochs: usize,
    pub rounds: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub perturbation_mode: PerturbationMode,
    pub aggregation: AggregationMode,
    pub seed: u64,
}

impl FederationConfig {
    /// `m` clients sharing one tree shape, with the image-classification
    /// training setup: 10 epochs, 10 rounds, batch 20, SGD at 0.005,
    /// cross-entropy.
    pub fn uniform(m: usize, tree: ClientTree) -> Self {
        FederationConfig {
            clients: vec![tree; m],
            epochs: 10,
            rounds: 10,
            lr: 0.005,
            batch_size: 20,
            optimizer: OptimizerKind::Sgd,
            loss: LossKind::CrossEntropy,
            perturbation_mode: PerturbationMode::Random,
            aggregation: AggregationMode::Diversity,
            seed: 0,
        }
    }

    pub fn clients(&self) -> usize {
        self.clients.len()
    }

    /// Same configuration with every client's replica count set to `r`.
    pub fn with_replicas(mut self, r: usize) -> Self {
        self.clients.iter_mut().for_each(|c| c.replicas = r);
        self
    }

    pub fn with_depth(mut self, d: usize) -> Self {
        self.clients.iter_mut().for_each(|c| c.depth = d);
        self
    }

    pub fn with_perturbation(mut self, p: f64) -> Self {
        self.clients.iter_mut().for_each(|c| c.perturbation = p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients.is_empty() {
            return Err(Error::Config("at least one client is required".into()));
        }
        for (i, c) in self.clients.iter().enumerate() {
            if c.replicas > 0 && c.depth > 0 && !(c.perturbation > 0.0 && c.perturbation < 100.0) {
                return Err(Error::Config(format!(
                    "client {i}: perturbation {} must lie strictly between 0 and 100",
                    c.perturbation
                )));
            }
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.lr)));
        }
        Ok(())
    }
}
