use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_diversity, aggregate_simple, average_common};
use super::train::{local_train, TrainSettings};
use super::weights::{compute_div_aggregation_weights, AggregationWeights};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricSet};
use crate::model::{init_params, model_divergence, Head, ModelParams, ModelSpec};
use crate::seed::{derive_seed, TAG_DATA, TAG_INIT};
use crate::tree::{
    create_replicas, AggregationMode, FederationConfig, NodePath, Perturbation, ReplicaNode,
};

/// One client's identity, architecture and local data.
#[derive(Clone, Debug)]
pub struct ClientSetup {
    /// Stable identity; becomes the first element of every node path in the
    /// client's tree and so keys its random streams.
    pub id: u64,
    pub spec: ModelSpec,
    pub dataset: Dataset,
}

impl ClientSetup {
    pub fn new(id: u64, spec: ModelSpec, dataset: Dataset) -> Self {
        ClientSetup { id, spec, dataset }
    }
}

/// An anchor client's architecture and replica tree.
#[derive(Clone, Debug)]
pub struct Anchor {
    pub spec: ModelSpec,
    pub root: ReplicaNode,
}

/// Diversity diagnostics for one parent/replica pair in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityRecord {
    pub parent: NodePath,
    pub child: NodePath,
    pub div: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorRound {
    pub anchor: u64,
    /// Mean training loss of the anchor per local epoch.
    pub losses: Vec<f64>,
    /// Children before parents, siblings in index order.
    pub diversity: Vec<DiversityRecord>,
    pub metrics: Option<MetricSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based.
    pub round: usize,
    pub anchors: Vec<AnchorRound>,
}

#[derive(Clone, Debug)]
pub struct FederationOutcome {
    /// Final model of every anchor, in client order.
    pub models: Vec<ModelParams>,
    /// Anchor models after every round.
    pub history: Vec<Vec<ModelParams>>,
    pub reports: Vec<RoundReport>,
}

/// Result of one node's round: its loss trajectory and the diversity records
/// of its subtree.
#[derive(Clone, Debug, Default)]
pub struct NodeUpdate {
    pub losses: Vec<f64>,
    pub diversity: Vec<DiversityRecord>,
}

/// Initial parameters shared by all methods for a given root seed. Every
/// client draws from the same stream, so clients with equal architectures
/// start from the same model.
pub fn initial_params(spec: &ModelSpec, root_seed: u64) -> Result<ModelParams> {
    init_params(spec, derive_seed(root_seed, &[TAG_INIT]))
}

/// Test data as seen by a given architecture: regression heads narrower
/// than the target matrix are scored on its leading columns.
pub fn test_view<'a>(spec: &ModelSpec, test: &'a Dataset) -> Result<Cow<'a, Dataset>> {
    match (spec.head, test.targets()) {
        (Head::Regression { outputs }, crate::model::Targets::Values(t)) if t.cols() > outputs => {
            Ok(Cow::Owned(test.with_target_prefix(outputs)?))
        }
        _ => Ok(Cow::Borrowed(test)),
    }
}

/// Trains the node on its own data, then each replica subtree, then blends
/// the replicas into the node. Returns the node's resulting parameters.
pub fn client_update(
    node: &mut ReplicaNode,
    spec: &ModelSpec,
    config: &FederationConfig,
    round: usize,
) -> Result<ModelParams> {
    Ok(update_node(node, spec, config, round)?.0)
}

pub(crate) fn update_node(
    node: &mut ReplicaNode,
    spec: &ModelSpec,
    config: &FederationConfig,
    round: usize,
) -> Result<(ModelParams, NodeUpdate)> {
    let settings = TrainSettings::from(config);
    let losses = local_train(node, spec, &settings, round).map_err(|e| at_node(e, round, &node.path))?;
    let mut update = NodeUpdate {
        losses,
        diversity: Vec::new(),
    };
    if node.children.is_empty() {
        return Ok((node.params.clone(), update));
    }

    let child_updates: Vec<NodeUpdate> = node
        .children
        .par_iter_mut()
        .map(|child| update_node(child, spec, config, round).map(|(_, u)| u))
        .collect::<Result<_>>()?;
    for u in child_updates {
        update.diversity.extend(u.diversity);
    }

    let wrap = |e| at_node(e, round, &node.path);
    let divs: Vec<f64> = node
        .children
        .iter()
        .map(|c| model_divergence(&node.params, &c.params))
        .collect::<Result<_>>()
        .map_err(wrap)?;
    let children: Vec<&ModelParams> = node.children.iter().map(|c| &c.params).collect();
    let (blended, alpha) = match config.aggregation {
        AggregationMode::Diversity => {
            let alpha = compute_div_aggregation_weights(&divs).map_err(wrap)?;
            (aggregate_diversity(&node.params, &children, &alpha).map_err(wrap)?, alpha)
        }
        AggregationMode::Simple => (
            aggregate_simple(&node.params, &children).map_err(wrap)?,
            AggregationWeights::uniform(children.len()),
        ),
    };
    for ((child, &div), &a) in node.children.iter().zip(&divs).zip(alpha.values()) {
        update.diversity.push(DiversityRecord {
            parent: node.path.clone(),
            child: child.path.clone(),
            div,
            alpha: a,
        });
    }
    node.params = blended;
    Ok((node.params.clone(), update))
}

fn at_node(e: Error, round: usize, path: &NodePath) -> Error {
    match e {
        Error::AtNode { .. } | Error::NonFiniteLoss { .. } => e,
        other => Error::AtNode {
            round,
            path: path.to_string(),
            source: Box::new(other),
        },
    }
}

/// One federation round: replicas take their parent's parameters, every
/// anchor runs [`client_update`], the server averages the anchors' common
/// layers uniformly and broadcasts them back. Personalized layers stay with
/// their anchor. Returns the averaged common layers.
pub fn server_round(anchors: &mut [Anchor], config: &FederationConfig, round: usize) -> Result<ModelParams> {
    Ok(run_round(anchors, config, round)?.0)
}

fn run_round(
    anchors: &mut [Anchor],
    config: &FederationConfig,
    round: usize,
) -> Result<(ModelParams, Vec<NodeUpdate>)> {
    let updates: Vec<NodeUpdate> = anchors
        .par_iter_mut()
        .map(|a| {
            a.root.sync_children();
            update_node(&mut a.root, &a.spec, config, round).map(|(_, u)| u)
        })
        .collect::<Result<_>>()?;
    let global = {
        let models: Vec<&ModelParams> = anchors.iter().map(|a| &a.root.params).collect();
        average_common(&models)?
    };
    for a in anchors.iter_mut() {
        a.root.params.copy_common_from(&global)?;
    }
    Ok((global, updates))
}

/// Builds every anchor and its replica tree from the configuration.
pub fn build_forest(config: &FederationConfig, clients: &[ClientSetup]) -> Result<Vec<Anchor>> {
    config.validate()?;
    if clients.len() != config.clients() {
        return Err(Error::Config(format!(
            "configuration describes {} clients but {} datasets were given",
            config.clients(),
            clients.len()
        )));
    }
    let data_seed = derive_seed(config.seed, &[TAG_DATA]);
    clients
        .iter()
        .zip(&config.clients)
        .map(|(client, tree)| {
            let params = initial_params(&client.spec, config.seed)?;
            let mut root = ReplicaNode::anchor(client.id, params, client.dataset.clone(), config.optimizer);
            let perturbation = Perturbation {
                mode: config.perturbation_mode,
                percent: tree.perturbation,
                seed: data_seed,
            };
            create_replicas(&mut root, tree.replicas, tree.depth, &perturbation)?;
            Ok(Anchor {
                spec: client.spec.clone(),
                root,
            })
        })
        .collect()
}

/// Full protocol: build the forest, run `config.rounds` rounds and report
/// after each. When a test set is given, every anchor's model (global common
/// layers plus its own personalized layers) is evaluated after each round.
pub fn run_federation(
    config: &FederationConfig,
    clients: &[ClientSetup],
    test: Option<&Dataset>,
) -> Result<FederationOutcome> {
    let mut anchors = build_forest(config, clients)?;
    let first = &anchors[0].root.params;
    for a in &anchors[1..] {
        first.check_common_structure(&a.root.params)?;
    }

    let mut history = Vec::with_capacity(config.rounds);
    let mut reports = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        let (_, updates) = run_round(&mut anchors, config, round)?;
        let mut entries = Vec::with_capacity(anchors.len());
        for (a, u) in anchors.iter().zip(updates) {
            let metrics = match test {
                Some(t) => Some(evaluate(&a.spec, &a.root.params, &*test_view(&a.spec, t)?)?),
                None => None,
            };
            entries.push(AnchorRound {
                anchor: a.root.path.anchor_index(),
                losses: u.losses,
                diversity: u.diversity,
                metrics,
            });
        }
        history.push(anchors.iter().map(|a| a.root.params.clone()).collect());
        reports.push(RoundReport {
            round: round + 1,
            anchors: entries,
        });
    }
    Ok(FederationOutcome {
        models: anchors.into_iter().map(|a| a.root.params).collect(),
        history,
        reports,
    })
}
