//! Reference methods sharing the federation's initialization, local
//! training and seeding: standalone, FedAvg and centralized training.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::federation::{
    average_common, initial_params, local_train, test_view, AnchorRound, ClientSetup,
    FederationOutcome, RoundReport, TrainSettings,
};
use crate::metrics::{evaluate, MetricSet};
use crate::model::{ModelParams, ModelSpec};
use crate::tree::{FederationConfig, ReplicaNode};

fn anchors(config: &FederationConfig, clients: &[ClientSetup]) -> Result<Vec<(ModelSpec, ReplicaNode)>> {
    config.validate()?;
    if clients.is_empty() {
        return Err(Error::Empty("clients"));
    }
    clients
        .iter()
        .map(|c| {
            let params = initial_params(&c.spec, config.seed)?;
            Ok((
                c.spec.clone(),
                ReplicaNode::anchor(c.id, params, c.dataset.clone(), config.optimizer),
            ))
        })
        .collect()
}

fn metrics_for(spec: &ModelSpec, params: &ModelParams, test: Option<&Dataset>) -> Result<Option<MetricSet>> {
    test.map(|t| -> Result<MetricSet> { evaluate(spec, params, &*test_view(spec, t)?) })
        .transpose()
}

fn record(
    nodes: &[(ModelSpec, ReplicaNode)],
    losses: Vec<Vec<f64>>,
    round: usize,
    test: Option<&Dataset>,
) -> Result<RoundReport> {
    let mut entries = Vec::with_capacity(nodes.len());
    for ((spec, node), losses) in nodes.iter().zip(losses) {
        entries.push(AnchorRound {
            anchor: node.path.anchor_index(),
            losses,
            diversity: Vec::new(),
            metrics: metrics_for(spec, &node.params, test)?,
        });
    }
    Ok(RoundReport {
        round: round + 1,
        anchors: entries,
    })
}

/// Every client trains `R·E` epochs on its own data without communication.
/// Progress is reported every `E` epochs.
pub fn standalone(
    config: &FederationConfig,
    clients: &[ClientSetup],
    test: Option<&Dataset>,
) -> Result<FederationOutcome> {
    let mut nodes = anchors(config, clients)?;
    let settings = TrainSettings::from(config);
    let mut history = Vec::new();
    let mut reports = Vec::new();
    for round in 0..config.rounds {
        let losses = nodes
            .par_iter_mut()
            .map(|(spec, node)| local_train(node, spec, &settings, round))
            .collect::<Result<Vec<_>>>()?;
        reports.push(record(&nodes, losses, round, test)?);
        history.push(nodes.iter().map(|(_, n)| n.params.clone()).collect());
    }
    Ok(FederationOutcome {
        models: nodes.into_iter().map(|(_, n)| n.params).collect(),
        history,
        reports,
    })
}

/// Per round: `E` local epochs on every client, uniform mean of the common
/// layers, broadcast.
pub fn fedavg(
    config: &FederationConfig,
    clients: &[ClientSetup],
    test: Option<&Dataset>,
) -> Result<FederationOutcome> {
    let mut nodes = anchors(config, clients)?;
    let settings = TrainSettings::from(config);
    let mut history = Vec::new();
    let mut reports = Vec::new();
    for round in 0..config.rounds {
        let losses = nodes
            .par_iter_mut()
            .map(|(spec, node)| local_train(node, spec, &settings, round))
            .collect::<Result<Vec<_>>>()?;
        let global = {
            let models: Vec<&ModelParams> = nodes.iter().map(|(_, n)| &n.params).collect();
            average_common(&models)?
        };
        for (_, node) in nodes.iter_mut() {
            node.params.copy_common_from(&global)?;
        }
        reports.push(record(&nodes, losses, round, test)?);
        history.push(nodes.iter().map(|(_, n)| n.params.clone()).collect());
    }
    Ok(FederationOutcome {
        models: nodes.into_iter().map(|(_, n)| n.params).collect(),
        history,
        reports,
    })
}

/// One model trained for `R·E` epochs on the union of all client datasets.
/// The model takes the first client's architecture and identity.
pub fn centralized(
    config: &FederationConfig,
    clients: &[ClientSetup],
    test: Option<&Dataset>,
) -> Result<FederationOutcome> {
    let first = clients.first().ok_or(Error::Empty("clients"))?;
    if let Some(other) = clients.iter().find(|c| c.spec != first.spec) {
        return Err(Error::Config(format!(
            "clients {} and {} have different architectures; centralize each head group separately",
            first.id, other.id
        )));
    }
    let parts: Vec<&Dataset> = clients.iter().map(|c| &c.dataset).collect();
    let pooled = ClientSetup::new(first.id, first.spec.clone(), Dataset::concat(&parts)?);
    let single = FederationConfig {
        clients: config.clients[..1.min(config.clients.len())].to_vec(),
        ..config.clone()
    };
    standalone(&single, &[pooled], test)
}
