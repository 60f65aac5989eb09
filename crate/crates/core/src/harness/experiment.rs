use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{centralized, fedavg, standalone};
use crate::data::{kfold_assign, Dataset};
use crate::error::{Error, Result};
use crate::federation::{run_federation, ClientSetup, FederationOutcome, RoundReport};
use crate::metrics::MetricSet;
use crate::model::{Head, ModelSpec, Targets};
use crate::seed::{derive_seed, TAG_SPLIT};
use crate::tree::{AggregationMode, FederationConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Replica trees with diversity-weighted aggregation.
    RepTreeFl,
    /// Depth-1 replicas with uniform aggregation.
    RepFl,
    FedAvg,
    Standalone,
    Centralized,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RepTreeFl,
        Method::RepFl,
        Method::FedAvg,
        Method::Standalone,
        Method::Centralized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RepTreeFl => "reptreefl",
            Method::RepFl => "repfl",
            Method::FedAvg => "fedavg",
            Method::Standalone => "standalone",
            Method::Centralized => "centralized",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Everything needed to rerun a cross-validated experiment on a data pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub federation: FederationConfig,
    /// One architecture per client.
    pub specs: Vec<ModelSpec>,
    /// Fold count; each configuration gives one fold to every client and
    /// one to the test set, so this must be at least `clients + 1`.
    pub folds: usize,
    pub stratified_folds: bool,
    /// Truncate every client's local fold to this many samples.
    pub client_size: Option<usize>,
}

impl ExperimentConfig {
    /// `folds = clients + 1`, unstratified, same architecture everywhere.
    pub fn new(method: Method, federation: FederationConfig, spec: ModelSpec) -> Self {
        let m = federation.clients();
        ExperimentConfig {
            method,
            federation,
            specs: vec![spec; m],
            folds: m + 1,
            stratified_folds: false,
            client_size: None,
        }
    }

    /// Federation settings actually used by the method.
    pub fn effective_federation(&self) -> FederationConfig {
        let mut config = self.federation.clone();
        match self.method {
            Method::RepFl => {
                config.aggregation = AggregationMode::Simple;
                config = config.with_depth(1);
            }
            Method::FedAvg | Method::Standalone | Method::Centralized => {
                config = config.with_replicas(0);
            }
            Method::RepTreeFl => {}
        }
        config
    }

    pub fn validate(&self) -> Result<()> {
        self.federation.validate()?;
        let m = self.federation.clients();
        if self.specs.len() != m {
            return Err(Error::Config(format!("{m} clients but {} model specs", self.specs.len())));
        }
        for s in &self.specs {
            s.validate()?;
        }
        if self.folds < m + 1 {
            return Err(Error::Config(format!(
                "{m} clients need at least {} folds, got {}",
                m + 1,
                self.folds
            )));
        }
        if self.client_size == Some(0) {
            return Err(Error::Config("client_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientMetrics {
    pub client: u64,
    pub metrics: MetricSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_fold: usize,
    /// Final-round metrics on the shared test fold.
    pub clients: Vec<ClientMetrics>,
    pub rounds: Vec<RoundReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientSummary {
    pub client: u64,
    pub stats: Vec<MetricStat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldResult>,
    pub summary: Vec<ClientSummary>,
    #[serde(skip)]
    pub duration: Duration,
}

impl ExperimentResult {
    /// Mean of the headline metric (accuracy or MAE) over folds and clients.
    pub fn mean_headline(&self) -> f64 {
        let values: Vec<f64> = self
            .folds
            .iter()
            .flat_map(|f| f.clients.iter().map(|c| c.metrics.headline()))
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-client mean/std of every metric across folds.
pub fn summarize(folds: &[FoldResult]) -> Vec<ClientSummary> {
    let Some(first) = folds.first() else {
        return Vec::new();
    };
    first
        .clients
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let stats = c
                .metrics
                .named()
                .into_iter()
                .enumerate()
                .map(|(mi, (name, _))| {
                    let values: Vec<f64> = folds
                        .iter()
                        .map(|f| f.clients[ci].metrics.named()[mi].1)
                        .collect();
                    let (mean, std) = mean_std(&values);
                    MetricStat {
                        metric: name.to_string(),
                        mean,
                        std,
                    }
                })
                .collect();
            ClientSummary {
                client: c.client,
                stats,
            }
        })
        .collect()
}

fn client_view(spec: &ModelSpec, data: Dataset) -> Result<Dataset> {
    match (spec.head, data.targets()) {
        (Head::Regression { outputs }, Targets::Values(t)) if t.cols() > outputs => {
            data.with_target_prefix(outputs)
        }
        _ => Ok(data),
    }
}

/// Client datasets and test set for fold configuration `fold`.
pub fn fold_setup(config: &ExperimentConfig, pool: &Dataset, fold: usize) -> Result<(Vec<ClientSetup>, Dataset)> {
    let m = config.federation.clients();
    let plan = kfold_assign(
        pool,
        config.folds,
        derive_seed(config.federation.seed, &[TAG_SPLIT]),
        config.stratified_folds,
    )?;
    let roles = plan.roles(fold, m)?;
    let mut clients = Vec::with_capacity(m);
    for (i, (&f, spec)) in roles.client_folds.iter().zip(&config.specs).enumerate() {
        let mut positions = plan.fold_positions(f);
        if let Some(size) = config.client_size {
            if positions.len() < size {
                return Err(Error::Config(format!(
                    "fold {f} has {} samples, fewer than client_size {size}",
                    positions.len()
                )));
            }
            positions.truncate(size);
        }
        let data = client_view(spec, pool.subset(&positions)?)?;
        clients.push(ClientSetup::new(i as u64, spec.clone(), data));
    }
    Ok((clients, plan.fold_dataset(pool, roles.test_fold)?))
}

/// Runs `config.method` on one set of clients.
pub fn run_method(
    method: Method,
    config: &FederationConfig,
    clients: &[ClientSetup],
    test: Option<&Dataset>,
) -> Result<FederationOutcome> {
    match method {
        Method::RepTreeFl | Method::RepFl => run_federation(config, clients, test),
        Method::FedAvg => fedavg(config, clients, test),
        Method::Standalone => standalone(config, clients, test),
        Method::Centralized => centralized(config, clients, test),
    }
}

/// Cross-validated run: every fold configuration in turn serves one fold to
/// each client and one as the shared test set.
pub fn run_experiment(config: &ExperimentConfig, pool: &Dataset) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let federation = config.effective_federation();
    let folds = (0..config.folds)
        .into_par_iter()
        .map(|fold| -> Result<FoldResult> {
            let (clients, test) = fold_setup(config, pool, fold)?;
            let outcome = run_method(config.method, &federation, &clients, Some(&test))?;
            let last = outcome.reports.last().ok_or(Error::Empty("rounds"))?;
            let clients = last
                .anchors
                .iter()
                .map(|a| ClientMetrics {
                    client: a.anchor,
                    metrics: a.metrics.expect("test set was provided"),
                })
                .collect();
            Ok(FoldResult {
                fold,
                test_fold: (federation.clients() + fold) % config.folds,
                clients,
                rounds: outcome.reports,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&folds);
    Ok(ExperimentResult {
        method: config.method,
        config: config.clone(),
        folds,
        summary,
        duration: start.elapsed(),
    })
}

pub fn run_standalone(config: &ExperimentConfig, pool: &Dataset) -> Result<ExperimentResult> {
    run_experiment(&ExperimentConfig { method: Method::Standalone, ..config.clone() }, pool)
}

pub fn run_fedavg(config: &ExperimentConfig, pool: &Dataset) -> Result<ExperimentResult> {
    run_experiment(&ExperimentConfig { method: Method::FedAvg, ..config.clone() }, pool)
}

pub fn run_centralized(config: &ExperimentConfig, pool: &Dataset) -> Result<ExperimentResult> {
    run_experiment(&ExperimentConfig { method: Method::Centralized, ..config.clone() }, pool)
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon's
/// default). Results do not depend on the thread count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
