//! Run configuration: a flat TOML file with optional `[data]`, `[model]`
//! and `[client.N]` sections, plus `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use reptreefl::data::{
    generate, load_csv, CsvSchema, CsvTask, Dataset, PerturbationMode, SyntheticKind, SyntheticSpec,
};
use reptreefl::harness::{ExperimentConfig, Method};
use reptreefl::model::{Activation, Head, LossKind, ModelSpec, OptimizerKind, Targets};
use reptreefl::tree::{AggregationMode, ClientTree, FederationConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::method")]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::clients")]
    pub clients: usize,
    #[serde(default = "defaults::ten")]
    pub epochs: usize,
    #[serde(default = "defaults::ten")]
    pub rounds: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::optimizer")]
    pub optimizer: OptimizerChoice,
    /// Defaults to cross-entropy for class labels and L1 for regression.
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default = "defaults::replicas")]
    pub replicas: usize,
    #[serde(default = "defaults::perturbation")]
    pub perturbation: f64,
    #[serde(default = "defaults::depth")]
    pub depth: usize,
    #[serde(default)]
    pub aggregation: AggregationMode,
    #[serde(default)]
    pub perturbation_mode: PerturbationMode,
    /// Defaults to `clients + 1`.
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default)]
    pub stratified_folds: bool,
    #[serde(default)]
    pub client_size: Option<usize>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    /// Per-client overrides keyed by client index.
    #[serde(default)]
    pub client: BTreeMap<String, ClientOverride>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    Synthetic {
        #[serde(default = "defaults::kind")]
        kind: SyntheticKind,
        #[serde(default = "defaults::samples")]
        samples: usize,
        #[serde(default = "defaults::features")]
        features: usize,
        /// Classes for blobs, target width for regression.
        #[serde(default = "defaults::outputs")]
        outputs: usize,
        #[serde(default = "defaults::one")]
        center_spread: f64,
        /// Defaults to 1.0 for blobs and 0.1 for regression.
        #[serde(default)]
        noise: Option<f64>,
        /// Defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        /// Relative paths resolve against the config file's directory.
        path: PathBuf,
        label_column: usize,
        #[serde(default)]
        feature_columns: Option<Vec<usize>>,
        #[serde(default)]
        header: bool,
        /// Class count; give `outputs` instead for regression targets.
        #[serde(default)]
        classes: Option<usize>,
        #[serde(default)]
        outputs: Option<usize>,
    },
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic {
            kind: defaults::kind(),
            samples: defaults::samples(),
            features: defaults::features(),
            outputs: defaults::outputs(),
            center_spread: 1.0,
            noise: None,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::activation")]
    pub activation: Activation,
    /// Keep the output block local to each client.
    #[serde(default)]
    pub personalized_head: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: defaults::hidden(),
            activation: defaults::activation(),
            personalized_head: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientOverride {
    pub replicas: Option<usize>,
    pub perturbation: Option<f64>,
    pub depth: Option<usize>,
    /// Output width of this client's regression head; must not exceed the
    /// data's target width.
    pub outputs: Option<usize>,
}

mod defaults {
    use super::*;

    pub fn method() -> Method {
        Method::RepTreeFl
    }
    pub fn clients() -> usize {
        3
    }
    pub fn ten() -> usize {
        10
    }
    pub fn lr() -> f64 {
        0.005
    }
    pub fn batch_size() -> usize {
        20
    }
    pub fn optimizer() -> OptimizerChoice {
        OptimizerChoice::Sgd
    }
    pub fn replicas() -> usize {
        3
    }
    pub fn perturbation() -> f64 {
        10.0
    }
    pub fn depth() -> usize {
        1
    }
    pub fn kind() -> SyntheticKind {
        SyntheticKind::GaussianBlobs
    }
    pub fn samples() -> usize {
        800
    }
    pub fn features() -> usize {
        20
    }
    pub fn outputs() -> usize {
        2
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn hidden() -> Vec<usize> {
        vec![32]
    }
    pub fn activation() -> Activation {
        Activation::Relu
    }
}

/// Parses the config file and applies `key=value` overrides. Keys are
/// dotted paths (`lr`, `data.samples`, `client.1.depth`); values are TOML
/// literals, with bare words read as strings.
pub fn load(path: &Path, overrides: &[String]) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut table: toml::Table =
        toml::from_str(&text).with_context(|| format!("cannot parse config file {}", path.display()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config = from_table(table).with_context(|| format!("invalid configuration in {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

/// A `[data]` section without `source` describes synthetic data.
pub fn from_table(mut table: toml::Table) -> Result<RunConfig> {
    if let Some(toml::Value::Table(data)) = table.get_mut("data") {
        data.entry("source").or_insert_with(|| toml::Value::String("synthetic".into()));
    }
    Ok(toml::Value::Table(table).try_into()?)
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key {key:?} is malformed");
    }
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override key {key:?}: {part:?} is not a section"))?;
    }
    current.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Canonical JSON (sorted keys) of the fully defaulted configuration.
    pub fn canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// Git-style object hash: SHA-256 over `blob <len>\0<canonical json>`.
    pub fn content_hash(&self) -> Result<String> {
        let body = self.canonical_json()?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        Ok(hex::encode(h.finalize()))
    }

    fn client_trees(&self) -> Result<Vec<ClientTree>> {
        let mut trees = vec![
            ClientTree {
                replicas: self.replicas,
                perturbation: self.perturbation,
                depth: self.depth,
            };
            self.clients
        ];
        for (key, o) in &self.client {
            let i = self.client_index(key)?;
            let t = &mut trees[i];
            t.replicas = o.replicas.unwrap_or(t.replicas);
            t.perturbation = o.perturbation.unwrap_or(t.perturbation);
            t.depth = o.depth.unwrap_or(t.depth);
        }
        Ok(trees)
    }

    fn client_index(&self, key: &str) -> Result<usize> {
        match key.parse::<usize>() {
            Ok(i) if i < self.clients => Ok(i),
            _ => bail!(
                "section client.{key}: expected a client index below clients = {}",
                self.clients
            ),
        }
    }

    /// Loads or generates the data pool.
    pub fn dataset(&self, base: &Path) -> Result<Dataset> {
        match &self.data {
            DataConfig::Synthetic {
                kind,
                samples,
                features,
                outputs,
                center_spread,
                noise,
                seed,
            } => {
                let mut spec = SyntheticSpec::new(*kind, *samples, *features, *outputs, seed.unwrap_or(self.seed));
                spec.center_spread = *center_spread;
                if let Some(n) = noise {
                    spec.noise = *n;
                }
                generate(&spec).context("data: cannot generate synthetic pool")
            }
            DataConfig::Csv {
                path,
                label_column,
                feature_columns,
                header,
                classes,
                outputs,
            } => {
                let task = match (classes, outputs) {
                    (Some(c), None) => CsvTask::Classification { classes: *c },
                    (None, Some(o)) => CsvTask::Regression { outputs: *o },
                    _ => bail!("data: give exactly one of data.classes and data.outputs"),
                };
                let schema = CsvSchema {
                    label_column: *label_column,
                    feature_columns: feature_columns.clone(),
                    header: *header,
                    task,
                };
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                Ok(load_csv(&full, &schema)?)
            }
        }
    }

    /// Core experiment settings for a data pool.
    pub fn experiment(&self, pool: &Dataset) -> Result<ExperimentConfig> {
        let (loss_default, width, classes) = match pool.targets() {
            Targets::Classes { classes, .. } => (LossKind::CrossEntropy, *classes, true),
            Targets::Values(m) => (LossKind::L1, m.cols(), false),
        };
        let mut federation = FederationConfig::uniform(self.clients, ClientTree::default());
        federation.clients = self.client_trees()?;
        federation.epochs = self.epochs;
        federation.rounds = self.rounds;
        federation.lr = self.lr;
        federation.batch_size = self.batch_size;
        federation.optimizer = match self.optimizer {
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
            OptimizerChoice::Adam => OptimizerKind::adam(),
        };
        federation.loss = self.loss.unwrap_or(loss_default);
        federation.perturbation_mode = self.perturbation_mode;
        federation.aggregation = self.aggregation;
        federation.seed = self.seed;

        let mut specs = Vec::with_capacity(self.clients);
        for i in 0..self.clients {
            let o = self.client.get(&i.to_string()).and_then(|c| c.outputs);
            let head = match (classes, o) {
                (true, None) => Head::Classification { classes: width },
                (true, Some(_)) => bail!("client.{i}.outputs only applies to regression data"),
                (false, None) => Head::Regression { outputs: width },
                (false, Some(o)) if o >= 1 && o <= width => Head::Regression { outputs: o },
                (false, Some(o)) => bail!("client.{i}.outputs = {o} must lie in 1..={width}"),
            };
            let mut spec = ModelSpec::new(pool.num_features(), self.model.hidden.clone(), head)
                .with_activation(self.model.activation);
            if self.model.personalized_head {
                spec = spec.with_personalized_head();
            }
            specs.push(spec);
        }
        for key in self.client.keys() {
            self.client_index(key)?;
        }

        let mut exp = ExperimentConfig::new(self.method, federation, specs[0].clone());
        exp.specs = specs;
        exp.folds = self.folds.unwrap_or(self.clients + 1);
        exp.stratified_folds = self.stratified_folds;
        exp.client_size = self.client_size;
        exp.validate()?;
        Ok(exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, overrides: &[&str]) -> Result<RunConfig> {
        let mut table: toml::Table = toml::from_str(text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        from_table(table)
    }

    #[test]
    fn defaults_fill_an_empty_file() {
        let c = parse("", &[]).unwrap();
        assert_eq!((c.epochs, c.rounds, c.batch_size, c.lr), (10, 10, 20, 0.005));
        assert_eq!((c.replicas, c.perturbation, c.depth), (3, 10.0, 1));
        assert_eq!(c.aggregation, AggregationMode::Diversity);
        assert_eq!(c.perturbation_mode, PerturbationMode::Random);
        assert_eq!(c.optimizer, OptimizerChoice::Sgd);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = parse(
            "lr = 0.1\n[client.1]\ndepth = 2\n",
            &["lr=0.2", "data.samples=90", "client.2.replicas=5", "aggregation=simple"],
        )
        .unwrap();
        assert_eq!(c.lr, 0.2);
        assert_eq!(c.aggregation, AggregationMode::Simple);
        match c.data {
            DataConfig::Synthetic { samples, .. } => assert_eq!(samples, 90),
            _ => panic!("expected synthetic data"),
        }
        let trees = c.client_trees().unwrap();
        assert_eq!((trees[1].depth, trees[2].replicas, trees[0].replicas), (2, 5, 3));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = format!("{:#}", parse("lerning_rate = 0.1", &[]).unwrap_err());
        assert!(err.contains("lerning_rate"), "{err}");
        assert!(parse("", &["nokey"]).is_err());
    }

    #[test]
    fn client_sections_must_name_clients() {
        let c = parse("clients = 2\n[client.5]\ndepth = 2\n", &[]).unwrap();
        let err = c.client_trees().unwrap_err().to_string();
        assert!(err.contains("client.5"), "{err}");
    }

    #[test]
    fn seed_changes_hash() {
        let a = parse("", &[]).unwrap();
        let b = parse("", &["seed=1"]).unwrap();
        assert_eq!(a.content_hash().unwrap(), parse("", &[]).unwrap().content_hash().unwrap());
        assert_ne!(a.content_hash().unwrap(), b.content_hash().unwrap());
    }
}
