use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, ExperimentConfig, ExperimentResult};
use crate::data::{Dataset, PerturbationMode};
use crate::error::{Error, Result};
use crate::tree::AggregationMode;

/// A one-parameter sweep over an experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "parameter", content = "values")]
pub enum Sweep {
    PerturbationRate(Vec<f64>),
    Depth(Vec<usize>),
    Aggregation(Vec<AggregationMode>),
    PerturbationMode(Vec<PerturbationMode>),
    ClientDatasetSize(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: String,
}

impl SweepPoint {
    /// `parameter=value`, used as a directory name.
    pub fn label(&self) -> String {
        format!("{}={}", self.parameter, self.value)
    }
}

fn parse_list<T>(values: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let parsed: Option<Vec<T>> = values.split(',').map(|v| parse(v.trim())).collect();
    match parsed {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::Config(format!("invalid sweep values {values:?}"))),
    }
}

impl FromStr for Sweep {
    type Err = Error;

    /// `name=v1,v2,...`, e.g. `depth=1,2,3` or `aggregation=diversity,simple`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep {s:?} is not name=v1,v2,...")))?;
        let sweep = match name.trim() {
            "perturbation_rate" | "perturbation" | "p" => {
                Sweep::PerturbationRate(parse_list(values, |v| v.parse().ok())?)
            }
            "depth" | "d" => Sweep::Depth(parse_list(values, |v| v.parse().ok())?),
            "aggregation" => Sweep::Aggregation(parse_list(values, |v| match v {
                "diversity" => Some(AggregationMode::Diversity),
                "simple" => Some(AggregationMode::Simple),
                _ => None,
            })?),
            "perturbation_mode" => Sweep::PerturbationMode(parse_list(values, |v| match v {
                "random" => Some(PerturbationMode::Random),
                "stratified" => Some(PerturbationMode::Stratified),
                _ => None,
            })?),
            "client_dataset_size" | "client_size" | "n" => {
                Sweep::ClientDatasetSize(parse_list(values, |v| v.parse().ok())?)
            }
            other => return Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
        };
        sweep.validate()?;
        Ok(sweep)
    }
}

impl Sweep {
    pub fn parameter(&self) -> &'static str {
        match self {
            Sweep::PerturbationRate(_) => "perturbation_rate",
            Sweep::Depth(_) => "depth",
            Sweep::Aggregation(_) => "aggregation",
            Sweep::PerturbationMode(_) => "perturbation_mode",
            Sweep::ClientDatasetSize(_) => "client_dataset_size",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::PerturbationRate(v) => v.len(),
            Sweep::Depth(v) => v.len(),
            Sweep::Aggregation(v) => v.len(),
            Sweep::PerturbationMode(v) => v.len(),
            Sweep::ClientDatasetSize(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("empty sweep".into()));
        }
        match self {
            Sweep::PerturbationRate(v) => {
                if let Some(p) = v.iter().find(|p| !(**p > 0.0 && **p < 100.0)) {
                    return Err(Error::Config(format!("perturbation rate {p} outside (0, 100)")));
                }
            }
            Sweep::ClientDatasetSize(v) => {
                if v.contains(&0) {
                    return Err(Error::Config("client dataset size must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The configuration and label of sweep point `index`.
    pub fn point(&self, base: &ExperimentConfig, index: usize) -> (SweepPoint, ExperimentConfig) {
        let mut config = base.clone();
        let value = match self {
            Sweep::PerturbationRate(v) => {
                config.federation = config.federation.with_perturbation(v[index]);
                v[index].to_string()
            }
            Sweep::Depth(v) => {
                config.federation = config.federation.with_depth(v[index]);
                v[index].to_string()
            }
            Sweep::Aggregation(v) => {
                config.federation.aggregation = v[index];
                match v[index] {
                    AggregationMode::Diversity => "diversity".into(),
                    AggregationMode::Simple => "simple".into(),
                }
            }
            Sweep::PerturbationMode(v) => {
                config.federation.perturbation_mode = v[index];
                match v[index] {
                    PerturbationMode::Random => "random".into(),
                    PerturbationMode::Stratified => "stratified".into(),
                }
            }
            Sweep::ClientDatasetSize(v) => {
                config.client_size = Some(v[index]);
                v[index].to_string()
            }
        };
        (
            SweepPoint {
                parameter: self.parameter().into(),
                value,
            },
            config,
        )
    }
}

/// One experiment per sweep value, all with the base configuration's seed so
/// points are paired.
pub fn run_ablation(
    base: &ExperimentConfig,
    pool: &Dataset,
    sweep: &Sweep,
) -> Result<Vec<(SweepPoint, ExperimentResult)>> {
    sweep.validate()?;
    (0..sweep.len())
        .map(|i| {
            let (point, config) = sweep.point(base, i);
            let result = run_experiment(&config, pool)?;
            Ok((point, result))
        })
        .collect()
}
