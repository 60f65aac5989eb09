use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Matrix, Targets};

/// Feature matrix plus per-sample targets. Sample ids are stable across
/// subsetting so that removed samples can be traced back to their source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    targets: Targets,
    sample_ids: Vec<u64>,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Targets, sample_ids: Vec<u64>) -> Result<Self> {
        let n = features.rows();
        if targets.len() != n || sample_ids.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{n} feature rows, {} targets, {} sample ids",
                targets.len(),
                sample_ids.len()
            )));
        }
        if sample_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset(
                "sample ids must be strictly increasing".into(),
            ));
        }
        if let Targets::Classes { labels, classes } = &targets {
            if let Some(&bad) = labels.iter().find(|&&l| l >= *classes) {
                return Err(Error::InvalidDataset(format!(
                    "label {bad} outside {classes} classes"
                )));
            }
        }
        Ok(Dataset {
            features,
            targets,
            sample_ids,
        })
    }

    /// Sample ids `0..n`.
    pub fn with_sequential_ids(features: Matrix, targets: Targets) -> Result<Self> {
        let ids = (0..features.rows() as u64).collect();
        Self::new(features, targets, ids)
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classes { classes, .. } => Some(*classes),
            Targets::Values(_) => None,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    /// Per-class sample counts; `None` for regression data.
    pub fn class_counts(&self) -> Option<Vec<usize>> {
        match &self.targets {
            Targets::Classes { labels, classes } => {
                let mut counts = vec![0; *classes];
                for &l in labels {
                    counts[l] += 1;
                }
                Some(counts)
            }
            Targets::Values(_) => None,
        }
    }

    /// Rows at the given positions. Positions must be strictly increasing so
    /// the result keeps the parent's order.
    pub fn subset(&self, positions: &[usize]) -> Result<Dataset> {
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset("subset positions must be increasing".into()));
        }
        if let Some(&last) = positions.last() {
            if last >= self.len() {
                return Err(Error::InvalidDataset(format!(
                    "position {last} out of range for {} samples",
                    self.len()
                )));
            }
        }
        Ok(Dataset {
            features: self.features.select_rows(positions),
            targets: self.targets.select(positions),
            sample_ids: positions.iter().map(|&p| self.sample_ids[p]).collect(),
        })
    }

    /// Features and targets for a minibatch, in the given (arbitrary) order.
    pub fn batch(&self, positions: &[usize]) -> (Matrix, Targets) {
        (
            self.features.select_rows(positions),
            self.targets.select(positions),
        )
    }

    /// Keep the first `outputs` regression targets.
    pub fn with_target_prefix(&self, outputs: usize) -> Result<Dataset> {
        match &self.targets {
            Targets::Values(m) if outputs <= m.cols() && outputs > 0 => Ok(Dataset {
                features: self.features.clone(),
                targets: Targets::Values(m.take_cols(outputs)),
                sample_ids: self.sample_ids.clone(),
            }),
            Targets::Values(m) => Err(Error::InvalidDataset(format!(
                "cannot take {outputs} of {} target columns",
                m.cols()
            ))),
            Targets::Classes { .. } => Err(Error::InvalidDataset(
                "target prefix applies to regression data only".into(),
            )),
        }
    }

    /// Union of datasets with disjoint sample ids, ordered by sample id.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::Empty("datasets to concatenate"))?;
        let mut rows: Vec<(u64, usize, usize)> = Vec::new();
        for (pi, part) in parts.iter().enumerate() {
            if part.num_features() != first.num_features() {
                return Err(Error::InvalidDataset("feature counts differ".into()));
            }
            rows.extend(part.sample_ids.iter().enumerate().map(|(r, &id)| (id, pi, r)));
        }
        rows.sort_unstable();
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDataset("duplicate sample ids across datasets".into()));
        }
        let mut feature_rows = Vec::with_capacity(rows.len() * first.num_features());
        for &(_, pi, r) in &rows {
            feature_rows.extend_from_slice(parts[pi].features.row(r));
        }
        let features = Matrix::new(rows.len(), first.num_features(), feature_rows)?;
        let targets = match &first.targets {
            Targets::Classes { classes, .. } => {
                let mut labels = Vec::with_capacity(rows.len());
                for &(_, pi, r) in &rows {
                    match &parts[pi].targets {
                        Targets::Classes { labels: l, classes: c } if c == classes => labels.push(l[r]),
                        _ => return Err(Error::InvalidDataset("target kinds differ".into())),
                    }
                }
                Targets::Classes {
                    labels,
                    classes: *classes,
                }
            }
            Targets::Values(m) => {
                let cols = m.cols();
                let mut values = Vec::with_capacity(rows.len() * cols);
                for &(_, pi, r) in &rows {
                    match &parts[pi].targets {
                        Targets::Values(t) if t.cols() == cols => values.extend_from_slice(t.row(r)),
                        _ => return Err(Error::InvalidDataset("target kinds differ".into())),
                    }
                }
                Targets::Values(Matrix::new(rows.len(), cols, values)?)
            }
        };
        let ids = rows.iter().map(|r| r.0).collect();
        Dataset::new(features, targets, ids)
    }
}
