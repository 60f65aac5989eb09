//! Test-set evaluation.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{forward, Head, Matrix, ModelParams, ModelSpec, Targets};

/// Classification metrics are percentages; sensitivity, specificity and F1
/// are macro averages of the one-vs-rest scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MetricSet {
    Classification {
        accuracy: f64,
        f1: f64,
        sensitivity: f64,
        specificity: f64,
    },
    Regression {
        mae: f64,
    },
}

impl MetricSet {
    /// `(name, value)` pairs in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        match *self {
            MetricSet::Classification {
                accuracy,
                f1,
                sensitivity,
                specificity,
            } => vec![
                ("accuracy", accuracy),
                ("f1", f1),
                ("sensitivity", sensitivity),
                ("specificity", specificity),
            ],
            MetricSet::Regression { mae } => vec![("mae", mae)],
        }
    }

    /// Accuracy for classification, MAE for regression.
    pub fn headline(&self) -> f64 {
        match *self {
            MetricSet::Classification { accuracy, .. } => accuracy,
            MetricSet::Regression { mae } => mae,
        }
    }
}

/// Macro one-vs-rest metrics from true and predicted labels. Classes that
/// never occur in either vector still count in the macro average with the
/// degenerate ratios defined as 0 (recall, precision) or 1 (specificity when
/// every sample is the class).
pub fn classification_metrics(truth: &[usize], predicted: &[usize], classes: usize) -> Result<MetricSet> {
    if truth.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if truth.len() != predicted.len() {
        return Err(Error::shape("predictions", &[truth.len()], &[predicted.len()]));
    }
    let n = truth.len();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize, empty: f64| if den == 0 { empty } else { num as f64 / den as f64 };
    let (mut sens, mut spec, mut f1) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = confusion[c][c];
        let actual: usize = confusion[c].iter().sum();
        let predicted_c: usize = (0..classes).map(|r| confusion[r][c]).sum();
        let fn_ = actual - tp;
        let fp = predicted_c - tp;
        let tn = n - tp - fn_ - fp;
        sens += ratio(tp, tp + fn_, 0.0);
        spec += ratio(tn, tn + fp, 1.0);
        f1 += ratio(2 * tp, 2 * tp + fp + fn_, 0.0);
    }
    let k = classes as f64;
    Ok(MetricSet::Classification {
        accuracy: 100.0 * correct as f64 / n as f64,
        f1: 100.0 * f1 / k,
        sensitivity: 100.0 * sens / k,
        specificity: 100.0 * spec / k,
    })
}

pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Argmax metrics for classifiers, mean absolute elementwise error for
/// regressors.
pub fn evaluate(spec: &ModelSpec, params: &ModelParams, test: &Dataset) -> Result<MetricSet> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let out = forward(spec, params, test.features())?;
    match (spec.head, test.targets()) {
        (Head::Classification { classes }, Targets::Classes { labels, .. }) => {
            classification_metrics(labels, &argmax_rows(&out), classes)
        }
        (Head::Regression { .. }, Targets::Values(t)) => {
            if t.cols() != out.cols() {
                return Err(Error::shape("regression targets", &[out.cols()], &[t.cols()]));
            }
            let total: f64 = t.data().iter().zip(out.data()).map(|(y, p)| (y - p).abs()).sum();
            Ok(MetricSet::Regression {
                mae: total / t.data().len() as f64,
            })
        }
        (head, _) => Err(Error::InvalidDataset(format!(
            "test targets do not match the {} head",
            head.kind_name()
        ))),
    }
}
