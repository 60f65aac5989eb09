use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{Matrix, Targets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    GaussianBlobs,
    RegressionLinear,
}

/// Parameters of a synthetic dataset.
///
/// For blobs, class centers are drawn from `N(0, center_spread^2 I)` and each
/// sample adds `N(0, noise^2 I)` to its class center. For linear regression,
/// features are standard normal and targets are `X W + noise * N(0, 1)` with a
/// fixed random `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub samples: usize,
    pub features: usize,
    /// Classes for blobs, target dimension for regression.
    pub outputs: usize,
    pub center_spread: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, samples: usize, features: usize, outputs: usize, seed: u64) -> Self {
        let noise = match kind {
            SyntheticKind::GaussianBlobs => 1.0,
            SyntheticKind::RegressionLinear => 0.1,
        };
        SyntheticSpec {
            kind,
            samples,
            features,
            outputs,
            center_spread: 1.0,
            noise,
            seed,
        }
    }
}

pub fn generate_synthetic(
    kind: SyntheticKind,
    samples: usize,
    features: usize,
    outputs: usize,
    seed: u64,
) -> Result<Dataset> {
    generate(&SyntheticSpec::new(kind, samples, features, outputs, seed))
}

pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.samples == 0 || spec.features == 0 || spec.outputs == 0 {
        return Err(Error::InvalidDataset(
            "synthetic sizes must be positive".into(),
        ));
    }
    if !(spec.noise >= 0.0 && spec.center_spread >= 0.0) {
        return Err(Error::InvalidDataset("spread and noise must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, f, k) = (spec.samples, spec.features, spec.outputs);
    match spec.kind {
        SyntheticKind::GaussianBlobs => {
            if k < 2 {
                return Err(Error::InvalidDataset("blobs need at least two classes".into()));
            }
            let centers: Vec<f64> = (0..k * f)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spec.center_spread * z
                })
                .collect();
            let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
            labels.shuffle(&mut rng);
            let mut x = Vec::with_capacity(n * f);
            for &label in &labels {
                let center = &centers[label * f..(label + 1) * f];
                for &c in center {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    x.push(c + spec.noise * e);
                }
            }
            Dataset::with_sequential_ids(
                Matrix::new(n, f, x)?,
                Targets::Classes { labels, classes: k },
            )
        }
        SyntheticKind::RegressionLinear => {
            let w_dist = Normal::new(0.0, (1.0 / f as f64).sqrt())
                .map_err(|e| Error::InvalidDataset(e.to_string()))?;
            let weights: Vec<f64> = (0..f * k).map(|_| w_dist.sample(&mut rng)).collect();
            let x: Vec<f64> = (0..n * f).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut y = Vec::with_capacity(n * k);
            for i in 0..n {
                let row = &x[i * f..(i + 1) * f];
                for j in 0..k {
                    let mut s = 0.0;
                    for (d, &xv) in row.iter().enumerate() {
                        s += xv * weights[d * k + j];
                    }
                    let e: f64 = StandardNormal.sample(&mut rng);
                    y.push(s + spec.noise * e);
                }
            }
            Dataset::with_sequential_ids(Matrix::new(n, f, x)?, Targets::Values(Matrix::new(n, k, y)?))
        }
    }
}
