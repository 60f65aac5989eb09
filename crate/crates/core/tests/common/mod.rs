#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reptreefl::data::{generate, Dataset, SyntheticKind, SyntheticSpec};
use reptreefl::model::{LayerTensor, ModelParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Model with the given layer shapes and uniform(-1, 1) values.
pub fn random_model(rng: &mut ChaCha8Rng, shapes: &[Vec<usize>]) -> ModelParams {
    let layers = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let len: usize = s.iter().product();
            let values = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            LayerTensor::new(format!("l{i}"), s.clone(), values).unwrap()
        })
        .collect();
    ModelParams::all_common(layers).unwrap()
}

pub fn bits(p: &ModelParams) -> Vec<u64> {
    p.layers().iter().flat_map(|l| l.values.iter().map(|v| v.to_bits())).collect()
}

pub fn common_bits(p: &ModelParams) -> Vec<u64> {
    p.common_layers().flat_map(|l| l.values.iter().map(|v| v.to_bits())).collect()
}

pub fn blobs(samples: usize, features: usize, classes: usize, seed: u64) -> Dataset {
    generate(&SyntheticSpec::new(SyntheticKind::GaussianBlobs, samples, features, classes, seed)).unwrap()
}

/// Positions of `parent` whose sample ids are missing from `child`.
pub fn removed_positions(parent: &Dataset, child: &Dataset) -> Vec<usize> {
    let kept: std::collections::HashSet<u64> = child.sample_ids().iter().copied().collect();
    parent
        .sample_ids()
        .iter()
        .enumerate()
        .filter(|(_, id)| !kept.contains(id))
        .map(|(p, _)| p)
        .collect()
}

/// Dataset of `n` samples with the given labels and one feature equal to
/// the position.
pub fn labelled(labels: Vec<usize>, classes: usize) -> Dataset {
    use reptreefl::model::{Matrix, Targets};
    let n = labels.len();
    let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
    Dataset::with_sequential_ids(x, Targets::Classes { labels, classes }).unwrap()
}
