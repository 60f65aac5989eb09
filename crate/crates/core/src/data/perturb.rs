//! Replica dataset perturbation by rotating-window sample removal.
//!
//! A replica with index `l` (1-based) drops `k = floor(p * n / 100)`
//! consecutive positions of its parent starting at `((l - 1) * k) mod n`,
//! wrapping around the end. Sibling replicas therefore drop adjacent,
//! non-overlapping windows until the windows wrap.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    #[default]
    Random,
    Stratified,
}

/// Number of samples a perturbation of rate `percent` removes from `n`.
pub fn removal_count(percent: f64, n: usize) -> usize {
    (percent * n as f64 / 100.0).floor() as usize
}

fn check_rate(percent: f64) -> Result<()> {
    if !(percent > 0.0 && percent < 100.0) {
        return Err(Error::Perturbation(format!(
            "perturbation rate {percent} must lie strictly between 0 and 100"
        )));
    }
    Ok(())
}

/// Positions removed by the window of replica `replica_index` over `n`
/// positions with window length `k`, in window order.
pub fn removal_window(n: usize, k: usize, replica_index: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let start = ((replica_index - 1) % n) * (k % n) % n;
    (0..k).map(|j| (start + j) % n).collect()
}

fn keep_complement(parent: &Dataset, removed: &[usize]) -> Result<Dataset> {
    let mut drop = vec![false; parent.len()];
    for &p in removed {
        drop[p] = true;
    }
    let keep: Vec<usize> = (0..parent.len()).filter(|&p| !drop[p]).collect();
    parent.subset(&keep)
}

/// Removes `floor(p * n / 100)` samples with the rotating window.
pub fn perturb_random(parent: &Dataset, percent: f64, replica_index: usize) -> Result<Dataset> {
    check_rate(percent)?;
    if replica_index == 0 {
        return Err(Error::Perturbation("replica indices start at 1".into()));
    }
    let n = parent.len();
    let k = removal_count(percent, n);
    if k == 0 {
        return Err(Error::Perturbation(format!(
            "{percent}% of {n} samples removes nothing"
        )));
    }
    if k >= n {
        return Err(Error::Perturbation(format!(
            "{percent}% of {n} samples would remove every sample"
        )));
    }
    keep_complement(parent, &removal_window(n, k, replica_index))
}

/// Per-class removal quotas by largest-remainder apportionment of `k` over
/// the class counts. Ties in the remainder are broken by a permutation of
/// the classes drawn from `seed`.
pub fn stratified_quotas(counts: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let mut quotas: Vec<usize> = counts.iter().map(|&c| k * c / n).collect();
    let assigned: usize = quotas.iter().sum();
    let mut tie_rank: Vec<usize> = (0..counts.len()).collect();
    tie_rank.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = k * counts[a] % n;
        let rb = k * counts[b] % n;
        rb.cmp(&ra).then(tie_rank[a].cmp(&tie_rank[b]))
    });
    for &c in order.iter().take(k - assigned) {
        quotas[c] += 1;
    }
    quotas
}

/// Removes `floor(p * n / 100)` samples split across classes in proportion
/// to their frequency. Within each class the removal window rotates with
/// `replica_index` over that class's positions.
pub fn perturb_stratified(
    parent: &Dataset,
    percent: f64,
    replica_index: usize,
    seed: u64,
) -> Result<Dataset> {
    check_rate(percent)?;
    if replica_index == 0 {
        return Err(Error::Perturbation("replica indices start at 1".into()));
    }
    let labels = parent.labels().ok_or_else(|| {
        Error::Perturbation("stratified perturbation needs class labels".into())
    })?;
    let counts = parent.class_counts().unwrap_or_default();
    let n = parent.len();
    let k = removal_count(percent, n);
    if k == 0 {
        return Err(Error::Perturbation(format!(
            "{percent}% of {n} samples removes nothing"
        )));
    }
    let quotas = stratified_quotas(&counts, k, seed);
    let mut class_positions = vec![Vec::new(); counts.len()];
    for (pos, &l) in labels.iter().enumerate() {
        class_positions[l].push(pos);
    }
    let mut removed = Vec::with_capacity(k);
    for (class, positions) in class_positions.iter().enumerate() {
        let quota = quotas[class];
        if quota == 0 {
            continue;
        }
        if quota >= positions.len() {
            return Err(Error::Perturbation(format!(
                "class {class} would be emptied ({quota} of {} samples removed)",
                positions.len()
            )));
        }
        removed.extend(
            removal_window(positions.len(), quota, replica_index)
                .into_iter()
                .map(|i| positions[i]),
        );
    }
    keep_complement(parent, &removed)
}

/// Dispatches on the perturbation mode.
pub fn perturb(
    parent: &Dataset,
    mode: PerturbationMode,
    percent: f64,
    replica_index: usize,
    seed: u64,
) -> Result<Dataset> {
    match mode {
        PerturbationMode::Random => perturb_random(parent, percent, replica_index),
        PerturbationMode::Stratified => perturb_stratified(parent, percent, replica_index, seed),
    }
}
