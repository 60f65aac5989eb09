mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use reptreefl::data::{
    perturb_random, perturb_stratified, removal_count, stratified_quotas, PerturbationMode,
};
use reptreefl::model::OptimizerKind;
use reptreefl::tree::{create_replicas, Perturbation, ReplicaNode};
use reptreefl::federation::initial_params;
use reptreefl::model::{Head, ModelSpec};

use common::{labelled, removed_positions};

fn window_oracle(n: usize, k: usize, l: usize) -> BTreeSet<usize> {
    let start = ((l as u128 - 1) * k as u128 % n as u128) as usize;
    (0..k).map(|j| (start + j) % n).collect()
}

#[test]
fn twenty_samples_ten_percent_through_tree() {
    let data = labelled(vec![0; 20], 1);
    let spec = ModelSpec::new(1, vec![2], Head::Classification { classes: 1 });
    let mut root = ReplicaNode::anchor(0, initial_params(&spec, 0).unwrap(), data.clone(), OptimizerKind::Sgd);
    let perturbation = Perturbation { mode: PerturbationMode::Random, percent: 10.0, seed: 0 };
    create_replicas(&mut root, 3, 1, &perturbation).unwrap();
    let removed: Vec<Vec<usize>> = root.children.iter().map(|c| removed_positions(&data, &c.dataset)).collect();
    assert_eq!(removed, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
}

#[test]
fn second_level_perturbs_the_parent_replica() {
    let data = labelled(vec![0; 20], 1);
    let spec = ModelSpec::new(1, vec![2], Head::Classification { classes: 1 });
    let mut root = ReplicaNode::anchor(0, initial_params(&spec, 0).unwrap(), data.clone(), OptimizerKind::Sgd);
    let perturbation = Perturbation { mode: PerturbationMode::Random, percent: 10.0, seed: 0 };
    create_replicas(&mut root, 2, 2, &perturbation).unwrap();
    let first = &root.children[0];
    // 18 samples left, 10% of 18 rounds down to one removal per grandchild.
    for (i, grandchild) in first.children.iter().enumerate() {
        assert_eq!(grandchild.dataset.len(), 17);
        assert_eq!(removed_positions(&first.dataset, &grandchild.dataset), vec![i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_removal_contract(n in 2usize..400, p in 0.5f64..99.5, l in 1usize..50) {
        let k = removal_count(p, n);
        prop_assume!(k > 0 && k < n);
        prop_assert_eq!(k, (p * n as f64 / 100.0).floor() as usize);
        let data = labelled(vec![0; n], 1);
        let child = perturb_random(&data, p, l).unwrap();
        prop_assert_eq!(child.len(), n - k);
        // Survivors keep their relative order.
        prop_assert!(child.sample_ids().windows(2).all(|w| w[0] < w[1]));
        let removed: BTreeSet<usize> = removed_positions(&data, &child).into_iter().collect();
        prop_assert_eq!(removed.len(), k);
        prop_assert_eq!(&removed, &window_oracle(n, k, l));

        let next: BTreeSet<usize> = removed_positions(&data, &perturb_random(&data, p, l + 1).unwrap())
            .into_iter()
            .collect();
        prop_assert_ne!(&removed, &next);
        if 2 * k <= n {
            prop_assert!(removed.is_disjoint(&next));
        }
    }

    #[test]
    fn stratified_quotas_largest_remainder(
        counts in prop::collection::vec(1usize..80, 2..7),
        frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let n: usize = counts.iter().sum();
        let k = ((n as f64) * frac).floor() as usize;
        let q = stratified_quotas(&counts, k, seed);
        prop_assert_eq!(q.iter().sum::<usize>(), k);
        let mut extra_rem = Vec::new();
        let mut plain_rem = Vec::new();
        for (c, (&count, &quota)) in counts.iter().zip(&q).enumerate() {
            let floor = k * count / n;
            let rem = k * count % n;
            prop_assert!(quota == floor || quota == floor + 1, "class {}: {} vs floor {}", c, quota, floor);
            if quota == floor + 1 { extra_rem.push(rem) } else { plain_rem.push(rem) }
            // Within one sample of the exact proportional share.
            let exact = k as f64 * count as f64 / n as f64;
            prop_assert!((quota as f64 - exact).abs() <= 1.0);
        }
        if let (Some(lo), Some(hi)) = (extra_rem.iter().min(), plain_rem.iter().max()) {
            prop_assert!(lo >= hi);
        }
    }

    #[test]
    fn stratified_removal_follows_quotas(
        counts in prop::collection::vec(5usize..60, 2..6),
        p in 1.0f64..30.0,
        l in 1usize..8,
        seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        labels.shuffle(&mut common::rng(shuffle_seed));
        let n = labels.len();
        let k = removal_count(p, n);
        prop_assume!(k > 0);
        let data = labelled(labels.clone(), counts.len());
        let child = perturb_stratified(&data, p, l, seed).unwrap();
        let quotas = stratified_quotas(&counts, k, seed);
        let mut removed_per_class = vec![0usize; counts.len()];
        for pos in removed_positions(&data, &child) {
            removed_per_class[labels[pos]] += 1;
        }
        prop_assert_eq!(&removed_per_class, &quotas);
        prop_assert_eq!(child.len(), n - k);
        let child_counts = child.class_counts().unwrap();
        for c in 0..counts.len() {
            prop_assert_eq!(child_counts[c], counts[c] - quotas[c]);
            prop_assert!(child_counts[c] > 0);
        }
    }
}

#[test]
fn hundred_class_distributions_apportion_exactly() {
    use rand::Rng;
    let mut rng = common::rng(4);
    for _ in 0..100 {
        let classes = rng.random_range(2..8);
        let counts: Vec<usize> = (0..classes).map(|_| rng.random_range(3..120)).collect();
        let n: usize = counts.iter().sum();
        let k = removal_count(rng.random_range(1.0..40.0), n);
        let q = stratified_quotas(&counts, k, rng.random());
        assert_eq!(q.iter().sum::<usize>(), k);
        for (&c, &qc) in counts.iter().zip(&q) {
            assert!((qc as f64 - k as f64 * c as f64 / n as f64).abs() <= 1.0);
        }
    }
}
