mod common;

use proptest::prelude::*;
use rand::Rng;
use reptreefl::federation::{
    aggregate_diversity, aggregate_simple, average_common, compute_div_aggregation_weights,
    AggregationWeights,
};
use reptreefl::model::{layer_l2_distance, model_divergence, LayerTensor, ModelParams};

use common::{bits, random_model, rng};

const SHAPES: [&[usize]; 4] = [&[3, 4], &[4], &[4, 2], &[2]];

fn shapes() -> Vec<Vec<usize>> {
    SHAPES.iter().map(|s| s.to_vec()).collect()
}

fn brute_l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

#[test]
fn weights_match_proportional_oracle() {
    let mut rng = rng(11);
    for _ in 0..1000 {
        let r = rng.random_range(1..8);
        let divs: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..5.0)).collect();
        let alpha = compute_div_aggregation_weights(&divs).unwrap();
        let total: f64 = divs.iter().sum();
        let sum: f64 = alpha.values().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
        for (a, d) in alpha.values().iter().zip(&divs) {
            assert!((a - d / total).abs() <= 1e-12, "{a} vs {}", d / total);
        }
    }
}

#[test]
fn zero_diversity_gives_uniform_weights() {
    for r in 1..6 {
        let alpha = compute_div_aggregation_weights(&vec![0.0; r]).unwrap();
        assert_eq!(alpha, AggregationWeights::uniform(r));
        assert!(alpha.values().iter().all(|&a| a == 1.0 / r as f64));
    }
}

proptest! {
    #[test]
    fn weights_are_monotone(divs in prop::collection::vec(0.0f64..10.0, 1..8), bump in 0.0f64..3.0, which in 0usize..8) {
        prop_assume!(divs.iter().sum::<f64>() > 1e-9);
        let alpha = compute_div_aggregation_weights(&divs).unwrap();
        for i in 0..divs.len() {
            for j in 0..divs.len() {
                if divs[i] >= divs[j] {
                    prop_assert!(alpha.values()[i] >= alpha.values()[j]);
                }
            }
        }
        let i = which % divs.len();
        let mut larger = divs.clone();
        larger[i] += bump;
        let raised = compute_div_aggregation_weights(&larger).unwrap();
        prop_assert!(raised.values()[i] >= alpha.values()[i] - 1e-15);
    }

    #[test]
    fn l2_distance_matches_brute_force(seed in any::<u64>(), len in 1usize..64) {
        let mut rng = rng(seed);
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let la = LayerTensor::new("w", vec![len], a.clone()).unwrap();
        let lb = LayerTensor::new("w", vec![len], b.clone()).unwrap();
        prop_assert!((layer_l2_distance(&la, &lb).unwrap() - brute_l2(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn divergence_is_mean_over_common_layers(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut a = random_model(&mut rng, &shapes());
        let mut b = random_model(&mut rng, &shapes());
        a.set_common("l3", false).unwrap();
        b.set_common("l3", false).unwrap();
        let expected = (0..3)
            .map(|i| brute_l2(&a.layers()[i].values, &b.layers()[i].values))
            .sum::<f64>() / 3.0;
        prop_assert!((model_divergence(&a, &b).unwrap() - expected).abs() <= 1e-12);
    }
}

fn blend_oracle(parent: &ModelParams, children: &[ModelParams], alpha: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for (li, layer) in parent.layers().iter().enumerate() {
        for e in 0..layer.values.len() {
            let mut s = 0.0;
            for (c, a) in children.iter().zip(alpha) {
                s += a * c.layers()[li].values[e];
            }
            out.push(0.5 * layer.values[e] + 0.5 * s);
        }
    }
    out
}

#[test]
fn diversity_blend_matches_half_half_oracle() {
    let mut rng = rng(5);
    for _ in 0..200 {
        let parent = random_model(&mut rng, &shapes());
        let r = rng.random_range(1..6);
        let children: Vec<ModelParams> = (0..r).map(|_| random_model(&mut rng, &shapes())).collect();
        let divs: Vec<f64> = children.iter().map(|c| model_divergence(&parent, c).unwrap()).collect();
        let alpha = compute_div_aggregation_weights(&divs).unwrap();
        let refs: Vec<&ModelParams> = children.iter().collect();
        let got = aggregate_diversity(&parent, &refs, &alpha).unwrap();
        let expected = blend_oracle(&parent, &children, alpha.values());
        let got: Vec<f64> = got.layers().iter().flat_map(|l| l.values.clone()).collect();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() <= 1e-12, "{g} vs {e}");
        }
    }
}

#[test]
fn blend_fixed_point_is_exact() {
    let mut rng = rng(6);
    for _ in 0..100 {
        let parent = random_model(&mut rng, &shapes());
        let r = rng.random_range(1..6);
        let children = vec![parent.clone(); r];
        let refs: Vec<&ModelParams> = children.iter().collect();
        let divs: Vec<f64> = refs.iter().map(|c| model_divergence(&parent, c).unwrap()).collect();
        let alpha = compute_div_aggregation_weights(&divs).unwrap();
        assert_eq!(bits(&aggregate_diversity(&parent, &refs, &alpha).unwrap()), bits(&parent));
        assert_eq!(bits(&aggregate_simple(&parent, &refs).unwrap()), bits(&parent));
    }
}

#[test]
fn personalized_layers_pass_through_blend() {
    let mut rng = rng(7);
    let mut parent = random_model(&mut rng, &shapes());
    parent.set_common("l2", false).unwrap();
    parent.set_common("l3", false).unwrap();
    let mut child = random_model(&mut rng, &shapes());
    child.set_common("l2", false).unwrap();
    child.set_common("l3", false).unwrap();
    let out = aggregate_diversity(&parent, &[&child], &AggregationWeights::uniform(1)).unwrap();
    assert_eq!(out.layers()[2], parent.layers()[2]);
    assert_eq!(out.layers()[3], parent.layers()[3]);
    assert_ne!(out.layers()[0], parent.layers()[0]);
}

#[test]
fn simple_blend_is_uniform_mean_of_parent_and_replicas() {
    let mut rng = rng(8);
    for _ in 0..200 {
        let parent = random_model(&mut rng, &shapes());
        let r = rng.random_range(1..6);
        let children: Vec<ModelParams> = (0..r).map(|_| random_model(&mut rng, &shapes())).collect();
        let refs: Vec<&ModelParams> = children.iter().collect();
        let got = aggregate_simple(&parent, &refs).unwrap();
        for (li, layer) in got.layers().iter().enumerate() {
            for (e, g) in layer.values.iter().enumerate() {
                let mut s = parent.layers()[li].values[e];
                for c in &children {
                    s += c.layers()[li].values[e];
                }
                let mean = s / (r + 1) as f64;
                assert!((g - mean).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #[test]
    fn server_average_ignores_client_order(seed in any::<u64>(), m in 1usize..6, rot in 0usize..6) {
        let mut rng = rng(seed);
        let models: Vec<ModelParams> = (0..m).map(|_| random_model(&mut rng, &shapes())).collect();
        let refs: Vec<&ModelParams> = models.iter().collect();
        let mut rotated = refs.clone();
        rotated.rotate_left(rot % m);
        rotated.reverse();
        let a = average_common(&refs).unwrap();
        prop_assert_eq!(bits(&a), bits(&average_common(&rotated).unwrap()));
        for (li, layer) in a.layers().iter().enumerate() {
            for (e, v) in layer.values.iter().enumerate() {
                let mean = models.iter().map(|p| p.layers()[li].values[e]).sum::<f64>() / m as f64;
                prop_assert!((v - mean).abs() <= 1e-12);
            }
        }
    }
}
