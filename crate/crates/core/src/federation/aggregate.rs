use super::weights::AggregationWeights;
use crate::error::{Error, Result};
use crate::model::ModelParams;

fn check_children(parent: &ModelParams, children: &[&ModelParams]) -> Result<()> {
    if children.is_empty() {
        return Err(Error::Empty("replicas to aggregate"));
    }
    for child in children {
        parent.check_common_structure(child)?;
    }
    Ok(())
}

/// Blends each common layer as `½·parent + ½·Σ α_r·child_r`; personalized
/// layers of the parent pass through.
///
/// Evaluated as `parent + ½·Σ α_r·(child_r − parent)`, which is the same
/// blend whenever the weights sum to one and leaves the parent bitwise
/// unchanged when every child equals it.
pub fn aggregate_diversity(
    parent: &ModelParams,
    children: &[&ModelParams],
    alpha: &AggregationWeights,
) -> Result<ModelParams> {
    check_children(parent, children)?;
    if alpha.len() != children.len() {
        return Err(Error::shape("aggregation weights", &[children.len()], &[alpha.len()]));
    }
    Ok(blend(parent, children, alpha.values(), 0.5))
}

/// Uniform mean over the parent and its replicas on common layers,
/// `parent + (1 / (r + 1))·Σ (child_r − parent)`.
pub fn aggregate_simple(parent: &ModelParams, children: &[&ModelParams]) -> Result<ModelParams> {
    check_children(parent, children)?;
    let weights = vec![1.0; children.len()];
    Ok(blend(parent, children, &weights, 1.0 / (children.len() + 1) as f64))
}

fn blend(parent: &ModelParams, children: &[&ModelParams], weights: &[f64], scale: f64) -> ModelParams {
    let mut out = parent.clone();
    let child_layers: Vec<Vec<_>> = children.iter().map(|c| c.common_layers().collect()).collect();
    let mut common_idx = 0;
    for (li, layer) in out.layers_mut().iter_mut().enumerate() {
        if !parent.is_common(li) {
            continue;
        }
        for (e, value) in layer.values.iter_mut().enumerate() {
            let base = *value;
            let mut acc = 0.0;
            for (child, &w) in child_layers.iter().zip(weights) {
                acc += w * (child[common_idx].values[e] - base);
            }
            *value = base + scale * acc;
        }
        common_idx += 1;
    }
    out
}

/// Uniform mean of the common layers of all models, returned as a model of
/// common layers only. Each element is summed in sorted order so the result
/// does not depend on the order of `models`.
pub fn average_common(models: &[&ModelParams]) -> Result<ModelParams> {
    let first = models.first().ok_or(Error::Empty("models to average"))?;
    if first.common_count() == 0 {
        return Err(Error::NoCommonLayers);
    }
    for m in &models[1..] {
        first.check_common_structure(m)?;
    }
    let layer_sets: Vec<Vec<_>> = models.iter().map(|m| m.common_layers().collect()).collect();
    let mut out = first.common_only();
    let count = models.len() as f64;
    let mut buf = Vec::with_capacity(models.len());
    for (li, layer) in out.layers_mut().iter_mut().enumerate() {
        for (e, value) in layer.values.iter_mut().enumerate() {
            buf.clear();
            buf.extend(layer_sets.iter().map(|ls| ls[li].values[e]));
            buf.sort_by(f64::total_cmp);
            let sum = buf[1..].iter().fold(buf[0], |a, b| a + b);
            *value = sum / count;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerTensor;

    fn single(values: Vec<f64>) -> ModelParams {
        let n = values.len();
        ModelParams::all_common(vec![LayerTensor::new("w", vec![n], values).unwrap()]).unwrap()
    }

    #[test]
    fn identical_children_fixed_point() {
        let p = single(vec![0.1, -3.7, 1e-9]);
        let alpha = AggregationWeights(vec![0.2, 0.3, 0.5]);
        let out = aggregate_diversity(&p, &[&p, &p, &p], &alpha).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn midpoint() {
        let out = aggregate_diversity(&single(vec![0.0]), &[&single(vec![2.0])], &AggregationWeights(vec![1.0])).unwrap();
        assert_eq!(out.layers()[0].values, vec![1.0]);
    }

    #[test]
    fn weighted_blend() {
        let parent = single(vec![0.0, 0.0]);
        let a = single(vec![2.0, 0.0]);
        let b = single(vec![0.0, 4.0]);
        let out = aggregate_diversity(&parent, &[&a, &b], &AggregationWeights(vec![0.5, 0.5])).unwrap();
        assert_eq!(out.layers()[0].values, vec![0.5, 1.0]);
    }

    #[test]
    fn personalized_layers_pass_through() {
        let mk = |c: f64, h: f64| {
            ModelParams::new(
                vec![
                    LayerTensor::new("c", vec![1], vec![c]).unwrap(),
                    LayerTensor::new("h", vec![1], vec![h]).unwrap(),
                ],
                vec![true, false],
            )
            .unwrap()
        };
        let out = aggregate_diversity(&mk(0.0, 7.0), &[&mk(4.0, -1.0)], &AggregationWeights(vec![1.0])).unwrap();
        assert_eq!(out.layers()[0].values, vec![2.0]);
        assert_eq!(out.layers()[1].values, vec![7.0]);
    }

    #[test]
    fn mismatches() {
        let p = single(vec![0.0]);
        assert!(aggregate_diversity(&p, &[&p], &AggregationWeights(vec![0.5, 0.5])).is_err());
        assert!(aggregate_diversity(&p, &[&single(vec![0.0, 1.0])], &AggregationWeights(vec![1.0])).is_err());
        assert!(aggregate_diversity(&p, &[], &AggregationWeights(vec![])).is_err());
    }

    #[test]
    fn simple_mean() {
        let out = aggregate_simple(&single(vec![0.0]), &[&single(vec![3.0]), &single(vec![6.0])]).unwrap();
        assert_eq!(out.layers()[0].values, vec![3.0]);
    }

    #[test]
    fn server_mean() {
        let out = average_common(&[&single(vec![0.0]), &single(vec![2.0])]).unwrap();
        assert_eq!(out.layers()[0].values, vec![1.0]);
        let one = single(vec![-0.0, 0.3]);
        assert_eq!(average_common(&[&one]).unwrap(), one);
    }
}
