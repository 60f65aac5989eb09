use super::tensor::{LayerTensor, ModelParams};
use crate::error::{Error, Result};

/// Euclidean distance between two equally shaped layers.
pub fn layer_l2_distance(a: &LayerTensor, r: &LayerTensor) -> Result<f64> {
    if a.shape != r.shape {
        return Err(Error::shape(format!("layer {}", a.name), &a.shape, &r.shape));
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&r.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

/// Mean layerwise L2 distance over the common layers of two models.
/// Personalized layers do not contribute.
pub fn model_divergence(a: &ModelParams, r: &ModelParams) -> Result<f64> {
    a.check_common_structure(r)?;
    let n_common = a.common_count();
    if n_common == 0 {
        return Err(Error::NoCommonLayers);
    }
    let mut total = 0.0;
    for (la, lr) in a.common_layers().zip(r.common_layers()) {
        total += layer_l2_distance(la, lr)?;
    }
    Ok(total / n_common as f64)
}
