use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this total diversity the weights fall back to uniform.
pub const DIVERSITY_EPSILON: f64 = 1e-12;

/// Normalized per-replica aggregation weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationWeights(pub Vec<f64>);

impl AggregationWeights {
    pub fn uniform(n: usize) -> Self {
        AggregationWeights(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weights proportional to each replica's distance from its parent, so the
/// most diverse replicas weigh the most.
pub fn compute_div_aggregation_weights(divs: &[f64]) -> Result<AggregationWeights> {
    if divs.is_empty() {
        return Err(Error::Empty("diversity values"));
    }
    if let Some(bad) = divs.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::Config(format!("diversity value {bad} is not a finite nonnegative number")));
    }
    let total: f64 = divs.iter().sum();
    if total <= DIVERSITY_EPSILON {
        return Ok(AggregationWeights::uniform(divs.len()));
    }
    Ok(AggregationWeights(divs.iter().map(|d| d / total).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional() {
        assert_eq!(compute_div_aggregation_weights(&[1.0, 3.0]).unwrap().0, vec![0.25, 0.75]);
        assert_eq!(
            compute_div_aggregation_weights(&[2.0, 2.0, 4.0]).unwrap().0,
            vec![0.25, 0.25, 0.5]
        );
    }

    #[test]
    fn all_zero_is_uniform() {
        let w = compute_div_aggregation_weights(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w.0, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert!(compute_div_aggregation_weights(&[]).is_err());
        assert!(compute_div_aggregation_weights(&[1.0, -0.5]).is_err());
        assert!(compute_div_aggregation_weights(&[f64::NAN]).is_err());
    }
}
