use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{LayerTensor, ModelParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed in terms of the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Head {
    Classification { classes: usize },
    Regression { outputs: usize },
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Classification { classes } => classes,
            Head::Regression { outputs } => outputs,
        }
    }

    pub fn kind_name(self) -> &'static str {
        match self {
            Head::Classification { .. } => "classification",
            Head::Regression { .. } => "regression",
        }
    }
}

/// Architecture of a fully connected network.
///
/// Dense block `i` owns the layers `dense{i}.weight` (shape `[in, out]`) and
/// `dense{i}.bias` (shape `[out]`). The last `personalized_blocks` blocks are
/// excluded from federation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub activations: Vec<Activation>,
    pub head: Head,
    #[serde(default)]
    pub personalized_blocks: usize,
}

impl ModelSpec {
    /// ReLU hidden layers, everything federated.
    pub fn new(input: usize, hidden: Vec<usize>, head: Head) -> Self {
        let activations = vec![Activation::Relu; hidden.len()];
        ModelSpec {
            input,
            hidden,
            activations,
            head,
            personalized_blocks: 0,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activations = vec![activation; self.hidden.len()];
        self
    }

    /// Keep the output block local to each client.
    pub fn with_personalized_head(mut self) -> Self {
        self.personalized_blocks = 1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidSpec("at least one hidden layer is required".into()));
        }
        if self.input == 0 || self.hidden.contains(&0) || self.head.outputs() == 0 {
            return Err(Error::InvalidSpec("layer sizes must be positive".into()));
        }
        if self.activations.len() != self.hidden.len() {
            return Err(Error::InvalidSpec(format!(
                "{} activations for {} hidden layers",
                self.activations.len(),
                self.hidden.len()
            )));
        }
        if self.personalized_blocks >= self.blocks() {
            return Err(Error::InvalidSpec(
                "at least one dense block must stay common".into(),
            ));
        }
        Ok(())
    }

    pub fn blocks(&self) -> usize {
        self.hidden.len() + 1
    }

    /// `(fan_in, fan_out)` for every dense block.
    pub fn block_dims(&self) -> Vec<(usize, usize)> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.head.outputs());
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn outputs(&self) -> usize {
        self.head.outputs()
    }
}

/// Deterministic initialization: zero-mean normal weights with standard
/// deviation `sqrt(gain / fan_in)` (gain 2 before a ReLU, 1 otherwise) and
/// zero biases.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ModelParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = spec.block_dims();
    let first_personal = dims.len() - spec.personalized_blocks;
    let mut layers = Vec::with_capacity(dims.len() * 2);
    let mut common = Vec::with_capacity(dims.len() * 2);
    for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let gain = match spec.activations.get(i) {
            Some(Activation::Relu) => 2.0,
            _ => 1.0,
        };
        let std = (gain / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let weights: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
        layers.push(LayerTensor::new(
            format!("dense{i}.weight"),
            vec![fan_in, fan_out],
            weights,
        )?);
        layers.push(LayerTensor::zeros(format!("dense{i}.bias"), vec![fan_out]));
        let is_common = i < first_personal;
        common.push(is_common);
        common.push(is_common);
    }
    ModelParams::new(layers, common)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ModelSpec {
        ModelSpec::new(2, vec![4], Head::Classification { classes: 3 })
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = init_params(&spec(), 7).unwrap();
        let b = init_params(&spec(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn layer_shapes() {
        let p = init_params(&spec(), 1).unwrap();
        let shapes: Vec<_> = p.layers().iter().map(|l| l.shape.clone()).collect();
        assert_eq!(shapes, vec![vec![2, 4], vec![4], vec![4, 3], vec![3]]);
        assert!(p.layers()[1].values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn different_seeds_same_shapes() {
        let a = init_params(&spec(), 1).unwrap();
        let b = init_params(&spec(), 2).unwrap();
        assert_ne!(a.layers()[0].values, b.layers()[0].values);
        for (x, y) in a.layers().iter().zip(b.layers()) {
            assert_eq!(x.shape, y.shape);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(init_params(&ModelSpec::new(2, vec![], Head::Regression { outputs: 1 }), 0).is_err());
        assert!(init_params(&ModelSpec::new(0, vec![3], Head::Regression { outputs: 1 }), 0).is_err());
        assert!(init_params(&ModelSpec::new(2, vec![3, 0], Head::Regression { outputs: 1 }), 0).is_err());
    }

    #[test]
    fn personalized_head_mask() {
        let p = init_params(&spec().with_personalized_head(), 3).unwrap();
        assert_eq!(p.common_mask(), &[true, true, false, false]);
    }

    #[test]
    fn shared_prefix_matches_across_head_sizes() {
        let a = ModelSpec::new(5, vec![6, 6], Head::Regression { outputs: 2 }).with_personalized_head();
        let b = ModelSpec::new(5, vec![6, 6], Head::Regression { outputs: 3 }).with_personalized_head();
        let pa = init_params(&a, 11).unwrap();
        let pb = init_params(&b, 11).unwrap();
        pa.check_common_structure(&pb).unwrap();
        for (x, y) in pa.common_layers().zip(pb.common_layers()) {
            assert_eq!(x.values, y.values);
        }
    }
}
