use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{backward_and_loss, LossKind, ModelSpec};
use crate::seed::{derive_seed, TAG_EPOCH};
use crate::tree::{FederationConfig, NodePath, ReplicaNode};

/// Hyperparameters of local minibatch training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub root_seed: u64,
}

impl From<&FederationConfig> for TrainSettings {
    fn from(c: &FederationConfig) -> Self {
        TrainSettings {
            epochs: c.epochs,
            lr: c.lr,
            batch_size: c.batch_size,
            loss: c.loss,
            root_seed: c.seed,
        }
    }
}

/// Shuffle order of a node's samples for one global epoch.
pub(crate) fn epoch_order(root_seed: u64, path: &NodePath, global_epoch: usize, n: usize) -> Vec<usize> {
    let mut tags = Vec::with_capacity(path.elements().len() + 2);
    tags.push(TAG_EPOCH);
    tags.push(global_epoch as u64);
    tags.extend_from_slice(path.elements());
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(root_seed, &tags)));
    order
}

/// Runs `settings.epochs` epochs of minibatch training on the node's own
/// data. Every step updates common and personalized layers together from
/// the same minibatch gradient. `round` (0-based) positions the epochs on
/// the node's global epoch counter, which fixes the shuffle order.
///
/// Returns the sample-weighted mean loss of each epoch.
pub fn hetero_local_update(
    node: &mut ReplicaNode,
    spec: &ModelSpec,
    settings: &TrainSettings,
    round: usize,
) -> Result<Vec<f64>> {
    let n = node.dataset.len();
    if n == 0 {
        return Err(Error::Empty("local dataset"));
    }
    let mut losses = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        let global_epoch = round * settings.epochs + epoch;
        let order = epoch_order(settings.root_seed, &node.path, global_epoch, n);
        let mut total = 0.0;
        for batch in order.chunks(settings.batch_size) {
            let (x, y) = node.dataset.batch(batch);
            let (loss, grads) = backward_and_loss(spec, &node.params, &x, &y, settings.loss)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    path: node.path.to_string(),
                    round,
                    epoch,
                });
            }
            node.optimizer.step(&mut node.params, &grads, settings.lr)?;
            total += loss * batch.len() as f64;
        }
        losses.push(total / n as f64);
    }
    Ok(losses)
}

/// Local training of a single node; alias of [`hetero_local_update`], which
/// reduces to plain minibatch training when every layer is common.
pub fn local_train(
    node: &mut ReplicaNode,
    spec: &ModelSpec,
    settings: &TrainSettings,
    round: usize,
) -> Result<Vec<f64>> {
    hetero_local_update(node, spec, settings, round)
}
