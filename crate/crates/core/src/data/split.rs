use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Fold membership for every sample position of a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: usize,
    /// `assignment[position]` is the fold of that sample.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// Which fold each client trains on and which fold is the shared test set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRoles {
    pub client_folds: Vec<usize>,
    pub test_fold: usize,
}

impl SplitPlan {
    /// Sorted sample positions of one fold.
    pub fn fold_positions(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(pos, &f)| (f == fold).then_some(pos))
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Roles for configuration `config`: client `i` gets fold
    /// `(i + config) mod folds` and the test set is fold
    /// `(clients + config) mod folds`.
    pub fn roles(&self, config: usize, clients: usize) -> Result<FoldRoles> {
        if clients + 1 > self.folds {
            return Err(Error::Config(format!(
                "{clients} clients need at least {} folds, plan has {}",
                clients + 1,
                self.folds
            )));
        }
        Ok(FoldRoles {
            client_folds: (0..clients).map(|i| (i + config) % self.folds).collect(),
            test_fold: (clients + config) % self.folds,
        })
    }

    pub fn fold_dataset(&self, dataset: &Dataset, fold: usize) -> Result<Dataset> {
        dataset.subset(&self.fold_positions(fold))
    }
}

/// Partitions samples into `folds` near-equal folds. Stratified assignment
/// deals each class's shuffled positions round-robin, continuing the fold
/// cursor across classes, so per-class and total fold sizes each differ by
/// at most one.
pub fn kfold_assign(dataset: &Dataset, folds: usize, seed: u64, stratified: bool) -> Result<SplitPlan> {
    let n = dataset.len();
    if folds < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    if n < folds {
        return Err(Error::InvalidDataset(format!(
            "{n} samples cannot fill {folds} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; n];
    let groups: Vec<Vec<usize>> = if stratified {
        let labels = dataset.labels().ok_or_else(|| {
            Error::InvalidDataset("stratified folds need class labels".into())
        })?;
        let classes = dataset.num_classes().unwrap_or(0);
        let mut groups = vec![Vec::new(); classes];
        for (pos, &l) in labels.iter().enumerate() {
            groups[l].push(pos);
        }
        groups
    } else {
        vec![(0..n).collect()]
    };
    let mut cursor = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for pos in group {
            assignment[pos] = cursor % folds;
            cursor += 1;
        }
    }
    Ok(SplitPlan {
        folds,
        assignment,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Matrix, Targets};

    fn labeled(labels: Vec<usize>, classes: usize) -> Dataset {
        let n = labels.len();
        Dataset::with_sequential_ids(
            Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap(),
            Targets::Classes { labels, classes },
        )
        .unwrap()
    }

    #[test]
    fn eight_hundred_into_four() {
        let d = labeled(vec![0; 800], 2);
        let plan = kfold_assign(&d, 4, 3, false).unwrap();
        assert_eq!(plan.fold_sizes(), vec![200; 4]);
    }

    #[test]
    fn singleton_folds() {
        let d = labeled(vec![0; 10], 1);
        let plan = kfold_assign(&d, 10, 3, false).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 10]);
    }

    #[test]
    fn stratified_sixty_forty() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 5 >= 3)).collect();
        let d = labeled(labels.clone(), 2);
        let plan = kfold_assign(&d, 5, 11, true).unwrap();
        for f in 0..5 {
            let pos = plan.fold_positions(f);
            let ones = pos.iter().filter(|&&p| labels[p] == 1).count();
            assert_eq!(pos.len(), 20);
            assert_eq!((pos.len() - ones, ones), (12, 8));
        }
    }

    #[test]
    fn too_few_samples() {
        let d = labeled(vec![0; 3], 1);
        assert!(kfold_assign(&d, 4, 0, false).is_err());
        assert!(kfold_assign(&d, 1, 0, false).is_err());
    }

    #[test]
    fn roles_rotate() {
        let d = labeled(vec![0; 8], 1);
        let plan = kfold_assign(&d, 4, 0, false).unwrap();
        let r = plan.roles(1, 3).unwrap();
        assert_eq!(r.client_folds, vec![1, 2, 3]);
        assert_eq!(r.test_fold, 0);
        assert!(plan.roles(0, 4).is_err());
    }
}
