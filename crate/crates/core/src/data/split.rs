use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.7, test_fraction: 0.2, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let in_range = |f: f64| f.is_finite() && (0.0..=1.0).contains(&f);
        if !in_range(self.train_fraction) || self.train_fraction == 0.0 {
            return Err(DataError::InvalidSplit(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !in_range(self.test_fraction) {
            return Err(DataError::InvalidSplit(format!(
                "test_fraction must be in [0, 1], got {}",
                self.test_fraction
            )));
        }
        if self.train_fraction + self.test_fraction > 1.0 + 1e-12 {
            return Err(DataError::InvalidSplit(format!(
                "train_fraction + test_fraction = {} exceeds 1",
                self.train_fraction + self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Result of [`split`]. Samples left over after taking the train and test
/// shares are dropped and only counted.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub discarded: usize,
}

/// Seeded random split into disjoint train/test subsets of sizes
/// `round(n * fraction)`. Within each subset samples keep their shuffled order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split, DataError> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = ds.len();
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    let n_test = ((n as f64 * spec.test_fraction).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let train = ds.select(format!("{}.train", ds.name()), &order[..n_train]);
    let test = ds.select(format!("{}.test", ds.name()), &order[n_train..n_train + n_test]);
    Ok(Split { train, test, discarded: n - n_train - n_test })
}
