//! Fold assignment for cross-fitting.
//!
//! Row `i` belongs to evaluation fold `k` (0-based) iff `i ≡ k (mod K)`. An
//! optional seeded shuffle permutes the row indices first.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Evaluation folds: `folds[k]` lists the rows of fold `k` in increasing position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    folds: Vec<Vec<usize>>,
    n: usize,
}

impl Folds {
    pub fn count(&self) -> usize {
        self.folds.len()
    }

    pub fn fold(&self, k: usize) -> &[usize] {
        &self.folds[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.folds.iter().map(Vec::as_slice)
    }

    /// All rows outside fold `k`, in increasing order.
    pub fn complement(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Fold id of every row.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (k, f) in self.folds.iter().enumerate() {
            for &i in f {
                labels[i] = k;
            }
        }
        labels
    }
}

/// Partitions `0..n` into `k` folds by the congruence rule, optionally after
/// a permutation drawn from `shuffle_seed`.
pub fn fold_assign(n: usize, k: usize, shuffle_seed: Option<u64>) -> Result<Folds> {
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!("fold count {k} must lie in [1, {n}]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &row) in order.iter().enumerate() {
        folds[pos % k].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Folds { folds, n })
}
