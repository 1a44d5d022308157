use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LearnerError, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub fold_assignment: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Assigns rows to `k` folds.
///
/// Stratified plans shuffle positives and negatives separately and deal
/// them round-robin, negatives continuing where positives stopped, so fold
/// sizes and per-fold positive counts both differ by at most one. Without
/// labels a stratified request degrades to a plain shuffle.
pub fn make_cv_plan(n: usize, k: usize, y: Option<&[bool]>, seed: u64, stratified: bool) -> Result<CvPlan> {
    if k < 2 || k > n {
        return Err(LearnerError::BadK { k, n });
    }
    if let Some(y) = y {
        if y.len() != n {
            return Err(LearnerError::LengthMismatch { expected: n, got: y.len() });
        }
    }
    let mut rng = seeding::rng(seed);
    let strata: Vec<Vec<usize>> = match (stratified, y) {
        (true, Some(y)) => vec![
            (0..n).filter(|&i| y[i]).collect(),
            (0..n).filter(|&i| !y[i]).collect(),
        ],
        _ => vec![(0..n).collect()],
    };
    let mut fold_assignment = vec![0; n];
    let mut offset = 0;
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        for (j, &i) in stratum.iter().enumerate() {
            fold_assignment[i] = (offset + j) % k;
        }
        offset += stratum.len();
    }
    Ok(CvPlan {
        k,
        fold_assignment,
        seed,
        stratified,
    })
}

impl CvPlan {
    pub fn n(&self) -> usize {
        self.fold_assignment.len()
    }

    /// `(train, held_out)` row indices of `fold`, ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&i| self.fold_assignment[i] != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_assignment {
            sizes[f] += 1;
        }
        sizes
    }
}
