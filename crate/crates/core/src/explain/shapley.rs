use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExplainError, Result};
use crate::seeding;

pub const MAX_EXACT_GROUPS: usize = 16;
/// Rows scored per batch.
const BATCH_ROWS: usize = 8192;

/// Reference rows that stand in for "absent" features.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    rows: Array2<f64>,
}

impl BackgroundSet {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(ExplainError::EmptyBackground);
        }
        Ok(Self { rows })
    }

    /// Keeps at most `cap` rows, chosen by a seeded draw and kept in their
    /// original order.
    pub fn subsample(rows: ArrayView2<f64>, cap: usize, seed: u64) -> Result<Self> {
        if rows.nrows() <= cap {
            return Self::new(rows.to_owned());
        }
        let mut keep = rand::seq::index::sample(&mut seeding::rng(seed), rows.nrows(), cap).into_vec();
        keep.sort_unstable();
        Self::new(rows.select(ndarray::Axis(0), &keep))
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.rows.ncols()
    }
}

/// Shapley attribution of one score over feature groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Mean score over the background set.
    pub base_value: f64,
    pub score: f64,
    pub group_names: Vec<String>,
    /// One value per group; positive values push the score up.
    pub phis: Vec<f64>,
    /// Per-group standard errors of the sampled estimator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
}

impl Attribution {
    /// `base_value + Σφ − score`.
    pub fn local_accuracy_gap(&self) -> f64 {
        self.base_value + self.phis.iter().sum::<f64>() - self.score
    }
}

/// Column groups masked together, e.g. the one-hot block of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMap {
    pub names: Vec<String>,
    pub columns: Vec<Vec<usize>>,
}

impl GroupMap {
    /// One group per column.
    pub fn singletons(width: usize) -> Self {
        Self {
            names: (0..width).map(|j| format!("x{j}")).collect(),
            columns: (0..width).map(|j| vec![j]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn validate(&self, width: usize) -> Result<()> {
        let mut seen = vec![false; width];
        for cols in &self.columns {
            for &c in cols {
                if c >= width || seen[c] {
                    return Err(ExplainError::BadGroups(format!("column {c} is out of range or repeated")));
                }
                seen[c] = true;
            }
        }
        if self.names.len() != self.columns.len() {
            return Err(ExplainError::BadGroups("names and column lists differ in length".into()));
        }
        if let Some(c) = seen.iter().position(|&s| !s) {
            return Err(ExplainError::BadGroups(format!("column {c} belongs to no group")));
        }
        Ok(())
    }
}

fn check_inputs(background: &BackgroundSet, x: ArrayView1<f64>, groups: &GroupMap) -> Result<()> {
    if x.len() != background.width() {
        return Err(ExplainError::WidthMismatch {
            expected: background.width(),
            got: x.len(),
        });
    }
    groups.validate(x.len())
}

fn score_one<F>(score_fn: &F, x: ArrayView1<f64>) -> f64
where
    F: Fn(ArrayView2<f64>) -> Array1<f64>,
{
    score_fn(x.insert_axis(ndarray::Axis(0)))[0]
}

/// Exact Shapley values by enumerating all `2^m` group coalitions.
///
/// The value of a coalition is the mean score over background rows with the
/// coalition's columns taken from `x`.
pub fn exact_shapley<F>(score_fn: F, background: &BackgroundSet, x: ArrayView1<f64>, groups: &GroupMap) -> Result<Attribution>
where
    F: Fn(ArrayView2<f64>) -> Array1<f64>,
{
    check_inputs(background, x, groups)?;
    let m = groups.len();
    if m > MAX_EXACT_GROUPS {
        return Err(ExplainError::TooManyGroups(m));
    }
    let n_bg = background.len();
    let n_masks = 1usize << m;
    let masks_per_batch = (BATCH_ROWS / n_bg).max(1);
    let mut value = vec![0.0; n_masks];
    let mut start = 0;
    while start < n_masks {
        let end = (start + masks_per_batch).min(n_masks);
        let mut batch = Array2::zeros(((end - start) * n_bg, x.len()));
        for mask in start..end {
            for b in 0..n_bg {
                let mut row = batch.row_mut((mask - start) * n_bg + b);
                row.assign(&background.rows.row(b));
                for (g, cols) in groups.columns.iter().enumerate() {
                    if mask >> g & 1 == 1 {
                        for &c in cols {
                            row[c] = x[c];
                        }
                    }
                }
            }
        }
        let scores = score_fn(batch.view());
        for (k, v) in value[start..end].iter_mut().enumerate() {
            let off = k * n_bg;
            *v = scores.slice(ndarray::s![off..off + n_bg]).sum() / n_bg as f64;
        }
        start = end;
    }

    // weight[s] = s!(m−s−1)!/m!
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..m).map(|s| fact[s] * fact[m - s - 1] / fact[m]).collect();
    let mut phis = vec![0.0; m];
    for (j, phi) in phis.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in (0..n_masks).filter(|s| s & bit == 0) {
            *phi += weight[mask.count_ones() as usize] * (value[mask | bit] - value[mask]);
        }
    }
    Ok(Attribution {
        base_value: value[0],
        score: score_one(&score_fn, x),
        group_names: groups.names.clone(),
        phis,
        standard_errors: None,
        n_samples: None,
    })
}

/// Antithetic permutation-sampling estimate of the Shapley values.
///
/// Each pair draws one permutation and one background row; the permutation
/// and its reverse are both walked from the background row to `x`. Pair `i`
/// uses the stream `derive_seed(seed, i)`. Standard errors are computed over
/// pair means. An odd `n_samples` is rounded up to whole pairs.
pub fn sampled_shapley<F>(
    score_fn: F,
    background: &BackgroundSet,
    x: ArrayView1<f64>,
    groups: &GroupMap,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution>
where
    F: Fn(ArrayView2<f64>) -> Array1<f64>,
{
    check_inputs(background, x, groups)?;
    let m = groups.len();
    if n_samples < 2 * m || m == 0 {
        return Err(ExplainError::TooFewSamples {
            requested: n_samples,
            minimum: 2 * m.max(1),
        });
    }
    let n_pairs = n_samples.div_ceil(2);
    let bg_scores = score_fn(background.rows());
    let score = score_one(&score_fn, x);

    // Rows per pair: interior points of the forward and reverse walks.
    let rows_per_pair = 2 * (m - 1);
    let pairs_per_batch = (BATCH_ROWS / rows_per_pair.max(1)).max(1);
    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let mut contrib = vec![0.0; m];
    let mut perm: Vec<usize> = (0..m).collect();
    let mut start = 0;
    while start < n_pairs {
        let end = (start + pairs_per_batch).min(n_pairs);
        let mut drawn = Vec::with_capacity(end - start);
        let mut batch = Array2::zeros(((end - start) * rows_per_pair, x.len()));
        for pair in start..end {
            let mut rng = seeding::job_rng(seed, pair as u64);
            perm.sort_unstable();
            perm.shuffle(&mut rng);
            let b = rng.random_range(0..background.len());
            let base_row = background.rows.row(b);
            let off = (pair - start) * rows_per_pair;
            for (dir, order) in [perm.clone(), perm.iter().rev().copied().collect::<Vec<_>>()].iter().enumerate() {
                let mut z = base_row.to_owned();
                for (k, &g) in order.iter().take(m - 1).enumerate() {
                    for &c in &groups.columns[g] {
                        z[c] = x[c];
                    }
                    batch.row_mut(off + dir * (m - 1) + k).assign(&z);
                }
            }
            drawn.push((perm.clone(), b));
        }
        let scores = if rows_per_pair > 0 { score_fn(batch.view()) } else { Array1::zeros(0) };
        for (i, (order, b)) in drawn.iter().enumerate() {
            let off = i * rows_per_pair;
            contrib.iter_mut().for_each(|c| *c = 0.0);
            for dir in 0..2 {
                let mut prev = bg_scores[*b];
                for k in 0..m {
                    let g = if dir == 0 { order[k] } else { order[m - 1 - k] };
                    let cur = if k + 1 == m { score } else { scores[off + dir * (m - 1) + k] };
                    contrib[g] += 0.5 * (cur - prev);
                    prev = cur;
                }
            }
            for g in 0..m {
                sum[g] += contrib[g];
                sum_sq[g] += contrib[g] * contrib[g];
            }
        }
        start = end;
    }
    let n = n_pairs as f64;
    let phis: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let standard_errors = sum_sq
        .iter()
        .zip(&phis)
        .map(|(&ss, &mean)| {
            if n_pairs < 2 {
                return f64::NAN;
            }
            let var = ((ss - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(Attribution {
        base_value: bg_scores.mean().expect("non-empty background"),
        score,
        group_names: groups.names.clone(),
        phis,
        standard_errors: Some(standard_errors),
        n_samples: Some(2 * n_pairs),
    })
}
