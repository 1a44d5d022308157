use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{auroc, EvalError, Result};
use crate::seeding;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const MIN_REPLICATES: usize = 100;
/// Attempts allowed per requested replicate before giving up.
const REDRAW_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    /// Usable replicates behind the interval.
    pub replicates: usize,
    pub requested: usize,
    pub seed: u64,
    pub percentiles: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDeltaTest {
    /// `AUROC(a) − AUROC(b)` on the full sample.
    pub delta: f64,
    pub p_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
    pub requested: usize,
    pub seed: u64,
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn is_single_class(e: &EvalError) -> bool {
    matches!(e, EvalError::SingleClass | EvalError::NoPositives)
}

/// Draws replicate statistics until `requested` succeed or the attempt budget
/// runs out. Attempt `a` resamples with the stream `derive_seed(seed, a)`.
/// Single-class resamples are redrawn; other metric errors propagate.
fn replicate<F>(n: usize, requested: usize, seed: u64, mut stat: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if requested < MIN_REPLICATES {
        return Err(EvalError::TooFewRequested(requested));
    }
    let mut values = Vec::with_capacity(requested);
    let mut idx = vec![0usize; n];
    let mut attempt = 0u64;
    while values.len() < requested && attempt < (REDRAW_FACTOR * requested) as u64 {
        let mut rng = seeding::job_rng(seed, attempt);
        attempt += 1;
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        match stat(&idx) {
            Ok(v) => values.push(v),
            Err(e) if is_single_class(&e) => {}
            Err(e) => return Err(e),
        }
    }
    if 2 * values.len() < requested {
        return Err(EvalError::TooFewReplicates {
            kept: values.len(),
            requested,
        });
    }
    Ok(values)
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    Ok(())
}

/// Percentile bootstrap interval (2.5, 97.5) for `metric`.
pub fn bootstrap_ci<F>(metric: F, scores: &[f64], labels: &[bool], replicates: usize, seed: u64) -> Result<BootstrapCi>
where
    F: Fn(&[f64], &[bool]) -> Result<f64>,
{
    check_lengths(scores, labels)?;
    let point = metric(scores, labels)?;
    let mut s = vec![0.0; scores.len()];
    let mut l = vec![false; scores.len()];
    let mut values = replicate(scores.len(), replicates, seed, |idx| {
        for (k, &i) in idx.iter().enumerate() {
            s[k] = scores[i];
            l[k] = labels[i];
        }
        metric(&s, &l)
    })?;
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        point,
        lower: quantile_sorted(&values, 0.025),
        upper: quantile_sorted(&values, 0.975),
        replicates: values.len(),
        requested: replicates,
        seed,
        percentiles: (2.5, 97.5),
    })
}

/// Paired bootstrap test of `AUROC(a) − AUROC(b)`; rows are resampled jointly.
///
/// `p = 2·min(P(Δ* ≤ 0), P(Δ* ≥ 0))`, clipped to `[1/B, 1]`.
pub fn paired_delta_auroc(
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[bool],
    replicates: usize,
    seed: u64,
) -> Result<PairedDeltaTest> {
    check_lengths(scores_a, labels)?;
    check_lengths(scores_b, labels)?;
    let delta = auroc(scores_a, labels)? - auroc(scores_b, labels)?;
    let n = labels.len();
    let (mut a, mut b, mut l) = (vec![0.0; n], vec![0.0; n], vec![false; n]);
    let mut values = replicate(n, replicates, seed, |idx| {
        for (k, &i) in idx.iter().enumerate() {
            a[k] = scores_a[i];
            b[k] = scores_b[i];
            l[k] = labels[i];
        }
        Ok(auroc(&a, &l)? - auroc(&b, &l)?)
    })?;
    let m = values.len() as f64;
    let at_most_zero = values.iter().filter(|&&d| d <= 0.0).count() as f64 / m;
    let at_least_zero = values.iter().filter(|&&d| d >= 0.0).count() as f64 / m;
    let p_value = (2.0 * at_most_zero.min(at_least_zero)).clamp(1.0 / m, 1.0);
    values.sort_by(f64::total_cmp);
    Ok(PairedDeltaTest {
        delta,
        p_value,
        lower: quantile_sorted(&values, 0.025),
        upper: quantile_sorted(&values, 0.975),
        replicates: values.len(),
        requested: replicates,
        seed,
    })
}
