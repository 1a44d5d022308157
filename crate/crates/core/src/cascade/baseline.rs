use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{certainty, CascadeError, Result};
use crate::seeding;

/// Reference escalation policies driven by the Basic model alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    /// Highest Basic probability first.
    TopProb,
    /// Lowest Basic certainty first.
    MostUncertain,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Random, BaselineKind::TopProb, BaselineKind::MostUncertain];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::TopProb => "top_prob",
            BaselineKind::MostUncertain => "most_uncertain",
        }
    }
}

/// Escalation count for a rate, `round(rate·n)`.
pub fn escalation_count(rate: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CascadeError::BadRate(rate));
    }
    Ok(((rate * n as f64).round() as usize).min(n))
}

/// Marks the `k` rows with the highest `priority`; ties go to lower indices.
pub fn top_k_mask(priority: &[f64], k: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..priority.len()).collect();
    order.sort_by(|&a, &b| priority[b].total_cmp(&priority[a]).then(a.cmp(&b)));
    let mut mask = vec![false; priority.len()];
    for &i in order.iter().take(k) {
        mask[i] = true;
    }
    mask
}

/// Escalates exactly `round(rate·n)` rows chosen by `kind`.
pub fn baseline_policy(kind: BaselineKind, rate: f64, p_b: &[f64], seed: u64) -> Result<Vec<bool>> {
    let n = p_b.len();
    let k = escalation_count(rate, n)?;
    Ok(match kind {
        BaselineKind::Random => {
            let mut mask = vec![false; n];
            for i in index::sample(&mut seeding::rng(seed), n, k) {
                mask[i] = true;
            }
            mask
        }
        BaselineKind::TopProb => top_k_mask(p_b, k),
        BaselineKind::MostUncertain => {
            let neg_certainty = p_b.iter().map(|&p| certainty(p).map(|c| -c)).collect::<Result<Vec<f64>>>()?;
            top_k_mask(&neg_certainty, k)
        }
    })
}
