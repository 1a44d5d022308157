use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

/// Row order by descending score, ties by index.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Area under the ROC curve by the rank-sum method with midranks for ties.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps midranks integral.
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end; midrank·2 = start + 1 + end.
        let mid2 = (start + 1 + end) as u128;
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        rank_sum2 += mid2 * pos_in_block;
        start = end;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

/// Area under the precision-recall step curve, `Σ (R_k − R_{k−1})·P_k` over
/// distinct descending score cutoffs.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (n_pos, _) = class_counts(labels);
    if n_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for p in pr_curve(scores, labels)? {
        area += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Predicted positive iff `score > cutoff`.
    pub fn at_cutoff(scores: &[f64], labels: &[bool], cutoff: f64) -> Self {
        let mut c = Self::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s > cutoff, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedMetrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    /// Set when nothing was predicted positive; precision is then reported
    /// as 0.
    pub precision_undefined: bool,
    pub counts: ConfusionCounts,
}

impl ThresholdedMetrics {
    pub fn from_counts(c: ConfusionCounts) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            accuracy: ratio(c.tp + c.tn, c.n()),
            recall: ratio(c.tp, c.tp + c.fn_),
            precision: ratio(c.tp, c.tp + c.fp),
            precision_undefined: c.tp + c.fp == 0,
            counts: c,
        }
    }
}

pub fn thresholded_metrics(scores: &[f64], labels: &[bool], cutoff: f64) -> Result<ThresholdedMetrics> {
    check_lengths(scores, labels)?;
    Ok(ThresholdedMetrics::from_counts(ConfusionCounts::at_cutoff(scores, labels, cutoff)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auroc: f64,
    pub auprc: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub precision_undefined: bool,
    pub n: usize,
    pub cutoff: f64,
}

pub fn metric_set(scores: &[f64], labels: &[bool], cutoff: f64) -> Result<MetricSet> {
    let t = thresholded_metrics(scores, labels, cutoff)?;
    Ok(MetricSet {
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        accuracy: t.accuracy,
        recall: t.recall,
        precision: t.precision,
        precision_undefined: t.precision_undefined,
        n: scores.len(),
        cutoff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Cumulative (threshold, tp, fp) at each distinct score, descending.
fn cutoffs(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let order = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (pos, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_block = order.get(pos + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_block {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

/// ROC points from (0, 0) at threshold +∞ to (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    check_lengths(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut pts = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    pts.extend(cutoffs(scores, labels).into_iter().map(|(t, tp, fp)| RocPoint {
        threshold: t,
        fpr: fp as f64 / n_neg as f64,
        tpr: tp as f64 / n_pos as f64,
    }));
    Ok(pts)
}

/// Precision-recall points at each distinct cutoff, recall ascending.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    check_lengths(scores, labels)?;
    let (n_pos, _) = class_counts(labels);
    if n_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    Ok(cutoffs(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| PrPoint {
            threshold: t,
            recall: tp as f64 / n_pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
        })
        .collect())
}
