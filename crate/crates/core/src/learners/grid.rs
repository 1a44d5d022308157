use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::cv::CvPlan;
use super::{LearnerError, LearnerSpec, Result};
use crate::eval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Auroc,
    /// Accuracy at probability cutoff 0.5.
    Accuracy,
}

impl Metric {
    pub fn score(self, probs: &[f64], labels: &[bool]) -> std::result::Result<f64, eval::EvalError> {
        match self {
            Metric::Auroc => eval::auroc(probs, labels),
            Metric::Accuracy => Ok(eval::thresholded_metrics(probs, labels, 0.5)?.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub grid: Vec<LearnerSpec>,
    pub metric: Metric,
    /// Mean held-out score per grid point; `None` if any fold failed, which
    /// ranks the point as −∞.
    pub mean_scores: Vec<Option<f64>>,
    pub best_index: usize,
    pub best_point: LearnerSpec,
    pub best_score: f64,
    pub warnings: Vec<String>,
}

/// Scores every grid point by k-fold cross-validation and keeps the best
/// mean; ties go to the earlier point. Jobs run in (point, fold) order.
pub fn grid_search(
    grid: &[LearnerSpec],
    x: ArrayView2<f64>,
    y: &[bool],
    plan: &CvPlan,
    metric: Metric,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(LearnerError::EmptyGrid);
    }
    if x.nrows() != y.len() || plan.n() != y.len() {
        return Err(LearnerError::LengthMismatch {
            expected: x.nrows(),
            got: y.len().min(plan.n()),
        });
    }
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..plan.k).map(|f| plan.split(f)).collect();
    let mut warnings = Vec::new();
    let mut mean_scores = Vec::with_capacity(grid.len());
    for (g, spec) in grid.iter().enumerate() {
        let mut total = 0.0;
        let mut failed = false;
        for (f, (train, test)) in folds.iter().enumerate() {
            let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            let outcome = spec
                .fit(x.select(Axis(0), train).view(), &y_train)
                .and_then(|m| m.predict_proba(x.select(Axis(0), test).view()))
                .and_then(|p| {
                    metric
                        .score(p.as_slice().expect("contiguous"), &y_test)
                        .map_err(|e| LearnerError::Metric(e.to_string()))
                });
            match outcome {
                Ok(s) => total += s,
                Err(e) => {
                    warnings.push(format!("grid point {g} ({spec}), fold {f}: {e}"));
                    failed = true;
                }
            }
        }
        mean_scores.push((!failed).then(|| total / plan.k as f64));
    }
    let rank = |s: &Option<f64>| s.unwrap_or(f64::NEG_INFINITY);
    let mut best_index = 0;
    for (g, s) in mean_scores.iter().enumerate() {
        if rank(s) > rank(&mean_scores[best_index]) {
            best_index = g;
        }
    }
    Ok(GridSearchResult {
        best_point: grid[best_index].clone(),
        best_score: rank(&mean_scores[best_index]),
        best_index,
        grid: grid.to_vec(),
        metric,
        mean_scores,
        warnings,
    })
}
