//! Metrics, bootstrap intervals, paired tests, cost curves and demographic
//! balance tables.

mod balance;
mod bootstrap;
mod cost;
mod metrics;
pub mod special;
mod stats;

pub use balance::{balance_report, BalanceRow, BalanceTable, GroupSummary, TestKind};
pub use bootstrap::{
    bootstrap_ci, paired_delta_auroc, quantile_sorted, BootstrapCi, PairedDeltaTest, DEFAULT_REPLICATES, MIN_REPLICATES,
};
pub use cost::{cost_curve, cost_per_100, rate_grid, CostPoint};

pub use metrics::{
    auprc, auroc, metric_set, pr_curve, roc_curve, thresholded_metrics, ConfusionCounts, MetricSet, PrPoint,
    RocPoint, ThresholdedMetrics,
};
pub use stats::{chi_square, welch_t, TestOutcome};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("both classes are required")]
    SingleClass,
    #[error("no positive labels")]
    NoPositives,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bootstrap needs at least 100 replicates, got {0}")]
    TooFewRequested(usize),
    #[error("only {kept} of {requested} bootstrap replicates were usable")]
    TooFewReplicates { kept: usize, requested: usize },
    #[error("sample needs n >= 2 and non-zero variance")]
    DegenerateSample,
    #[error("contingency table has an expected count of zero")]
    ZeroExpected,
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("rate {0} outside [0, 1]")]
    BadRate(f64),
    #[error("{0}")]
    Metric(String),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
