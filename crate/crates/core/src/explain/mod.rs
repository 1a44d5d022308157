//! Shapley attributions of the Triage escalation score over clinical
//! features.

mod shapley;

use std::io::Write;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::CascadePolicy;
use crate::data::{DataError, Patient};
use crate::learners::{FittedClassifier, LearnerError};

pub use shapley::{exact_shapley, sampled_shapley, Attribution, BackgroundSet, GroupMap, MAX_EXACT_GROUPS};

/// Background rows kept by default.
pub const DEFAULT_BACKGROUND_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("exact Shapley values support at most 16 groups, got {0}")]
    TooManyGroups(usize),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("need at least {minimum} samples, got {requested}")]
    TooFewSamples { requested: usize, minimum: usize },
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid feature groups: {0}")]
    BadGroups(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ExplainError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapleyMethod {
    #[default]
    Exact,
    Sampled { n_samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub feature: String,
    pub raw_value: String,
    /// Standardized model input for numeric features.
    pub standardized_value: Option<f64>,
    pub phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub id: String,
    pub score: f64,
    pub tau: f64,
    pub escalate: bool,
    pub base_value: f64,
    pub method: ShapleyMethod,
    /// Sorted by decreasing `|phi|`.
    pub entries: Vec<ExplanationEntry>,
}

impl ExplanationRecord {
    pub fn top(&self, k: usize) -> &[ExplanationEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// Clinical feature groups of a classifier's input space.
pub fn clinical_groups(model: &FittedClassifier) -> GroupMap {
    let groups = model.preprocessor.feature_groups();
    GroupMap {
        names: groups.iter().map(|g| g.name.clone()).collect(),
        columns: groups.into_iter().map(|g| g.columns).collect(),
    }
}

/// Background set for a classifier: its preprocessed view of `patients`,
/// capped at `cap` rows by a seeded draw.
pub fn background_for(model: &FittedClassifier, patients: &[&Patient], cap: usize, seed: u64) -> Result<BackgroundSet> {
    let x = model.preprocessor.transform(patients)?;
    BackgroundSet::subsample(x.view(), cap, seed)
}

/// Score function over preprocessed rows. Widths are checked by the
/// Shapley routines before any call.
pub fn score_fn(model: &FittedClassifier) -> impl Fn(ArrayView2<f64>) -> Array1<f64> + '_ {
    move |x| model.predict_matrix(x).expect("input width checked against the background set")
}

/// Attributes the patient's escalation score to its clinical features.
pub fn explain_decision(
    policy: &CascadePolicy,
    patient: &Patient,
    background: &BackgroundSet,
    method: ShapleyMethod,
) -> Result<ExplanationRecord> {
    let triage = &policy.triage;
    let x = triage.preprocessor.transform(&[patient])?;
    let groups = clinical_groups(triage);
    let f = score_fn(triage);
    let attribution = match method {
        ShapleyMethod::Exact => exact_shapley(f, background, x.row(0), &groups)?,
        ShapleyMethod::Sampled { n_samples, seed } => sampled_shapley(f, background, x.row(0), &groups, n_samples, seed)?,
    };
    let mut entries: Vec<ExplanationEntry> = attribution
        .group_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let phi = attribution.phis[j];
            ExplanationEntry {
                feature: name.clone(),
                raw_value: triage.preprocessor.raw_value(patient, name).unwrap_or_default(),
                standardized_value: triage.preprocessor.standardized_value(patient, name),
                phi,
                standard_error: attribution.standard_errors.as_ref().map(|se| se[j]),
                direction: if phi > 0.0 {
                    "pushes toward escalation"
                } else if phi < 0.0 {
                    "pushes against escalation"
                } else {
                    "neutral"
                }
                .to_string(),
            }
        })
        .collect();
    entries.sort_by(|a, b| b.phi.abs().total_cmp(&a.phi.abs()));
    Ok(ExplanationRecord {
        id: patient.id.clone(),
        score: attribution.score,
        tau: policy.tau,
        escalate: policy.escalates(attribution.score),
        base_value: attribution.base_value,
        method,
        entries,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: &'a str,
    feature: &'a str,
    raw_value: &'a str,
    phi: f64,
}

/// Writes `id, feature, raw_value, phi` rows for force-plot rendering.
pub fn write_explanations_csv<W: Write>(records: &[ExplanationRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        for e in &r.entries {
            w.serialize(CsvRow {
                id: &r.id,
                feature: &e.feature,
                raw_value: &e.raw_value,
                phi: e.phi,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
