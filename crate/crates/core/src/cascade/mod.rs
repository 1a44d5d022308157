//! Certainty, escalation supervision, routing and threshold selection.

mod baseline;
mod curve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Patient};
use crate::learners::{FittedClassifier, LearnerError, ProbabilityVector, Provenance};

pub use baseline::{baseline_policy, escalation_count, top_k_mask, BaselineKind};
pub use curve::{
    evaluate_threshold, risk_coverage_curve, select_threshold, RiskCoveragePoint, ThresholdSelection,
    ThresholdStrategy,
};

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("certainty margin must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("{0} probabilities are not out-of-fold predictions; triage labels would leak training fit")]
    NotOutOfFold(&'static str),
    #[error("basic and advanced out-of-fold predictions come from different fold plans")]
    ProvenanceMismatch,
    #[error("patient `{id}` needs the advanced test (score {score:.4} > tau {tau})")]
    AdvancedFeaturesRequired { id: String, score: f64, tau: f64, basic_probability: f64 },
    #[error("risk-coverage curve is empty")]
    EmptyCurve,
    #[error("rate {0} outside [0, 1]")]
    BadRate(f64),
    #[error("threshold {0} outside [0, 1]")]
    BadTau(f64),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = CascadeError> = std::result::Result<T, E>;

pub const DEFAULT_DELTA: f64 = 0.2;

/// Distance of a probability from maximal ambiguity, `|p − 0.5|`.
pub fn certainty(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok((p - 0.5).abs())
    } else {
        Err(CascadeError::OutOfRange(p))
    }
}

/// Escalation supervision `z_i = 1[c(p_a,i) − c(p_b,i) > δ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageLabels {
    pub z: Vec<bool>,
    pub delta: f64,
    /// Provenance of the (basic, advanced) inputs when built via
    /// [`TriageLabels::from_oof`].
    pub source: Option<(Provenance, Provenance)>,
}

/// Labels from raw probability vectors. Callers are responsible for passing
/// out-of-fold predictions; [`TriageLabels::from_oof`] enforces it.
pub fn make_triage_labels(p_b: &[f64], p_a: &[f64], delta: f64) -> Result<TriageLabels> {
    if p_b.len() != p_a.len() {
        return Err(CascadeError::LengthMismatch {
            expected: p_b.len(),
            got: p_a.len(),
        });
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(CascadeError::NonPositiveDelta(delta));
    }
    let z = p_b
        .iter()
        .zip(p_a)
        .map(|(&b, &a)| Ok(certainty(a)? - certainty(b)? > delta))
        .collect::<Result<Vec<bool>>>()?;
    Ok(TriageLabels { z, delta, source: None })
}

impl TriageLabels {
    /// Builds labels after checking both inputs are out-of-fold predictions
    /// from the same fold plan.
    pub fn from_oof(p_b: &ProbabilityVector, p_a: &ProbabilityVector, delta: f64) -> Result<Self> {
        if !p_b.is_out_of_fold() {
            return Err(CascadeError::NotOutOfFold("basic"));
        }
        if !p_a.is_out_of_fold() {
            return Err(CascadeError::NotOutOfFold("advanced"));
        }
        if p_b.provenance() != p_a.provenance() {
            return Err(CascadeError::ProvenanceMismatch);
        }
        let mut labels = make_triage_labels(p_b.values(), p_a.values(), delta)?;
        labels.source = Some((p_b.provenance().clone(), p_a.provenance().clone()));
        Ok(labels)
    }

    pub fn positives(&self) -> usize {
        self.z.iter().filter(|&&z| z).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Basic,
    Advanced,
    /// Escalation demanded but the patient has no advanced features yet.
    AdvancedRequired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationDecision {
    pub id: String,
    pub escalate: bool,
    pub score: f64,
    pub tau: f64,
    pub route: Route,
    pub basic_probability: f64,
    /// Probability of the model the patient was routed to; absent for
    /// [`Route::AdvancedRequired`].
    pub final_probability: Option<f64>,
    pub certainty_before: f64,
    pub certainty_after: Option<f64>,
}

/// Basic, Advanced and Triage models with the escalation threshold τ.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadePolicy {
    pub basic: FittedClassifier,
    pub advanced: FittedClassifier,
    pub triage: FittedClassifier,
    pub tau: f64,
}

impl CascadePolicy {
    pub fn new(basic: FittedClassifier, advanced: FittedClassifier, triage: FittedClassifier, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(CascadeError::BadTau(tau));
        }
        Ok(Self {
            basic,
            advanced,
            triage,
            tau,
        })
    }

    /// Escalation iff `g(x_b) > τ`.
    pub fn escalates(&self, score: f64) -> bool {
        score > self.tau
    }

    /// Routes one patient. Escalated patients without advanced features get
    /// [`Route::AdvancedRequired`] and no final probability.
    pub fn route(&self, patient: &Patient) -> Result<EscalationDecision> {
        let score = self.triage.predict_one(patient)?;
        let p_b = self.basic.predict_one(patient)?;
        let escalate = self.escalates(score);
        let mut decision = EscalationDecision {
            id: patient.id.clone(),
            escalate,
            score,
            tau: self.tau,
            route: Route::Basic,
            basic_probability: p_b,
            final_probability: Some(p_b),
            certainty_before: certainty(p_b)?,
            certainty_after: None,
        };
        if escalate {
            if patient.has_advanced() {
                let p_a = self.advanced.predict_one(patient)?;
                decision.route = Route::Advanced;
                decision.final_probability = Some(p_a);
                decision.certainty_after = Some(certainty(p_a)?);
            } else {
                decision.route = Route::AdvancedRequired;
                decision.final_probability = None;
            }
        }
        Ok(decision)
    }

    /// Like [`Self::route`], but an escalation without advanced features is
    /// the error [`CascadeError::AdvancedFeaturesRequired`].
    pub fn decide(&self, patient: &Patient) -> Result<EscalationDecision> {
        let d = self.route(patient)?;
        if d.route == Route::AdvancedRequired {
            return Err(CascadeError::AdvancedFeaturesRequired {
                id: d.id,
                score: d.score,
                tau: self.tau,
                basic_probability: d.basic_probability,
            });
        }
        Ok(d)
    }

    /// Batch routing for patients that all carry advanced features.
    pub fn decide_all(&self, patients: &[&Patient]) -> Result<Vec<EscalationDecision>> {
        patients.iter().map(|p| self.decide(p)).collect()
    }
}

/// Mixes two probability vectors by an escalation mask.
pub fn combine(escalate: &[bool], p_b: &[f64], p_a: &[f64]) -> Vec<f64> {
    escalate
        .iter()
        .zip(p_b.iter().zip(p_a))
        .map(|(&e, (&b, &a))| if e { a } else { b })
        .collect()
}
