//! Adaptive two-stage ("triage") prediction.
//!
//! A *Basic* classifier runs on cheap features for every patient. A *Triage*
//! classifier, also on cheap features, produces an escalation score; patients
//! whose score exceeds a threshold are routed to an *Advanced* classifier that
//! additionally consumes costly features.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`data`]: cohort schema, CSV loading, partitioning, preprocessing and a
//!   synthetic cohort generator.
//! - [`learners`]: logistic regression, RBF-SVM with Platt calibration,
//!   cross-validation and grid search.
//! - [`cascade`]: certainty, escalation labels, routing, risk-coverage
//!   threshold selection and baseline escalation policies.
//! - [`eval`]: metrics, bootstrap intervals, paired tests, cost curves and
//!   demographic balance tests.
//! - [`explain`]: group Shapley attributions of the escalation score.

pub mod cascade;
pub mod data;
pub mod eval;
pub mod explain;
pub mod learners;
pub mod seeding;

pub use cascade::{CascadePolicy, EscalationDecision, Route, TriageLabels};
pub use data::{CohortSplit, CohortTable, FeatureSchema, Patient, PatientRecord, Preprocessor};
pub use learners::{FittedClassifier, LearnerSpec};
