//! The three constituent classifiers and model selection.
//!
//! Basic and Advanced models are L2-regularized logistic regressions; the
//! Triage model is an RBF support vector machine whose decision value is
//! Platt-calibrated into an escalation score in (0, 1).

mod cv;
mod grid;
mod linalg;
pub mod logistic;
mod platt;
pub mod svm;

use std::fmt;
use std::path::Path;

use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{DataError, FeatureGroup, FeatureSchema, Patient, Preprocessor};

pub use cv::{make_cv_plan, CvPlan};
pub use grid::{grid_search, GridSearchResult, Metric};
pub use linalg::cholesky_solve;
pub use logistic::{fit_logreg, LogRegModel};
pub use platt::PlattScaling;
pub use svm::{fit_svm_rbf, SvmModel};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid fold count {k} for {n} rows")]
    BadK { k: usize, n: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("scoring failed: {0}")]
    Metric(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error("unknown model type `{0}`")]
    UnknownModelType(String),
}

pub type Result<T, E = LearnerError> = std::result::Result<T, E>;

pub(crate) fn check_binary(y: &[bool]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        Err(LearnerError::SingleClass)
    } else {
        Ok(())
    }
}

pub(crate) fn check_width(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LearnerError::WidthMismatch { expected, got })
    }
}

/// RBF width: a fixed value or `auto`, meaning `1 / feature_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, width: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / width.max(1) as f64,
            Gamma::Value(v) => v,
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Auto => s.serialize_str("auto"),
            Gamma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Value(v) => Ok(Gamma::Value(v)),
            Repr::Name(s) if s == "auto" => Ok(Gamma::Auto),
            Repr::Name(s) => Err(serde::de::Error::custom(format!("unknown gamma `{s}`"))),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Auto => f.write_str("auto"),
            Gamma::Value(v) => write!(f, "{v}"),
        }
    }
}

/// A learner family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Logistic { c: f64 },
    SvmRbf { c: f64, gamma: Gamma },
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Logistic { c } => write!(f, "logistic(C={c})"),
            LearnerSpec::SvmRbf { c, gamma } => write!(f, "svm_rbf(C={c}, gamma={gamma})"),
        }
    }
}

impl LearnerSpec {
    pub fn logistic_grid(cs: &[f64]) -> Vec<Self> {
        cs.iter().map(|&c| LearnerSpec::Logistic { c }).collect()
    }

    pub fn svm_grid(cs: &[f64], gammas: &[Gamma]) -> Vec<Self> {
        cs.iter()
            .flat_map(|&c| gammas.iter().map(move |&gamma| LearnerSpec::SvmRbf { c, gamma }))
            .collect()
    }

    pub fn type_tag(&self) -> &'static str {
        match self {
            LearnerSpec::Logistic { .. } => "logistic",
            LearnerSpec::SvmRbf { .. } => "svm_rbf",
        }
    }

    /// Fits with the default tolerances.
    pub fn fit(&self, x: ArrayView2<f64>, y: &[bool]) -> Result<TrainedModel> {
        match *self {
            LearnerSpec::Logistic { c } => {
                fit_logreg(x, y, c, logistic::DEFAULT_TOL, logistic::DEFAULT_MAX_ITER).map(TrainedModel::Logistic)
            }
            LearnerSpec::SvmRbf { c, gamma } => fit_svm_rbf(
                x,
                y,
                c,
                gamma.resolve(x.ncols()),
                svm::DEFAULT_TOL,
                svm::DEFAULT_MAX_ITER,
            )
            .map(TrainedModel::SvmRbf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrainedModel {
    Logistic(LogRegModel),
    SvmRbf(SvmModel),
}

impl TrainedModel {
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            TrainedModel::Logistic(m) => m.predict_proba(x),
            TrainedModel::SvmRbf(m) => m.predict_proba(x),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.width(),
            TrainedModel::SvmRbf(m) => m.width(),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            TrainedModel::Logistic(m) => m.converged,
            TrainedModel::SvmRbf(m) => m.converged,
        }
    }
}

/// Where a probability vector came from. Triage supervision only accepts
/// out-of-fold vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    OutOfFold { k: usize, seed: u64, stratified: bool },
    InSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    values: Vec<f64>,
    provenance: Provenance,
}

impl ProbabilityVector {
    /// Wraps predictions of a model that saw these rows during training.
    pub fn in_sample(values: Vec<f64>) -> Self {
        Self {
            values,
            provenance: Provenance::InSample,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_out_of_fold(&self) -> bool {
        matches!(self.provenance, Provenance::OutOfFold { .. })
    }
}

/// Predicts every row with the model fitted on the other folds.
pub fn cross_val_predict(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[bool], plan: &CvPlan) -> Result<ProbabilityVector> {
    cross_val_predict_with_extra(spec, x, y, plan, x.slice(ndarray::s![0..0, ..]), &[])
}

/// Like [`cross_val_predict`], but every fold model also trains on the
/// `extra` rows, which are never predicted. Used when the planned rows are a
/// subset of a larger training set.
pub fn cross_val_predict_with_extra(
    spec: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[bool],
    plan: &CvPlan,
    x_extra: ArrayView2<f64>,
    y_extra: &[bool],
) -> Result<ProbabilityVector> {
    if x.nrows() != y.len() || plan.n() != y.len() {
        return Err(LearnerError::LengthMismatch {
            expected: x.nrows(),
            got: y.len().min(plan.n()),
        });
    }
    if x_extra.nrows() != y_extra.len() {
        return Err(LearnerError::LengthMismatch {
            expected: x_extra.nrows(),
            got: y_extra.len(),
        });
    }
    if x_extra.nrows() > 0 && x_extra.ncols() != x.ncols() {
        return Err(LearnerError::WidthMismatch {
            expected: x.ncols(),
            got: x_extra.ncols(),
        });
    }
    let mut values = vec![f64::NAN; y.len()];
    for fold in 0..plan.k {
        let (train, test) = plan.split(fold);
        let mut y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        y_train.extend_from_slice(y_extra);
        let x_fold = x.select(Axis(0), &train);
        let x_train = if x_extra.nrows() > 0 {
            ndarray::concatenate(Axis(0), &[x_fold.view(), x_extra]).expect("widths checked")
        } else {
            x_fold
        };
        let model = spec.fit(x_train.view(), &y_train)?;
        let p = model.predict_proba(x.select(Axis(0), &test).view())?;
        for (&i, &v) in test.iter().zip(p.iter()) {
            values[i] = v;
        }
    }
    Ok(ProbabilityVector {
        values,
        provenance: Provenance::OutOfFold {
            k: plan.k,
            seed: plan.seed,
            stratified: plan.stratified,
        },
    })
}

const FORMAT_VERSION: u32 = 1;

/// A trained model plus the preprocessing it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedClassifier {
    pub spec: LearnerSpec,
    pub preprocessor: Preprocessor,
    pub model: TrainedModel,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(rename = "type")]
    kind: String,
    schema_fingerprint: String,
    preprocessor: Preprocessor,
    hyperparameters: LearnerSpec,
    parameters: serde_json::Value,
}

impl FittedClassifier {
    /// Fits preprocessing and model on the given patients.
    pub fn train(
        spec: &LearnerSpec,
        schema: &FeatureSchema,
        patients: &[&Patient],
        labels: &[bool],
        group: FeatureGroup,
    ) -> Result<Self> {
        let preprocessor = Preprocessor::fit(schema, patients, group)?;
        let x = preprocessor.transform(patients)?;
        let model = spec.fit(x.view(), labels)?;
        Ok(Self {
            spec: spec.clone(),
            preprocessor,
            model,
        })
    }

    pub fn group(&self) -> FeatureGroup {
        self.preprocessor.group()
    }

    /// Probabilities for rows already in this model's feature space.
    pub fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.model.predict_proba(x)
    }

    pub fn predict(&self, patients: &[&Patient]) -> Result<Vec<f64>> {
        let x = self.preprocessor.transform(patients)?;
        Ok(self.model.predict_proba(x.view())?.to_vec())
    }

    pub fn predict_one(&self, patient: &Patient) -> Result<f64> {
        Ok(self.predict(&[patient])?[0])
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            kind: self.spec.type_tag().to_string(),
            schema_fingerprint: self.preprocessor.schema_fingerprint().to_string(),
            preprocessor: self.preprocessor.clone(),
            hyperparameters: self.spec.clone(),
            parameters: serde_json::to_value(&self.model).expect("model serialises"),
        };
        serde_json::to_string_pretty(&file).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(LearnerError::UnsupportedFormat(file.format_version));
        }
        if file.schema_fingerprint != file.preprocessor.schema_fingerprint() {
            return Err(DataError::SchemaMismatch("model and preprocessor fingerprints differ".into()).into());
        }
        let model = match file.kind.as_str() {
            "logistic" => TrainedModel::Logistic(serde_json::from_value(file.parameters)?),
            "svm_rbf" => TrainedModel::SvmRbf(serde_json::from_value(file.parameters)?),
            other => return Err(LearnerError::UnknownModelType(other.to_string())),
        };
        if file.hyperparameters.type_tag() != file.kind {
            return Err(LearnerError::UnknownModelType(file.kind));
        }
        check_width(model.width(), file.preprocessor.width())?;
        Ok(Self {
            spec: file.hyperparameters,
            preprocessor: file.preprocessor,
            model,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized model.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
