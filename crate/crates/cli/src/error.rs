use thiserror::Error;
use triage_core::cascade::CascadeError;
use triage_core::data::DataError;
use triage_core::eval::EvalError;
use triage_core::explain::ExplainError;
use triage_core::learners::LearnerError;

/// Errors surfaced by the command line. Each maps to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// `error[kind]: message` on one line.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.kind())
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LearnerError> for CliError {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::Data(d) => d.into(),
            LearnerError::Io(_) | LearnerError::Json(_) | LearnerError::UnsupportedFormat(_) | LearnerError::UnknownModelType(_) => {
                CliError::Data(e.to_string())
            }
            LearnerError::InvalidHyperparameter(_) | LearnerError::EmptyGrid | LearnerError::BadK { .. } => {
                CliError::Config(e.to_string())
            }
            LearnerError::SingleClass => CliError::Numeric(format!(
                "{e}; for triage labels, lower delta or check that the advanced model improves certainty"
            )),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        match e {
            CascadeError::Learner(l) => l.into(),
            CascadeError::Data(d) => d.into(),
            CascadeError::NonPositiveDelta(_) | CascadeError::BadTau(_) | CascadeError::BadRate(_) => {
                CliError::Config(e.to_string())
            }
            CascadeError::AdvancedFeaturesRequired { .. } | CascadeError::EmptyCurve => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::TooFewRequested(_) | EvalError::BadRate(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Learner(l) => l.into(),
            ExplainError::Data(d) => d.into(),
            ExplainError::Io(_) | ExplainError::Csv(_) => CliError::Data(e.to_string()),
            ExplainError::TooFewSamples { .. } | ExplainError::TooManyGroups(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
