use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    /// Allowed tokens, in display / one-hot order.
    pub categories: Vec<String>,
}

impl CategoricalColumn {
    pub fn new(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            categories: categories.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicColumn {
    pub name: String,
    pub kind: ColumnKind,
}

impl DemographicColumn {
    pub fn numeric(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
        }
    }
}

fn default_id_column() -> String {
    "id".to_string()
}

/// Column layout of a cohort CSV.
///
/// Demographic columns may refer to basic feature columns (age, gender, ...)
/// or to standalone columns that are never used as model inputs. The empty
/// cell is always a missing marker; `missing_markers` adds further sentinels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    #[serde(default = "default_id_column")]
    pub id_column: String,
    pub basic_numeric: Vec<String>,
    pub basic_categorical: Vec<CategoricalColumn>,
    pub advanced_numeric: Vec<String>,
    pub label_column: String,
    pub demographic_columns: Vec<DemographicColumn>,
    pub advanced_available_column: String,
    #[serde(default)]
    pub missing_markers: Vec<String>,
}

pub const ADNI_ADVANCED_WIDTH: usize = 329;

impl FeatureSchema {
    /// The shipped default: nine basic clinical columns and a 329-slot opaque
    /// advanced biomarker block.
    pub fn adni_default() -> Self {
        Self {
            id_column: default_id_column(),
            basic_numeric: ["age", "education", "mmse", "adas11"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            basic_categorical: vec![
                CategoricalColumn::new("gender", &["Male", "Female"]),
                CategoricalColumn::new("race", &["White", "Black", "Asian", "Other"]),
                CategoricalColumn::new("apoe4", &["0", "1", "2"]),
                CategoricalColumn::new("apoe2", &["0", "1"]),
                CategoricalColumn::new("cdr_global", &["0", "0.5", "1", "2"]),
            ],
            advanced_numeric: numbered_columns("adv", ADNI_ADVANCED_WIDTH),
            label_column: "converted".to_string(),
            demographic_columns: vec![
                DemographicColumn::numeric("age"),
                DemographicColumn::numeric("education"),
                DemographicColumn::categorical("gender"),
                DemographicColumn::categorical("race"),
                DemographicColumn::categorical("apoe4"),
                DemographicColumn::categorical("apoe2"),
            ],
            advanced_available_column: "advanced_available".to_string(),
            missing_markers: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialises")
    }

    pub fn basic_width(&self) -> usize {
        self.basic_numeric.len() + self.basic_categorical.len()
    }

    pub fn advanced_width(&self) -> usize {
        self.advanced_numeric.len()
    }

    /// Names of the basic clinical features, numeric first.
    pub fn basic_feature_names(&self) -> Vec<String> {
        self.basic_numeric
            .iter()
            .cloned()
            .chain(self.basic_categorical.iter().map(|c| c.name.clone()))
            .collect()
    }

    pub fn categorical(&self, name: &str) -> Option<&CategoricalColumn> {
        self.basic_categorical.iter().find(|c| c.name == name)
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn is_missing(&self, cell: &str) -> bool {
        let cell = cell.trim();
        cell.is_empty() || self.missing_markers.iter().any(|m| m == cell)
    }

    pub fn validate(&self) -> Result<()> {
        if self.basic_width() == 0 {
            return Err(DataError::InvalidSchema("no basic columns".into()));
        }
        if self.advanced_numeric.is_empty() {
            return Err(DataError::InvalidSchema("no advanced columns".into()));
        }
        let mut seen = HashSet::new();
        let grouped = std::iter::once(&self.id_column)
            .chain(self.basic_numeric.iter())
            .chain(self.basic_categorical.iter().map(|c| &c.name))
            .chain(self.advanced_numeric.iter())
            .chain(std::iter::once(&self.label_column))
            .chain(std::iter::once(&self.advanced_available_column));
        for name in grouped {
            if name.trim().is_empty() {
                return Err(DataError::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DataError::InvalidSchema(format!(
                    "column `{name}` appears in more than one group"
                )));
            }
        }
        for cat in &self.basic_categorical {
            if cat.categories.is_empty() {
                return Err(DataError::InvalidSchema(format!(
                    "categorical column `{}` has no categories",
                    cat.name
                )));
            }
            let distinct: HashSet<_> = cat.categories.iter().collect();
            if distinct.len() != cat.categories.len() {
                return Err(DataError::InvalidSchema(format!(
                    "categorical column `{}` lists a category twice",
                    cat.name
                )));
            }
        }
        let mut demo = HashSet::new();
        for d in &self.demographic_columns {
            if !demo.insert(d.name.as_str()) {
                return Err(DataError::InvalidSchema(format!(
                    "demographic column `{}` listed twice",
                    d.name
                )));
            }
            let clash = d.name == self.id_column
                || d.name == self.label_column
                || d.name == self.advanced_available_column
                || self.advanced_numeric.contains(&d.name);
            if clash {
                return Err(DataError::InvalidSchema(format!(
                    "demographic column `{}` overlaps a non-basic group",
                    d.name
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn numbered_columns(prefix: &str, count: usize) -> Vec<String> {
    let width = count.to_string().len().max(3);
    (1..=count)
        .map(|i| format!("{prefix}_{i:0width$}"))
        .collect()
}
