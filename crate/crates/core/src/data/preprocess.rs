use serde::{Deserialize, Serialize};

use super::cohort::{CohortTable, Patient};
use super::schema::FeatureSchema;
use super::{DataError, FeatureMatrix, Result};

/// Which column groups a preprocessor consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    /// Basic numeric and categorical columns.
    Basic,
    /// Basic plus the advanced numeric block.
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NumericState {
    name: String,
    mean: f64,
    std: f64,
    median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CategoricalState {
    name: String,
    /// Tokens observed while fitting, in schema order.
    categories: Vec<String>,
    mode: String,
}

/// Output columns that belong to one clinical feature. Categorical features
/// own their whole one-hot block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Imputation, standardization and one-hot state.
///
/// Output layout is basic numeric, then advanced numeric (for
/// [`FeatureGroup::Combined`]), then one one-hot block per basic categorical
/// column. Standard deviations use the population (1/n) form and zero-spread
/// columns map to 0. Missing cells take the fitted median (numeric) or mode
/// (categorical); a token not seen at fit time gives an all-zero block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    group: FeatureGroup,
    schema_fingerprint: String,
    n_basic_numeric: usize,
    numeric: Vec<NumericState>,
    categorical: Vec<CategoricalState>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn fit_numeric(name: &str, cells: impl Iterator<Item = Option<f64>>) -> NumericState {
    let mut values: Vec<f64> = cells.flatten().collect();
    if values.is_empty() {
        return NumericState {
            name: name.to_string(),
            mean: 0.0,
            std: 0.0,
            median: 0.0,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    values.sort_by(f64::total_cmp);
    NumericState {
        name: name.to_string(),
        mean,
        std: var.sqrt(),
        median: median(&values),
    }
}

impl Preprocessor {
    /// Fits on the given patients. Advanced cells are only read for
    /// [`FeatureGroup::Combined`], which requires every patient to have them.
    pub fn fit(schema: &FeatureSchema, patients: &[&Patient], group: FeatureGroup) -> Result<Self> {
        if patients.len() < 2 {
            return Err(DataError::EmptyFit(patients.len()));
        }
        check_rows(schema, patients, group)?;

        let mut numeric: Vec<NumericState> = schema
            .basic_numeric
            .iter()
            .enumerate()
            .map(|(j, name)| fit_numeric(name, patients.iter().map(|p| Some(p.basic_numeric[j]))))
            .collect();
        if group == FeatureGroup::Combined {
            numeric.extend(schema.advanced_numeric.iter().enumerate().map(|(j, name)| {
                fit_numeric(
                    name,
                    patients
                        .iter()
                        .map(|p| p.advanced.as_ref().expect("checked")[j]),
                )
            }));
        }

        let categorical = schema
            .basic_categorical
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let counts: Vec<usize> = col
                    .categories
                    .iter()
                    .map(|c| patients.iter().filter(|p| &p.basic_categorical[j] == c).count())
                    .collect();
                let categories = col
                    .categories
                    .iter()
                    .zip(&counts)
                    .filter(|(_, &n)| n > 0)
                    .map(|(c, _)| c.clone())
                    .collect();
                // First category in schema order wins ties.
                let mut best = 0;
                for (k, &n) in counts.iter().enumerate() {
                    if n > counts[best] {
                        best = k;
                    }
                }
                CategoricalState {
                    name: col.name.clone(),
                    categories,
                    mode: col.categories[best].clone(),
                }
            })
            .collect();

        Ok(Self {
            group,
            schema_fingerprint: schema.fingerprint(),
            n_basic_numeric: schema.basic_numeric.len(),
            numeric,
            categorical,
        })
    }

    /// Fits on rows `indices` of `cohort`.
    pub fn fit_rows(cohort: &CohortTable, indices: &[usize], group: FeatureGroup) -> Result<Self> {
        Self::fit(cohort.schema(), &cohort.patients_at(indices), group)
    }

    pub fn group(&self) -> FeatureGroup {
        self.group
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if schema.fingerprint() == self.schema_fingerprint {
            Ok(())
        } else {
            Err(DataError::SchemaMismatch(
                "preprocessor was fitted under a different schema".into(),
            ))
        }
    }

    pub fn width(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(|c| c.categories.len()).sum::<usize>()
    }

    pub fn means(&self) -> Vec<f64> {
        self.numeric.iter().map(|c| c.mean).collect()
    }

    pub fn stds(&self) -> Vec<f64> {
        self.numeric.iter().map(|c| c.std).collect()
    }

    /// Output column names; one-hot columns are `name=token`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.numeric.iter().map(|c| c.name.clone()).collect();
        for c in &self.categorical {
            names.extend(c.categories.iter().map(|t| format!("{}={t}", c.name)));
        }
        names
    }

    /// Output columns grouped by clinical feature, in schema order (basic
    /// numeric, basic categorical, then advanced).
    pub fn feature_groups(&self) -> Vec<ClinicalGroup> {
        let single = |i: usize| ClinicalGroup {
            name: self.numeric[i].name.clone(),
            columns: vec![i],
        };
        let mut groups: Vec<ClinicalGroup> = (0..self.n_basic_numeric).map(single).collect();
        let mut offset = self.numeric.len();
        for c in &self.categorical {
            groups.push(ClinicalGroup {
                name: c.name.clone(),
                columns: (offset..offset + c.categories.len()).collect(),
            });
            offset += c.categories.len();
        }
        groups.extend((self.n_basic_numeric..self.numeric.len()).map(single));
        groups
    }

    /// Standardized value of a numeric clinical feature for one patient, after
    /// imputation. `None` for categorical features.
    pub fn standardized_value(&self, patient: &Patient, feature: &str) -> Option<f64> {
        let j = self.numeric.iter().position(|c| c.name == feature)?;
        let raw = if j < self.n_basic_numeric {
            Some(patient.basic_numeric[j])
        } else {
            patient.advanced.as_ref()?[j - self.n_basic_numeric]
        };
        Some(self.scale(j, raw))
    }

    /// Unprocessed value of a clinical feature for display; missing cells
    /// read `missing`. `None` for an unknown feature.
    pub fn raw_value(&self, patient: &Patient, feature: &str) -> Option<String> {
        if let Some(j) = self.numeric.iter().position(|c| c.name == feature) {
            let raw = if j < self.n_basic_numeric {
                patient.basic_numeric.get(j).copied()
            } else {
                patient.advanced.as_ref().and_then(|a| a.get(j - self.n_basic_numeric).copied().flatten())
            };
            return Some(raw.map_or_else(|| "missing".to_string(), |v| v.to_string()));
        }
        let j = self.categorical.iter().position(|c| c.name == feature)?;
        patient.basic_categorical.get(j).cloned()
    }

    fn scale(&self, j: usize, raw: Option<f64>) -> f64 {
        let c = &self.numeric[j];
        let v = raw.unwrap_or(c.median);
        if c.std > 0.0 {
            (v - c.mean) / c.std
        } else {
            0.0
        }
    }

    fn check_patient(&self, p: &Patient) -> Result<()> {
        let n_adv = self.numeric.len() - self.n_basic_numeric;
        if p.basic_numeric.len() != self.n_basic_numeric || p.basic_categorical.len() != self.categorical.len() {
            return Err(DataError::SchemaMismatch(format!(
                "patient `{}` has a different basic layout than the fitted schema",
                p.id
            )));
        }
        if self.group == FeatureGroup::Combined {
            match &p.advanced {
                None => return Err(DataError::AdvancedUnavailable(p.id.clone())),
                Some(a) if a.len() != n_adv => {
                    return Err(DataError::SchemaMismatch(format!(
                        "patient `{}` has {} advanced cells, expected {n_adv}",
                        p.id,
                        a.len()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Writes one transformed row into `out` (length [`Self::width`]).
    pub fn transform_into(&self, p: &Patient, out: &mut [f64]) -> Result<()> {
        self.check_patient(p)?;
        debug_assert_eq!(out.len(), self.width());
        for (j, &v) in p.basic_numeric.iter().enumerate() {
            out[j] = self.scale(j, Some(v));
        }
        if let (FeatureGroup::Combined, Some(adv)) = (self.group, &p.advanced) {
            for (k, &cell) in adv.iter().enumerate() {
                let j = self.n_basic_numeric + k;
                out[j] = self.scale(j, cell);
            }
        }
        let mut offset = self.numeric.len();
        for (c, token) in self.categorical.iter().zip(&p.basic_categorical) {
            let block = &mut out[offset..offset + c.categories.len()];
            block.fill(0.0);
            if let Some(k) = c.categories.iter().position(|t| t == token) {
                block[k] = 1.0;
            }
            offset += c.categories.len();
        }
        Ok(())
    }

    pub fn transform(&self, patients: &[&Patient]) -> Result<FeatureMatrix> {
        let mut x = FeatureMatrix::zeros((patients.len(), self.width()));
        for (p, mut row) in patients.iter().zip(x.rows_mut()) {
            self.transform_into(p, row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(x)
    }

    pub fn transform_rows(&self, cohort: &CohortTable, indices: &[usize]) -> Result<FeatureMatrix> {
        self.transform(&cohort.patients_at(indices))
    }
}

fn check_rows(schema: &FeatureSchema, patients: &[&Patient], group: FeatureGroup) -> Result<()> {
    for p in patients {
        if p.basic_numeric.len() != schema.basic_numeric.len()
            || p.basic_categorical.len() != schema.basic_categorical.len()
        {
            return Err(DataError::SchemaMismatch(format!(
                "patient `{}` does not match the schema",
                p.id
            )));
        }
        if group == FeatureGroup::Combined {
            match &p.advanced {
                None => return Err(DataError::AdvancedUnavailable(p.id.clone())),
                Some(a) if a.len() != schema.advanced_width() => {
                    return Err(DataError::SchemaMismatch(format!(
                        "patient `{}` has the wrong advanced width",
                        p.id
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(())
}
