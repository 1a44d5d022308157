use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{ColumnKind, FeatureSchema};
use super::{DataError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DemographicValue {
    Numeric(f64),
    Category(String),
    Missing,
}

/// Features and demographics of one patient. Labels live in
/// [`PatientRecord`] so unlabeled inputs share the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Patient {
    pub id: String,
    /// One value per `schema.basic_numeric`, always present.
    pub basic_numeric: Vec<f64>,
    /// One token per `schema.basic_categorical`, always present.
    pub basic_categorical: Vec<String>,
    /// `Some` iff the advanced-availability indicator is 1; cells may be
    /// individually missing.
    pub advanced: Option<Vec<Option<f64>>>,
    /// One value per `schema.demographic_columns`.
    pub demographics: Vec<DemographicValue>,
}

impl Patient {
    pub fn has_advanced(&self) -> bool {
        self.advanced.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient: Patient,
    /// `true` means conversion within the horizon.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    schema: FeatureSchema,
    rows: Vec<PatientRecord>,
}

impl CohortTable {
    /// Builds a table, checking row widths and id uniqueness.
    pub fn new(schema: FeatureSchema, rows: Vec<PatientRecord>) -> Result<Self> {
        schema.validate()?;
        let mut ids = HashSet::with_capacity(rows.len());
        for r in &rows {
            let p = &r.patient;
            if p.basic_numeric.len() != schema.basic_numeric.len()
                || p.basic_categorical.len() != schema.basic_categorical.len()
                || p.demographics.len() != schema.demographic_columns.len()
            {
                return Err(DataError::SchemaMismatch(format!(
                    "patient `{}` does not match the schema widths",
                    p.id
                )));
            }
            if let Some(adv) = &p.advanced {
                if adv.len() != schema.advanced_numeric.len() {
                    return Err(DataError::SchemaMismatch(format!(
                        "patient `{}` has {} advanced cells, schema has {}",
                        p.id,
                        adv.len(),
                        schema.advanced_numeric.len()
                    )));
                }
            }
            if !ids.insert(p.id.as_str()) {
                return Err(DataError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[PatientRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn patients_at(&self, indices: &[usize]) -> Vec<&Patient> {
        indices.iter().map(|&i| &self.rows[i].patient).collect()
    }

    pub fn labels_at(&self, indices: &[usize]) -> Vec<bool> {
        indices.iter().map(|&i| self.rows[i].label).collect()
    }

    pub fn advanced_available_indices(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].patient.has_advanced())
            .collect()
    }

    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.patient.id.as_str(), i))
            .collect()
    }
}

/// Resolved column positions for one CSV header.
struct Layout {
    id: usize,
    basic_numeric: Vec<usize>,
    basic_categorical: Vec<usize>,
    advanced: Vec<usize>,
    label: Option<usize>,
    indicator: usize,
    demographics: Vec<usize>,
}

impl Layout {
    fn resolve(schema: &FeatureSchema, header: &csv::StringRecord, need_label: bool) -> Result<Self> {
        let map: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let find = |name: &str| {
            map.get(name)
                .copied()
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        let label = if need_label {
            Some(find(&schema.label_column)?)
        } else {
            map.get(schema.label_column.as_str()).copied()
        };
        Ok(Self {
            id: find(&schema.id_column)?,
            basic_numeric: schema.basic_numeric.iter().map(|c| find(c)).collect::<Result<_>>()?,
            basic_categorical: schema
                .basic_categorical
                .iter()
                .map(|c| find(&c.name))
                .collect::<Result<_>>()?,
            advanced: schema.advanced_numeric.iter().map(|c| find(c)).collect::<Result<_>>()?,
            label,
            indicator: find(&schema.advanced_available_column)?,
            demographics: schema
                .demographic_columns
                .iter()
                .map(|c| find(&c.name))
                .collect::<Result<_>>()?,
        })
    }
}

fn parse_number(schema: &FeatureSchema, row: usize, column: &str, cell: &str) -> Result<Option<f64>> {
    if schema.is_missing(cell) {
        return Ok(None);
    }
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| DataError::InvalidNumber {
            row,
            column: column.to_string(),
            token: cell.to_string(),
        })
}

fn parse_binary(cell: &str) -> Option<bool> {
    match cell.trim().parse::<f64>() {
        Ok(0.0) => Some(false),
        Ok(1.0) => Some(true),
        _ => None,
    }
}

fn parse_patient(schema: &FeatureSchema, layout: &Layout, row: usize, rec: &csv::StringRecord) -> Result<Patient> {
    let cell = |i: usize| rec.get(i).unwrap_or("");
    let id = cell(layout.id).trim().to_string();
    if id.is_empty() {
        return Err(DataError::MissingBasicValue {
            row,
            column: schema.id_column.clone(),
        });
    }

    let mut basic_numeric = Vec::with_capacity(layout.basic_numeric.len());
    for (name, &i) in schema.basic_numeric.iter().zip(&layout.basic_numeric) {
        match parse_number(schema, row, name, cell(i))? {
            Some(v) => basic_numeric.push(v),
            None => {
                return Err(DataError::MissingBasicValue {
                    row,
                    column: name.clone(),
                })
            }
        }
    }

    let mut basic_categorical = Vec::with_capacity(layout.basic_categorical.len());
    for (col, &i) in schema.basic_categorical.iter().zip(&layout.basic_categorical) {
        let token = cell(i).trim();
        if schema.is_missing(token) {
            return Err(DataError::MissingBasicValue {
                row,
                column: col.name.clone(),
            });
        }
        if !col.categories.iter().any(|c| c == token) {
            return Err(DataError::UnknownCategory {
                row,
                column: col.name.clone(),
                token: token.to_string(),
            });
        }
        basic_categorical.push(token.to_string());
    }

    let indicator = cell(layout.indicator);
    let available = parse_binary(indicator).ok_or_else(|| DataError::InvalidIndicator {
        row,
        token: indicator.to_string(),
    })?;
    let advanced = if available {
        let mut values = Vec::with_capacity(layout.advanced.len());
        for (name, &i) in schema.advanced_numeric.iter().zip(&layout.advanced) {
            values.push(parse_number(schema, row, name, cell(i))?);
        }
        Some(values)
    } else {
        None
    };

    let mut demographics = Vec::with_capacity(layout.demographics.len());
    for (col, &i) in schema.demographic_columns.iter().zip(&layout.demographics) {
        let raw = cell(i);
        let value = if schema.is_missing(raw) {
            DemographicValue::Missing
        } else {
            match col.kind {
                ColumnKind::Numeric => match parse_number(schema, row, &col.name, raw)? {
                    Some(v) => DemographicValue::Numeric(v),
                    None => DemographicValue::Missing,
                },
                ColumnKind::Categorical => DemographicValue::Category(raw.trim().to_string()),
            }
        };
        demographics.push(value);
    }

    Ok(Patient {
        id,
        basic_numeric,
        basic_categorical,
        advanced,
        demographics,
    })
}

/// Reads a labeled cohort. Rows are numbered from 1, header excluded.
pub fn read_cohort<R: Read>(reader: R, schema: &FeatureSchema) -> Result<CohortTable> {
    schema.validate()?;
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = csv.headers()?.clone();
    let layout = Layout::resolve(schema, &header, true)?;
    let label_col = layout.label.expect("label required");
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let patient = parse_patient(schema, &layout, row, &rec)?;
        let label = parse_binary(rec.get(label_col).unwrap_or("")).ok_or(DataError::NonBinaryLabel(row))?;
        rows.push(PatientRecord { patient, label });
    }
    CohortTable::new(schema.clone(), rows)
}

pub fn load_cohort(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<CohortTable> {
    read_cohort(std::fs::File::open(path)?, schema)
}

/// Lenient reader for inference inputs: the label column is optional and
/// row-level problems are reported per row instead of aborting.
pub fn load_patients<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Vec<Result<Patient>>> {
    schema.validate()?;
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = csv.headers()?.clone();
    let layout = Layout::resolve(schema, &header, false)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let row = i + 1;
        let parsed = rec
            .map_err(DataError::from)
            .and_then(|rec| parse_patient(schema, &layout, row, &rec))
            .and_then(|p| {
                if seen.insert(p.id.clone()) {
                    Ok(p)
                } else {
                    Err(DataError::DuplicateId(p.id))
                }
            });
        out.push(parsed);
    }
    Ok(out)
}

fn format_number(v: f64) -> String {
    // Display for f64 is the shortest representation that round-trips.
    format!("{v}")
}

/// Writes a cohort as CSV: id, basic, advanced, label, availability, then
/// any demographic columns that are not basic features.
pub fn write_cohort<W: Write>(cohort: &CohortTable, writer: W) -> Result<()> {
    let schema = cohort.schema();
    let basic: HashSet<&str> = schema
        .basic_numeric
        .iter()
        .map(String::as_str)
        .chain(schema.basic_categorical.iter().map(|c| c.name.as_str()))
        .collect();
    let standalone: Vec<usize> = schema
        .demographic_columns
        .iter()
        .enumerate()
        .filter(|(_, d)| !basic.contains(d.name.as_str()))
        .map(|(i, _)| i)
        .collect();

    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec![schema.id_column.as_str()];
    header.extend(schema.basic_numeric.iter().map(String::as_str));
    header.extend(schema.basic_categorical.iter().map(|c| c.name.as_str()));
    header.extend(schema.advanced_numeric.iter().map(String::as_str));
    header.push(&schema.label_column);
    header.push(&schema.advanced_available_column);
    header.extend(standalone.iter().map(|&i| schema.demographic_columns[i].name.as_str()));
    w.write_record(&header)?;

    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for r in cohort.rows() {
        let p = &r.patient;
        fields.clear();
        fields.push(p.id.clone());
        fields.extend(p.basic_numeric.iter().map(|&v| format_number(v)));
        fields.extend(p.basic_categorical.iter().cloned());
        match &p.advanced {
            Some(adv) => fields.extend(adv.iter().map(|c| c.map(format_number).unwrap_or_default())),
            None => fields.extend(std::iter::repeat_n(String::new(), schema.advanced_width())),
        }
        fields.push(if r.label { "1" } else { "0" }.to_string());
        fields.push(if p.has_advanced() { "1" } else { "0" }.to_string());
        for &i in &standalone {
            fields.push(match &p.demographics[i] {
                DemographicValue::Numeric(v) => format_number(*v),
                DemographicValue::Category(c) => c.clone(),
                DemographicValue::Missing => String::new(),
            });
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
