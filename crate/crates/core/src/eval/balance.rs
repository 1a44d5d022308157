use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::stats::{chi_square, welch_t};
use super::{EvalError, Result};
use crate::data::{ColumnKind, DemographicColumn, DemographicValue, FeatureSchema, Patient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    WelchT,
    ChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupSummary {
    Numeric { n: usize, missing: usize, mean: f64, sd: f64 },
    Categorical { counts: Vec<(String, usize)>, missing: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub name: String,
    pub test_kind: TestKind,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    pub statistic: Option<f64>,
    /// `None` when the test is undefined (e.g. zero variance); see `note`.
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTable {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub rows: Vec<BalanceRow>,
}

fn numeric_summary(values: &[f64], missing: usize) -> GroupSummary {
    let n = values.len();
    let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    GroupSummary::Numeric { n, missing, mean, sd }
}

fn numeric_row(name: &str, a: &[&DemographicValue], b: &[&DemographicValue]) -> BalanceRow {
    let collect = |vals: &[&DemographicValue]| {
        let xs: Vec<f64> = vals
            .iter()
            .filter_map(|v| match v {
                DemographicValue::Numeric(x) => Some(*x),
                _ => None,
            })
            .collect();
        let missing = vals.len() - xs.len();
        (xs, missing)
    };
    let (xa, ma) = collect(a);
    let (xb, mb) = collect(b);
    let test = welch_t(&xa, &xb);
    BalanceRow {
        name: name.to_string(),
        test_kind: TestKind::WelchT,
        group_a: numeric_summary(&xa, ma),
        group_b: numeric_summary(&xb, mb),
        statistic: test.as_ref().ok().map(|t| t.statistic),
        p_value: test.as_ref().ok().map(|t| t.p_value),
        note: test.err().map(|e| e.to_string()),
    }
}

fn categorical_row(name: &str, a: &[&DemographicValue], b: &[&DemographicValue]) -> BalanceRow {
    // Categories in first-seen order across both groups.
    let mut cats: Vec<String> = Vec::new();
    for v in a.iter().chain(b) {
        if let DemographicValue::Category(c) = v {
            if !cats.contains(c) {
                cats.push(c.clone());
            }
        }
    }
    let count = |vals: &[&DemographicValue]| {
        let mut counts = vec![0usize; cats.len()];
        let mut missing = 0;
        for v in vals {
            match v {
                DemographicValue::Category(c) => counts[cats.iter().position(|x| x == c).expect("seen")] += 1,
                _ => missing += 1,
            }
        }
        (counts, missing)
    };
    let (ca, ma) = count(a);
    let (cb, mb) = count(b);
    let table = Array2::from_shape_fn((2, cats.len()), |(i, j)| if i == 0 { ca[j] } else { cb[j] } as f64);
    let test = chi_square(table.view());
    let summary = |counts: Vec<usize>, missing| GroupSummary::Categorical {
        counts: cats.iter().cloned().zip(counts).collect(),
        missing,
    };
    BalanceRow {
        name: name.to_string(),
        test_kind: TestKind::ChiSquare,
        group_a: summary(ca, ma),
        group_b: summary(cb, mb),
        statistic: test.as_ref().ok().map(|t| t.statistic),
        p_value: test.as_ref().ok().map(|t| t.p_value),
        note: test.err().map(|e| e.to_string()),
    }
}

/// Compares each characteristic between rows with `in_a` set and the rest.
/// Numeric characteristics use Welch's t-test, categorical ones Pearson's
/// chi-square; missing values are excluded and counted.
pub fn balance_report(
    schema: &FeatureSchema,
    patients: &[&Patient],
    in_a: &[bool],
    characteristics: &[DemographicColumn],
    names: (&str, &str),
) -> Result<BalanceTable> {
    if patients.len() != in_a.len() {
        return Err(EvalError::LengthMismatch {
            expected: patients.len(),
            got: in_a.len(),
        });
    }
    let n_a = in_a.iter().filter(|&&x| x).count();
    let n_b = in_a.len() - n_a;
    if n_a == 0 {
        return Err(EvalError::EmptyGroup(names.0.to_string()));
    }
    if n_b == 0 {
        return Err(EvalError::EmptyGroup(names.1.to_string()));
    }
    let rows = characteristics
        .iter()
        .map(|ch| {
            let col = schema
                .demographic_columns
                .iter()
                .position(|d| d.name == ch.name)
                .ok_or_else(|| EvalError::Metric(format!("unknown characteristic `{}`", ch.name)))?;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (p, &is_a) in patients.iter().zip(in_a) {
                if is_a { &mut a } else { &mut b }.push(&p.demographics[col]);
            }
            Ok(match ch.kind {
                ColumnKind::Numeric => numeric_row(&ch.name, &a, &b),
                ColumnKind::Categorical => categorical_row(&ch.name, &a, &b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BalanceTable {
        group_a: names.0.to_string(),
        group_b: names.1.to_string(),
        n_a,
        n_b,
        rows,
    })
}
