use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::special::{chi_square_sf, student_t_two_sided};
use super::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Two-sided Welch's t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::DegenerateSample);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if !(va > 0.0 && vb > 0.0) {
        return Err(EvalError::DegenerateSample);
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(TestOutcome {
        statistic: t,
        df,
        p_value: student_t_two_sided(t, df).clamp(0.0, 1.0),
    })
}

/// Pearson chi-square test of independence on an r×k table of counts.
pub fn chi_square(table: ArrayView2<f64>) -> Result<TestOutcome> {
    let (r, k) = table.dim();
    let total = table.sum();
    let rows: Vec<f64> = table.rows().into_iter().map(|row| row.sum()).collect();
    let cols: Vec<f64> = table.columns().into_iter().map(|col| col.sum()).collect();
    let mut stat = 0.0;
    for i in 0..r {
        for j in 0..k {
            let expected = rows[i] * cols[j] / total;
            if expected.is_nan() || expected <= 0.0 {
                return Err(EvalError::ZeroExpected);
            }
            let d = table[[i, j]] - expected;
            stat += d * d / expected;
        }
    }
    let df = ((r.max(1) - 1) * (k.max(1) - 1)) as f64;
    let p_value = if df == 0.0 { 1.0 } else { chi_square_sf(stat, df).clamp(0.0, 1.0) };
    Ok(TestOutcome {
        statistic: stat,
        df,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.5];
        let t = welch_t(&a, &a).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(welch_t(&[1.0], &[1.0, 2.0]).unwrap_err(), EvalError::DegenerateSample);
        assert_eq!(welch_t(&[1.0, 1.0], &[1.0, 2.0]).unwrap_err(), EvalError::DegenerateSample);
    }

    #[test]
    fn diagonal_table() {
        let t = chi_square(array![[10.0, 0.0], [0.0, 10.0]].view()).unwrap();
        assert!((t.statistic - 20.0).abs() < 1e-12);
        assert_eq!(t.df, 1.0);
        assert!((t.p_value - 7.744_216_431_044_1e-6).abs() < 1e-12);
    }

    #[test]
    fn proportional_table() {
        let t = chi_square(array![[10.0, 20.0, 30.0], [1.0, 2.0, 3.0]].view()).unwrap();
        assert!(t.statistic.abs() < 1e-12);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_column() {
        assert_eq!(
            chi_square(array![[1.0, 0.0], [2.0, 0.0]].view()).unwrap_err(),
            EvalError::ZeroExpected
        );
    }
}
