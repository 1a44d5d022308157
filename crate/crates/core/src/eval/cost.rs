use serde::{Deserialize, Serialize};

use super::{auroc, EvalError, Result};
use crate::cascade::{escalation_count, top_k_mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub escalation_rate: f64,
    pub n_escalated: usize,
    /// `escalation_rate × 100 × unit_cost`.
    pub expected_cost_per_100: f64,
    pub auroc: f64,
}

pub fn cost_per_100(rate: f64, unit_cost: f64) -> f64 {
    rate * 100.0 * unit_cost
}

/// For each rate, escalates the `round(rate·n)` highest escalation scores and
/// scores the mixed Basic/Advanced probabilities.
pub fn cost_curve(
    g: &[f64],
    p_b: &[f64],
    p_a: &[f64],
    labels: &[bool],
    unit_cost: f64,
    rates: &[f64],
) -> Result<Vec<CostPoint>> {
    for len in [p_b.len(), p_a.len(), labels.len()] {
        if len != g.len() {
            return Err(EvalError::LengthMismatch { expected: g.len(), got: len });
        }
    }
    rates
        .iter()
        .map(|&rate| {
            let k = escalation_count(rate, g.len()).map_err(|_| EvalError::BadRate(rate))?;
            let mask = top_k_mask(g, k);
            let mixed: Vec<f64> = (0..g.len()).map(|i| if mask[i] { p_a[i] } else { p_b[i] }).collect();
            Ok(CostPoint {
                escalation_rate: rate,
                n_escalated: k,
                expected_cost_per_100: cost_per_100(rate, unit_cost),
                auroc: auroc(&mixed, labels)?,
            })
        })
        .collect()
}

/// `steps + 1` evenly spaced rates from 0 to 1.
pub fn rate_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_saving() {
        let g = [0.9, 0.1, 0.5, 0.3];
        let p_b = [0.6, 0.4, 0.3, 0.7];
        let p_a = [0.9, 0.1, 0.2, 0.8];
        let y = [true, false, false, true];
        let pts = cost_curve(&g, &p_b, &p_a, &y, 4000.0, &[0.0, 0.8, 1.0]).unwrap();
        assert_eq!(pts[0].expected_cost_per_100, 0.0);
        assert_eq!(pts[0].auroc, auroc(&p_b, &y).unwrap());
        assert_eq!(pts[1].expected_cost_per_100, 320_000.0);
        assert_eq!(pts[2].expected_cost_per_100, 400_000.0);
        assert_eq!(pts[2].auroc, auroc(&p_a, &y).unwrap());
        assert!(matches!(cost_curve(&g, &p_b, &p_a, &y, 1.0, &[1.2]), Err(EvalError::BadRate(_))));
    }

    #[test]
    fn grid() {
        let r = rate_grid(10);
        assert_eq!(r.len(), 11);
        assert_eq!(r[8], 0.8);
    }
}
