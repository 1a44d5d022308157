use serde::{Deserialize, Serialize};

use super::{CascadeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCoveragePoint {
    pub tau_candidate: f64,
    /// Fraction of rows kept with the Basic model (`g ≤ τ`).
    pub coverage: f64,
    /// Basic error rate among kept rows; 0 when nothing is kept.
    pub risk: f64,
    pub n_kept: usize,
}

fn check_lengths(g: &[f64], p_b: &[f64], labels: &[bool]) -> Result<()> {
    for len in [p_b.len(), labels.len()] {
        if len != g.len() {
            return Err(CascadeError::LengthMismatch { expected: g.len(), got: len });
        }
    }
    Ok(())
}

fn basic_error(p: f64, label: bool) -> bool {
    (p > 0.5) != label
}

/// Coverage and selective risk of keeping rows with `g ≤ τ`.
pub fn evaluate_threshold(g: &[f64], p_b: &[f64], labels: &[bool], tau: f64) -> Result<RiskCoveragePoint> {
    check_lengths(g, p_b, labels)?;
    if g.is_empty() {
        return Err(CascadeError::EmptyCurve);
    }
    let (mut kept, mut errors) = (0usize, 0usize);
    for i in 0..g.len() {
        if g[i] <= tau {
            kept += 1;
            errors += basic_error(p_b[i], labels[i]) as usize;
        }
    }
    Ok(RiskCoveragePoint {
        tau_candidate: tau,
        coverage: kept as f64 / g.len() as f64,
        risk: if kept == 0 { 0.0 } else { errors as f64 / kept as f64 },
        n_kept: kept,
    })
}

/// Risk-coverage trade-off over every distinct kept set.
///
/// Candidates are a sentinel below the lowest score (0, or `min − 1` for
/// non-positive scores), midpoints between consecutive distinct scores, and
/// `max(1, max score)`. Points come out in ascending τ, hence ascending
/// coverage.
pub fn risk_coverage_curve(g: &[f64], p_b: &[f64], labels: &[bool]) -> Result<Vec<RiskCoveragePoint>> {
    check_lengths(g, p_b, labels)?;
    let n = g.len();
    if n == 0 {
        return Err(CascadeError::EmptyCurve);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g[a].total_cmp(&g[b]));

    let lowest = g[order[0]];
    let mut points = vec![RiskCoveragePoint {
        tau_candidate: if lowest > 0.0 { 0.0 } else { lowest - 1.0 },
        coverage: 0.0,
        risk: 0.0,
        n_kept: 0,
    }];
    let (mut kept, mut errors) = (0usize, 0usize);
    let mut pos = 0;
    while pos < n {
        let value = g[order[pos]];
        while pos < n && g[order[pos]] == value {
            kept += 1;
            errors += basic_error(p_b[order[pos]], labels[order[pos]]) as usize;
            pos += 1;
        }
        let tau = if pos < n {
            let next = g[order[pos]];
            let mid = value + 0.5 * (next - value);
            // Adjacent floats: fall back to the block value, which keeps the
            // same rows.
            if mid < next {
                mid
            } else {
                value
            }
        } else {
            value.max(1.0)
        };
        points.push(RiskCoveragePoint {
            tau_candidate: tau,
            coverage: kept as f64 / n as f64,
            risk: errors as f64 / kept as f64,
            n_kept: kept,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdStrategy {
    /// Largest coverage whose selective risk is at most `r_max`.
    MaxCoverageUnderRisk { r_max: f64 },
    /// Point farthest from the chord joining the curve's endpoints.
    Knee,
    Fixed { tau: f64 },
}

impl Default for ThresholdStrategy {
    fn default() -> Self {
        ThresholdStrategy::MaxCoverageUnderRisk { r_max: 0.08 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub tau: f64,
    pub strategy: ThresholdStrategy,
    /// The selected curve point; `None` for a fixed τ.
    pub point: Option<RiskCoveragePoint>,
    pub warning: Option<String>,
}

pub fn select_threshold(curve: &[RiskCoveragePoint], strategy: ThresholdStrategy) -> Result<ThresholdSelection> {
    if curve.is_empty() {
        return Err(CascadeError::EmptyCurve);
    }
    let chosen = |i: usize, warning: Option<String>| ThresholdSelection {
        tau: curve[i].tau_candidate,
        strategy,
        point: Some(curve[i]),
        warning,
    };
    match strategy {
        ThresholdStrategy::Fixed { tau } => {
            if !(0.0..=1.0).contains(&tau) {
                return Err(CascadeError::BadTau(tau));
            }
            Ok(ThresholdSelection {
                tau,
                strategy,
                point: None,
                warning: None,
            })
        }
        ThresholdStrategy::MaxCoverageUnderRisk { r_max } => {
            let best = curve
                .iter()
                .enumerate()
                .filter(|(_, p)| p.risk <= r_max)
                .fold(None::<usize>, |best, (i, p)| match best {
                    Some(b) if curve[b].coverage >= p.coverage => Some(b),
                    _ => Some(i),
                });
            match best {
                Some(i) if curve[i].n_kept > 0 || curve.len() == 1 => Ok(chosen(i, None)),
                Some(i) => Ok(chosen(
                    i,
                    Some(format!("no point with positive coverage has risk <= {r_max}; escalating everyone")),
                )),
                None => {
                    let i = (0..curve.len())
                        .min_by(|&a, &b| curve[a].coverage.total_cmp(&curve[b].coverage))
                        .expect("non-empty");
                    Ok(chosen(i, Some(format!("no point has risk <= {r_max}; using the lowest coverage"))))
                }
            }
        }
        ThresholdStrategy::Knee => {
            let (first, last) = (curve[0], curve[curve.len() - 1]);
            let (dx, dy) = (last.coverage - first.coverage, last.risk - first.risk);
            let norm = (dx * dx + dy * dy).sqrt();
            let mut best = 0;
            let mut best_d = f64::NEG_INFINITY;
            for (i, p) in curve.iter().enumerate() {
                let d = if norm > 0.0 {
                    (dy * (p.coverage - first.coverage) - dx * (p.risk - first.risk)).abs() / norm
                } else {
                    0.0
                };
                if d > best_d {
                    best_d = d;
                    best = i;
                }
            }
            Ok(chosen(best, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_row_toy() {
        let g = [0.1, 0.2, 0.3, 0.4];
        let p_b = [0.1, 0.1, 0.9, 0.9];
        let labels = [false, false, false, false];
        let curve = risk_coverage_curve(&g, &p_b, &labels).unwrap();
        let at = |c: f64| curve.iter().find(|p| p.coverage == c).unwrap().risk;
        assert_eq!(at(0.0), 0.0);
        assert_eq!(at(0.5), 0.0);
        assert_eq!(at(0.75), 1.0 / 3.0);
        assert_eq!(at(1.0), 0.5);
        assert_eq!(curve[0].tau_candidate, 0.0);
        assert!((curve[2].tau_candidate - 0.25).abs() < 1e-15);
        assert_eq!(curve.last().unwrap().tau_candidate, 1.0);
    }

    #[test]
    fn typical_curve_selects_019() {
        let pt = |coverage: f64, risk: f64| RiskCoveragePoint {
            tau_candidate: coverage / 4.0,
            coverage,
            risk,
            n_kept: (coverage * 100.0) as usize,
        };
        let curve = [pt(0.0, 0.0), pt(0.19, 0.08), pt(1.0, 0.28)];
        let s = select_threshold(&curve, ThresholdStrategy::MaxCoverageUnderRisk { r_max: 0.08 }).unwrap();
        assert_eq!(s.point.unwrap().coverage, 0.19);
        let s = select_threshold(&curve, ThresholdStrategy::MaxCoverageUnderRisk { r_max: 0.5 }).unwrap();
        assert_eq!(s.point.unwrap().coverage, 1.0);
        let s = select_threshold(&curve, ThresholdStrategy::Knee).unwrap();
        assert_eq!(s.point.unwrap().coverage, 0.19);
    }

    #[test]
    fn single_point_curve() {
        let p = RiskCoveragePoint {
            tau_candidate: 0.3,
            coverage: 1.0,
            risk: 0.2,
            n_kept: 4,
        };
        for s in [ThresholdStrategy::default(), ThresholdStrategy::Knee] {
            assert_eq!(select_threshold(&[p], s).unwrap().tau, 0.3);
        }
        assert_eq!(select_threshold(&[p], ThresholdStrategy::Fixed { tau: 0.05 }).unwrap().tau, 0.05);
    }

    #[test]
    fn only_empty_point_feasible_warns() {
        let g = [0.2, 0.6];
        let curve = risk_coverage_curve(&g, &[0.9, 0.9], &[false, false]).unwrap();
        let s = select_threshold(&curve, ThresholdStrategy::default()).unwrap();
        assert_eq!(s.point.unwrap().coverage, 0.0);
        assert!(s.warning.is_some());
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(risk_coverage_curve(&[], &[], &[]), Err(CascadeError::EmptyCurve)));
        assert!(matches!(select_threshold(&[], ThresholdStrategy::Knee), Err(CascadeError::EmptyCurve)));
    }
}
