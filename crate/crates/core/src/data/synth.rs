//! Synthetic cohorts shaped like the MCI conversion data.
//!
//! Each patient has a latent risk `r ~ N(0, 1)`. Risk-bearing basic columns
//! are noisy views `r + σ_b·e`, advanced columns are `l_j·r + σ_a·e`, and the
//! label depends on `r` only. Demographics other than the risk-bearing ones
//! are drawn independently of `r`.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cohort::{CohortTable, DemographicValue, Patient, PatientRecord};
use super::schema::{numbered_columns, CategoricalColumn, DemographicColumn, FeatureSchema, ADNI_ADVANCED_WIDTH};
use super::{DataError, Result};
use crate::eval::special::normal_quantile;
use crate::seeding;

/// How labels follow from latent risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelModel {
    /// `y ~ Bernoulli(sigmoid(slope·r + b))`.
    Logistic { slope: f64 },
    /// `y = 1[r > Φ⁻¹(1 − rate)]`, the infinite-slope limit.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_total: usize,
    /// Fraction of rows with advanced features; the count is `⌈f·n⌉`.
    pub advanced_fraction: f64,
    pub basic_noise: f64,
    pub advanced_noise: f64,
    pub conversion_base_rate: f64,
    pub seed: u64,
    pub d_b: usize,
    pub d_a: usize,
    pub label_model: LabelModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_total: 1142,
            advanced_fraction: 551.0 / 1142.0,
            basic_noise: 1.5,
            advanced_noise: 0.3,
            conversion_base_rate: 0.3,
            seed: 1,
            d_b: 9,
            d_a: ADNI_ADVANCED_WIDTH,
            label_model: LabelModel::Logistic { slope: 2.0 },
        }
    }
}

const ADNI_BASIC_WIDTH: usize = 9;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DataError::InvalidConfig(msg.to_string()));
        if self.n_total == 0 {
            return bad("n_total must be positive");
        }
        if !(self.advanced_fraction > 0.0 && self.advanced_fraction <= 1.0) {
            return bad("advanced_fraction must lie in (0, 1]");
        }
        if !(self.basic_noise >= 0.0 && self.basic_noise.is_finite()) {
            return bad("basic_noise must be finite and non-negative");
        }
        if !(self.advanced_noise >= 0.0 && self.advanced_noise.is_finite()) {
            return bad("advanced_noise must be finite and non-negative");
        }
        if !(self.conversion_base_rate > 0.0 && self.conversion_base_rate < 1.0) {
            return bad("conversion_base_rate must lie in (0, 1)");
        }
        if self.d_b < 3 {
            return bad("d_b must be at least 3");
        }
        if self.d_a == 0 {
            return bad("d_a must be positive");
        }
        if let LabelModel::Logistic { slope } = self.label_model {
            if !(slope > 0.0 && slope.is_finite()) {
                return bad("label slope must be finite and positive");
            }
        }
        Ok(())
    }

    pub fn n_advanced(&self) -> usize {
        ((self.advanced_fraction * self.n_total as f64 - 1e-9).ceil() as usize).min(self.n_total)
    }

    /// Schema of the generated cohort. With `d_b = 9` this is the ADNI
    /// layout; otherwise a generic layout of numeric views plus one binary and
    /// one four-level risk category.
    pub fn schema(&self) -> FeatureSchema {
        if self.d_b == ADNI_BASIC_WIDTH {
            let mut s = FeatureSchema::adni_default();
            s.advanced_numeric = numbered_columns("adv", self.d_a);
            return s;
        }
        FeatureSchema {
            id_column: "id".into(),
            basic_numeric: numbered_columns("basic", self.d_b - 2),
            basic_categorical: vec![
                CategoricalColumn::new("risk_flag", &["0", "1"]),
                CategoricalColumn::new("risk_stage", &["0", "1", "2", "3"]),
            ],
            advanced_numeric: numbered_columns("adv", self.d_a),
            label_column: "converted".into(),
            demographic_columns: vec![
                DemographicColumn::numeric("demo_age"),
                DemographicColumn::categorical("demo_group"),
            ],
            advanced_available_column: "advanced_available".into(),
            missing_markers: Vec::new(),
        }
    }
}

type LabelRule = Box<dyn Fn(f64, &mut ChaCha8Rng) -> bool>;

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Intercept `b` with `E[sigmoid(a·r + b)] = rate` for `r ~ N(0, 1)`,
/// by bisection on a trapezoid rule over [-10, 10].
fn solve_intercept(slope: f64, rate: f64) -> f64 {
    const STEPS: usize = 4000;
    let h = 20.0 / STEPS as f64;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let expected = |b: f64| {
        (0..=STEPS)
            .map(|i| {
                let x = -10.0 + h * i as f64;
                let w = if i == 0 || i == STEPS { 0.5 } else { 1.0 };
                w * density(x) * sigmoid(slope * x + b)
            })
            .sum::<f64>()
            * h
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Index of the first cut strictly above `u`.
fn bucket(u: f64, cuts: &[f64]) -> usize {
    cuts.iter().take_while(|&&c| u >= c).count()
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn draw_category(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Generates a cohort; byte-identical for identical configs.
pub fn generate_cohort(cfg: &SynthConfig) -> Result<CohortTable> {
    cfg.validate()?;
    let schema = cfg.schema();
    let mut rng = seeding::rng(cfg.seed);
    let n = cfg.n_total;
    let sb = cfg.basic_noise;
    let spread = (1.0 + sb * sb).sqrt();

    let loadings: Vec<f64> = (0..cfg.d_a)
        .map(|_| {
            let m: f64 = rng.random_range(0.5..1.5);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    let available = {
        let mut flags = vec![false; n];
        for i in index::sample(&mut rng, n, cfg.n_advanced()) {
            flags[i] = true;
        }
        flags
    };
    let label_rule: LabelRule = match cfg.label_model {
        LabelModel::Logistic { slope } => {
            let b = solve_intercept(slope, cfg.conversion_base_rate);
            Box::new(move |r, rng| rng.random::<f64>() < sigmoid(slope * r + b))
        }
        LabelModel::Threshold => {
            let cut = normal_quantile(1.0 - cfg.conversion_base_rate);
            Box::new(move |r, _| r > cut)
        }
    };
    let adni = cfg.d_b == ADNI_BASIC_WIDTH;
    let id_width = n.to_string().len().max(4);

    let mut rows = Vec::with_capacity(n);
    for (i, &has_advanced) in available.iter().enumerate() {
        let r = normal(&mut rng);
        let label = label_rule(r, &mut rng);
        let view = |rng: &mut ChaCha8Rng| r + sb * normal(rng);

        let (basic_numeric, basic_categorical, demographics) = if adni {
            let age = round_to((72.0 + 7.5 * normal(&mut rng)).clamp(55.0, 90.0), 1);
            let education = (16.0 + 2.7 * normal(&mut rng)).round().clamp(6.0, 20.0);
            let mmse = 27.5 - 1.5 * view(&mut rng);
            let adas11 = 11.0 + 4.5 * view(&mut rng);
            let gender = if rng.random::<f64>() < 0.55 { "Male" } else { "Female" };
            let race = ["White", "Black", "Asian", "Other"][draw_category(&mut rng, &[0.93, 0.03, 0.015, 0.025])];
            let apoe4_cuts = [normal_quantile(0.53) * spread, normal_quantile(0.89) * spread];
            let apoe4 = ["0", "1", "2"][bucket(view(&mut rng), &apoe4_cuts)];
            let apoe2 = if rng.random::<f64>() < 0.08 { "1" } else { "0" };
            let cdr_cuts = [0.1, 0.8, 0.97].map(|q| normal_quantile(q) * spread);
            let cdr = ["0", "0.5", "1", "2"][bucket(view(&mut rng), &cdr_cuts)];
            let categorical: Vec<String> = [gender, race, apoe4, apoe2, cdr].iter().map(|s| s.to_string()).collect();
            let demographics = vec![
                DemographicValue::Numeric(age),
                DemographicValue::Numeric(education),
                DemographicValue::Category(gender.into()),
                DemographicValue::Category(race.into()),
                DemographicValue::Category(apoe4.into()),
                DemographicValue::Category(apoe2.into()),
            ];
            (vec![age, education, mmse, adas11], categorical, demographics)
        } else {
            let numeric: Vec<f64> = (0..cfg.d_b - 2)
                .map(|j| {
                    let v = view(&mut rng);
                    if j % 2 == 0 {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let flag = bucket(view(&mut rng), &[0.0]);
            let stage_cuts = [0.25, 0.5, 0.75].map(|q| normal_quantile(q) * spread);
            let stage = bucket(view(&mut rng), &stage_cuts);
            let demo_age = round_to(50.0 + 10.0 * normal(&mut rng), 1);
            let demo_group = ["A", "B", "C"][draw_category(&mut rng, &[0.5, 0.3, 0.2])];
            (
                numeric,
                vec![flag.to_string(), stage.to_string()],
                vec![
                    DemographicValue::Numeric(demo_age),
                    DemographicValue::Category(demo_group.into()),
                ],
            )
        };

        let advanced_values: Vec<Option<f64>> = loadings
            .iter()
            .map(|&l| Some(l * r + cfg.advanced_noise * normal(&mut rng)))
            .collect();
        rows.push(PatientRecord {
            patient: Patient {
                id: format!("P{:0id_width$}", i + 1),
                basic_numeric,
                basic_categorical,
                advanced: has_advanced.then_some(advanced_values),
                demographics,
            },
            label,
        });
    }
    CohortTable::new(schema, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_hits_target_rate() {
        let b = solve_intercept(2.0, 0.3);
        let mut rng = seeding::rng(0);
        let m = 200_000;
        let mean = (0..m).map(|_| sigmoid(2.0 * normal(&mut rng) + b)).sum::<f64>() / m as f64;
        assert!((mean - 0.3).abs() < 0.005, "{mean}");
    }

    #[test]
    fn default_shape() {
        let c = generate_cohort(&SynthConfig::default()).unwrap();
        assert_eq!(c.len(), 1142);
        assert_eq!(c.advanced_available_indices().len(), 551);
        assert_eq!(c.schema(), &FeatureSchema::adni_default());
        assert_eq!(c.rows()[0].patient.id, "P0001");
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            SynthConfig { advanced_fraction: 0.0, ..Default::default() },
            SynthConfig { conversion_base_rate: 1.0, ..Default::default() },
            SynthConfig { basic_noise: -1.0, ..Default::default() },
            SynthConfig { d_b: 2, ..Default::default() },
            SynthConfig { label_model: LabelModel::Logistic { slope: 0.0 }, ..Default::default() },
        ] {
            assert!(matches!(generate_cohort(&cfg), Err(DataError::InvalidConfig(_))));
        }
    }

    #[test]
    fn generic_layout() {
        let cfg = SynthConfig { n_total: 40, d_b: 5, d_a: 3, ..Default::default() };
        let c = generate_cohort(&cfg).unwrap();
        assert_eq!(c.schema().basic_numeric, vec!["basic_001", "basic_002", "basic_003"]);
        assert_eq!(c.schema().basic_width(), 5);
        assert!(c.rows().iter().all(|r| r.patient.demographics.len() == 2));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SynthConfig { label_model: LabelModel::Threshold, ..Default::default() };
        let back: SynthConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let partial: SynthConfig = serde_json::from_str(r#"{"n_total": 50}"#).unwrap();
        assert_eq!(partial.n_total, 50);
        assert_eq!(partial.d_a, 329);
    }
}
