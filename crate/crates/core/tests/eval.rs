use ndarray::array;
use proptest::prelude::*;
use rand::Rng;
use triage_core::data::{generate_cohort, split_cohort, SynthConfig};
use triage_core::eval::special::{chi_square_sf, student_t_two_sided};
use triage_core::eval::{
    auroc, balance_report, bootstrap_ci, chi_square, cost_curve, cost_per_100, paired_delta_auroc, rate_grid, welch_t,
    EvalError, TestKind,
};
use triage_core::seeding;

// Reference values from scipy.stats (ttest_ind with equal_var=False,
// chi2.sf), cross-checked with a 40-digit incomplete beta.
const WELCH_T: f64 = -2.8216651667585277;
const WELCH_DF: f64 = 27.818966038567545;
const WELCH_P: f64 = 0.008717728775207833;
const CHI2_20_1: f64 = 7.744216431044088e-06;

#[test]
fn welch_textbook_pair() {
    let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4];
    let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 30.3, 23.8];
    let t = welch_t(&a, &b).unwrap();
    assert!((t.statistic - WELCH_T).abs() < 1e-10);
    assert!((t.df - WELCH_DF).abs() < 1e-9);
    assert!((t.p_value - WELCH_P).abs() < 1e-10);
    assert!((student_t_two_sided(WELCH_T, WELCH_DF) - WELCH_P).abs() < 1e-12);
}

#[test]
fn chi_square_diagonal_table() {
    let t = chi_square(array![[10.0, 0.0], [0.0, 10.0]].view()).unwrap();
    assert_eq!(t.statistic, 20.0);
    assert_eq!(t.df, 1.0);
    assert!((t.p_value - CHI2_20_1).abs() < 1e-12);
    assert!((chi_square_sf(20.0, 1.0) - CHI2_20_1).abs() < 1e-12);
}

#[test]
fn cost_identities() {
    assert_eq!(cost_per_100(0.0, 4000.0), 0.0);
    assert_eq!(cost_per_100(1.0, 4000.0), 400_000.0);
    assert_eq!(cost_per_100(0.8, 4000.0), 320_000.0);
    assert_eq!(cost_per_100(1.0, 4000.0) - cost_per_100(0.8, 4000.0), 80_000.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn cost_curve_is_linear_in_rate(n in 4usize..60, seed in any::<u64>(), unit in 1.0f64..10_000.0) {
        let mut rng = seeding::rng(seed);
        let g: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let p_b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let p_a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        labels[0] = true;
        labels[1] = false;
        let rates = rate_grid(10);
        let curve = cost_curve(&g, &p_b, &p_a, &labels, unit, &rates).unwrap();
        for p in &curve {
            prop_assert!((p.expected_cost_per_100 - p.escalation_rate * 100.0 * unit).abs() <= 1e-9 * unit);
        }
        prop_assert_eq!(curve[0].auroc, auroc(&p_b, &labels).unwrap());
        prop_assert_eq!(curve[curve.len() - 1].auroc, auroc(&p_a, &labels).unwrap());
    }
}

fn noisy_scores(seed: u64, n: usize, signal: f64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = seeding::rng(seed);
    let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0 || rng.random::<f64>() < 0.2).collect();
    let scores = labels
        .iter()
        .map(|&l| if l { signal } else { 0.0 } + rng.random::<f64>())
        .collect();
    (scores, labels)
}

#[test]
fn point_estimate_lies_inside_interval() {
    for seed in 0..100 {
        let (s, l) = noisy_scores(seed, 60, 0.4);
        let ci = bootstrap_ci(auroc, &s, &l, 200, seed).unwrap();
        assert!(ci.lower <= ci.point && ci.point <= ci.upper, "seed {seed}: {ci:?}");
    }
}

#[test]
fn bootstrap_is_deterministic_per_seed() {
    let (s, l) = noisy_scores(4, 80, 0.5);
    let a = bootstrap_ci(auroc, &s, &l, 300, 9).unwrap();
    assert_eq!(a, bootstrap_ci(auroc, &s, &l, 300, 9).unwrap());
    assert_ne!(a, bootstrap_ci(auroc, &s, &l, 300, 10).unwrap());
}

#[test]
fn high_auroc_interval_width_is_order_tenth() {
    // Shifted uniforms with AUROC 1 − (1 − 0.63)²/2 ≈ 0.93.
    let (s, l) = noisy_scores(8, 100, 0.63);
    let ci = bootstrap_ci(auroc, &s, &l, 1000, 1).unwrap();
    assert!(ci.point > 0.88, "{}", ci.point);
    let width = ci.upper - ci.lower;
    assert!((0.03..0.3).contains(&width), "{width}");
}

#[test]
fn paired_test_flags_a_real_gap_only() {
    let (s, l) = noisy_scores(2, 100, 1.0);
    let mut rng = seeding::rng(77);
    let weak: Vec<f64> = s.iter().map(|v| v + 1.5 * rng.random::<f64>()).collect();
    let jitter: Vec<f64> = s.iter().map(|v| v + 1e-3 * rng.random::<f64>()).collect();
    assert!(paired_delta_auroc(&s, &weak, &l, 1000, 3).unwrap().p_value < 0.05);
    assert!(paired_delta_auroc(&s, &jitter, &l, 1000, 3).unwrap().p_value > 0.05);
}

#[test]
fn too_few_replicates_is_an_error() {
    let (s, l) = noisy_scores(1, 30, 0.5);
    assert!(matches!(bootstrap_ci(auroc, &s, &l, 10, 1), Err(EvalError::TooFewRequested(_))));
}

#[test]
fn null_demographics_rarely_reach_one_in_a_thousand() {
    // A mask drawn independently of everything: the characteristic tests
    // should behave like nulls.
    let mut tiny = 0;
    let mut total = 0;
    for seed in 0..20 {
        let cohort = generate_cohort(&SynthConfig { seed, ..Default::default() }).unwrap();
        let split = split_cohort(&cohort, 100, seed).unwrap().indices(&cohort).unwrap();
        let patients = cohort.patients_at(&split.advanced_train);
        let mut rng = seeding::rng(seed + 500);
        let mask: Vec<bool> = patients.iter().map(|_| rng.random::<f64>() < 0.3).collect();
        let schema = cohort.schema();
        let table = balance_report(schema, &patients, &mask, &schema.demographic_columns, ("a", "b")).unwrap();
        for row in &table.rows {
            if let Some(p) = row.p_value {
                total += 1;
                tiny += (p < 0.001) as usize;
            }
        }
        assert!(table.rows.iter().any(|r| r.test_kind == TestKind::WelchT));
        assert!(table.rows.iter().any(|r| r.test_kind == TestKind::ChiSquare));
    }
    assert!(total >= 100);
    assert!(tiny <= 1, "{tiny} of {total} rows below 0.001");
}
