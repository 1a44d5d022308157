use proptest::prelude::*;
use triage_core::cascade::{
    baseline_policy, combine, evaluate_threshold, make_triage_labels, risk_coverage_curve, select_threshold,
    BaselineKind, CascadeError, RiskCoveragePoint, ThresholdStrategy,
};
use triage_core::data::{generate_cohort, split_cohort, FeatureGroup, SynthConfig};
use triage_core::learners::{cross_val_predict, make_cv_plan, Gamma, ProbabilityVector};
use triage_core::{CascadePolicy, FittedClassifier, LearnerSpec, Route, TriageLabels};

/// Every kept set a threshold can induce, found by enumerating all subsets.
fn threshold_subsets(g: &[f64], p_b: &[f64], labels: &[bool]) -> Vec<(usize, usize)> {
    let n = g.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let kept = |i: usize| mask & (1 << i) != 0;
        let max_kept = (0..n).filter(|&i| kept(i)).map(|i| g[i]).fold(f64::NEG_INFINITY, f64::max);
        let min_dropped = (0..n).filter(|&i| !kept(i)).map(|i| g[i]).fold(f64::INFINITY, f64::min);
        if max_kept < min_dropped {
            let errors = (0..n).filter(|&i| kept(i) && ((p_b[i] > 0.5) != labels[i])).count();
            out.push((mask.count_ones() as usize, errors));
        }
    }
    out.sort();
    out
}

fn small_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
    (1usize..=12).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..8).prop_map(|v| v as f64 / 8.0), n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn curve_matches_exhaustive_prefixes((g, p_b, labels) in small_case()) {
        let curve = risk_coverage_curve(&g, &p_b, &labels).unwrap();
        let mut got: Vec<(usize, usize)> = curve
            .iter()
            .map(|p| (p.n_kept, (p.risk * p.n_kept as f64).round() as usize))
            .collect();
        got.sort();
        prop_assert_eq!(got, threshold_subsets(&g, &p_b, &labels));
        for p in &curve {
            // Each candidate reproduces its own point.
            prop_assert_eq!(*p, evaluate_threshold(&g, &p_b, &labels, p.tau_candidate).unwrap());
        }
    }

    #[test]
    fn curve_endpoints_and_monotone_coverage((g, p_b, labels) in small_case()) {
        let curve = risk_coverage_curve(&g, &p_b, &labels).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[1].coverage >= w[0].coverage && w[1].tau_candidate > w[0].tau_candidate));
        let first = curve[0];
        prop_assert_eq!((first.coverage, first.risk, first.n_kept), (0.0, 0.0, 0));
        let last = curve[curve.len() - 1];
        let errors = (0..g.len()).filter(|&i| (p_b[i] > 0.5) != labels[i]).count();
        prop_assert_eq!(last.coverage, 1.0);
        prop_assert_eq!(last.risk, errors as f64 / g.len() as f64);
    }

    #[test]
    fn risk_cap_selection_is_feasible_and_maximal((g, p_b, labels) in small_case(), r_max in 0.0f64..1.0) {
        let curve = risk_coverage_curve(&g, &p_b, &labels).unwrap();
        let sel = select_threshold(&curve, ThresholdStrategy::MaxCoverageUnderRisk { r_max }).unwrap();
        let point = sel.point.unwrap();
        prop_assert!(point.risk <= r_max);
        prop_assert!(curve.iter().filter(|p| p.risk <= r_max).all(|p| p.coverage <= point.coverage));
    }

    #[test]
    fn labels_depend_only_on_certainty(p_b in prop::collection::vec(0.0f64..=1.0, 1..40), seed in any::<u64>()) {
        let p_a: Vec<f64> = p_b.iter().enumerate().map(|(i, p)| (p * 7.3 + i as f64 * 0.37 + (seed % 13) as f64 * 0.11) % 1.0).collect();
        let z = make_triage_labels(&p_b, &p_a, 0.2).unwrap().z;
        let mirror = |v: &[f64]| v.iter().map(|p| 1.0 - p).collect::<Vec<f64>>();
        prop_assert_eq!(&z, &make_triage_labels(&mirror(&p_b), &mirror(&p_a), 0.2).unwrap().z);
        // Swapping roles cannot make both directions clear the margin.
        let swapped = make_triage_labels(&p_a, &p_b, 0.2).unwrap().z;
        prop_assert!(z.iter().zip(&swapped).all(|(a, b)| !(*a && *b)));
    }

    #[test]
    fn baselines_escalate_exactly_round_rate_n(p_b in prop::collection::vec(0.0f64..=1.0, 0..120), rate in 0.0f64..=1.0, seed in any::<u64>()) {
        let k = ((rate * p_b.len() as f64).round() as usize).min(p_b.len());
        for kind in BaselineKind::ALL {
            let mask = baseline_policy(kind, rate, &p_b, seed).unwrap();
            prop_assert_eq!(mask.len(), p_b.len());
            prop_assert_eq!(mask.iter().filter(|&&e| e).count(), k);
        }
    }
}

#[test]
fn four_row_toy_by_hand() {
    let g = [0.1, 0.2, 0.3, 0.4];
    let p_b = [0.2, 0.8, 0.9, 0.1];
    let labels = [false, true, false, true];
    let curve = risk_coverage_curve(&g, &p_b, &labels).unwrap();
    let at = |c: f64| curve.iter().find(|p| p.coverage == c).unwrap().risk;
    assert_eq!(at(0.5), 0.0);
    assert_eq!(at(1.0), 0.5);
}

#[test]
fn selection_strategies() {
    let curve = [
        RiskCoveragePoint { tau_candidate: 0.0, coverage: 0.0, risk: 0.0, n_kept: 0 },
        RiskCoveragePoint { tau_candidate: 0.05, coverage: 0.19, risk: 0.08, n_kept: 19 },
        RiskCoveragePoint { tau_candidate: 1.0, coverage: 1.0, risk: 0.28, n_kept: 100 },
    ];
    let pick = |s| select_threshold(&curve, s).unwrap();
    assert_eq!(pick(ThresholdStrategy::default()).point.unwrap().coverage, 0.19);
    assert_eq!(pick(ThresholdStrategy::MaxCoverageUnderRisk { r_max: 0.3 }).point.unwrap().coverage, 1.0);
    assert_eq!(pick(ThresholdStrategy::Knee).point.unwrap().coverage, 0.19);
    let fixed = pick(ThresholdStrategy::Fixed { tau: 0.05 });
    assert_eq!(fixed.tau, 0.05);
    assert!(fixed.point.is_none());
}

fn small_cohort(seed: u64) -> SynthConfig {
    SynthConfig {
        n_total: 260,
        advanced_fraction: 0.6,
        d_b: 6,
        d_a: 8,
        seed,
        ..Default::default()
    }
}

#[test]
fn provenance_guard() {
    let cohort = generate_cohort(&small_cohort(3)).unwrap();
    let idx = cohort.advanced_available_indices();
    let y = cohort.labels_at(&idx);
    let patients = cohort.patients_at(&idx);
    let basic = triage_core::Preprocessor::fit(cohort.schema(), &patients, FeatureGroup::Basic).unwrap();
    let combined = triage_core::Preprocessor::fit(cohort.schema(), &patients, FeatureGroup::Combined).unwrap();
    let (xb, xa) = (basic.transform(&patients).unwrap(), combined.transform(&patients).unwrap());
    let spec = LearnerSpec::Logistic { c: 1.0 };
    let plan = make_cv_plan(y.len(), 5, Some(&y), 1, true).unwrap();
    let other = make_cv_plan(y.len(), 5, Some(&y), 2, true).unwrap();
    let pb = cross_val_predict(&spec, xb.view(), &y, &plan).unwrap();
    let pa = cross_val_predict(&spec, xa.view(), &y, &plan).unwrap();
    let pa_other = cross_val_predict(&spec, xa.view(), &y, &other).unwrap();
    let fitted = spec.fit(xa.view(), &y).unwrap().predict_proba(xa.view()).unwrap();
    let in_sample = ProbabilityVector::in_sample(fitted.to_vec());

    assert!(TriageLabels::from_oof(&pb, &pa, 0.2).is_ok());
    assert!(matches!(TriageLabels::from_oof(&pb, &in_sample, 0.2), Err(CascadeError::NotOutOfFold("advanced"))));
    assert!(matches!(TriageLabels::from_oof(&pb, &pa_other, 0.2), Err(CascadeError::ProvenanceMismatch)));
}

#[test]
fn policy_routing_matches_vectorised_mix() {
    let cohort = generate_cohort(&small_cohort(5)).unwrap();
    let split = split_cohort(&cohort, 60, 5).unwrap().indices(&cohort).unwrap();
    let schema = cohort.schema();
    let train = cohort.patients_at(&split.advanced_train);
    let y = cohort.labels_at(&split.advanced_train);
    let fit = |spec: &LearnerSpec, group, labels: &[bool]| {
        FittedClassifier::train(spec, schema, &train, labels, group).unwrap()
    };
    let basic = fit(&LearnerSpec::Logistic { c: 1.0 }, FeatureGroup::Basic, &y);
    let advanced = fit(&LearnerSpec::Logistic { c: 0.1 }, FeatureGroup::Combined, &y);
    // Any non-trivial labels do for routing; reuse the outcome.
    let triage = fit(&LearnerSpec::SvmRbf { c: 1.0, gamma: Gamma::Auto }, FeatureGroup::Basic, &y);

    let test: Vec<_> = cohort.patients_at(&split.test).into_iter().filter(|p| p.has_advanced()).collect();
    let g = triage.predict(&test).unwrap();
    let mut sorted = g.clone();
    sorted.sort_by(f64::total_cmp);
    let tau = sorted[sorted.len() / 2];
    let policy = CascadePolicy::new(basic.clone(), advanced.clone(), triage, tau).unwrap();

    let p_b = basic.predict(&test).unwrap();
    let p_a = advanced.predict(&test).unwrap();
    let escalate: Vec<bool> = g.iter().map(|&s| s > tau).collect();
    let mixed = combine(&escalate, &p_b, &p_a);
    let decisions = policy.decide_all(&test).unwrap();
    for (i, d) in decisions.iter().enumerate() {
        assert_eq!(d.escalate, escalate[i]);
        assert_eq!(d.score, g[i]);
        assert_eq!(d.final_probability, Some(mixed[i]));
        assert_eq!(d.route, if escalate[i] { Route::Advanced } else { Route::Basic });
    }
    assert!(policy.escalates(tau + 1e-9) && !policy.escalates(tau));
}
