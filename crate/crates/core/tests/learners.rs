use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use triage_core::data::{generate_cohort, FeatureGroup, Preprocessor, SynthConfig};
use triage_core::eval::auroc;
use triage_core::learners::logistic::{gradient, objective};
use triage_core::learners::svm::{dual_objective, rbf_kernel_matrix, solve_smo, DEFAULT_MAX_ITER, DEFAULT_TOL};
use triage_core::learners::{
    cross_val_predict, fit_logreg, fit_svm_rbf, grid_search, make_cv_plan, LearnerSpec, Metric,
};
use triage_core::seeding;

fn random_problem(seed: u64, n: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
    let mut rng = seeding::rng(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
    let y: Vec<bool> = x
        .rows()
        .into_iter()
        .map(|r| r.sum() + rng.random_range(-1.5..1.5) > 0.0)
        .collect();
    (x, y)
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..10 {
        let (x, y) = random_problem(seed, 30, 4);
        let mut rng = seeding::rng(1000 + seed);
        let w: Array1<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let c = 0.7;
        let g = gradient(x.view(), &y, c, w.view(), b);
        let h = 1e-6;
        let mut fd = Array1::zeros(5);
        for j in 0..4 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            fd[j] = (objective(x.view(), &y, c, wp.view(), b) - objective(x.view(), &y, c, wm.view(), b)) / (2.0 * h);
        }
        fd[4] = (objective(x.view(), &y, c, w.view(), b + h) - objective(x.view(), &y, c, w.view(), b - h)) / (2.0 * h);
        let rel = (&g - &fd).mapv(f64::abs).sum() / g.mapv(f64::abs).sum().max(1e-12);
        assert!(rel <= 1e-6, "seed {seed}: relative error {rel}");
    }
}

#[test]
fn fitted_objective_beats_random_candidates() {
    let (x, y) = random_problem(3, 60, 3);
    let c = 1.0;
    let m = fit_logreg(x.view(), &y, c, 1e-8, 1000).unwrap();
    assert!(m.converged);
    let best = m.objective(x.view(), &y);
    let scale = m.weights.mapv(f64::abs).sum();
    let mut rng = seeding::rng(99);
    for _ in 0..1000 {
        let w: Array1<f64> = m.weights.mapv(|v| v + rng.random_range(-1.0..1.0) * scale);
        let b = m.intercept + rng.random_range(-1.0..1.0);
        assert!(objective(x.view(), &y, c, w.view(), b) >= best);
    }
}

#[test]
fn duplicated_rows_with_half_c_match() {
    let (x, y) = random_problem(5, 40, 3);
    let x2 = ndarray::concatenate![ndarray::Axis(0), x.view(), x.view()];
    let y2: Vec<bool> = y.iter().chain(y.iter()).copied().collect();
    let a = fit_logreg(x.view(), &y, 0.8, 1e-10, 1000).unwrap();
    let b = fit_logreg(x2.view(), &y2, 0.4, 1e-10, 1000).unwrap();
    for (u, v) in a.weights.iter().zip(b.weights.iter()) {
        assert!((u - v).abs() < 1e-6);
    }
    assert!((a.intercept - b.intercept).abs() < 1e-6);
}

fn random_feasible_alpha(rng: &mut impl Rng, y: &[bool], c: f64) -> Option<Array1<f64>> {
    let mut alpha: Array1<f64> = y.iter().map(|_| rng.random_range(0.0..c)).collect();
    let pos: f64 = (0..y.len()).filter(|&i| y[i]).map(|i| alpha[i]).sum();
    let neg: f64 = (0..y.len()).filter(|&i| !y[i]).map(|i| alpha[i]).sum();
    // Rescale the heavier side down so the equality constraint holds.
    let (scale_pos, s) = if pos > neg { (true, neg / pos) } else { (false, pos / neg) };
    for i in 0..y.len() {
        if y[i] == scale_pos {
            alpha[i] *= s;
        }
    }
    alpha.iter().all(|&a| (0.0..=c).contains(&a)).then_some(alpha)
}

#[test]
fn smo_dual_beats_random_feasible_points() {
    let x = array![[0.0, 0.0], [1.0, 0.2], [0.3, 1.0], [1.2, 1.1], [-0.5, 0.4], [0.8, -0.7]];
    let y = [true, false, true, false, true, false];
    let c = 2.0;
    let k = rbf_kernel_matrix(x.view(), x.view(), 0.8);
    let sol = solve_smo(&k, &y, c, 1e-6, 100_000);
    assert!(sol.converged);
    let best = dual_objective(&k, &y, &sol.alpha);
    let mut rng = seeding::rng(7);
    let mut checked = 0;
    while checked < 10_000 {
        if let Some(a) = random_feasible_alpha(&mut rng, &y, c) {
            assert!(dual_objective(&k, &y, &a) <= best + 1e-9);
            checked += 1;
        }
    }
}

#[test]
fn svm_kkt_and_dual_constraints_hold() {
    for seed in 0..5 {
        let (x, y) = random_problem(seed, 80, 3);
        let m = fit_svm_rbf(x.view(), &y, 10.0, 0.5, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(m.converged);
        let worst = m.kkt_residuals(x.view(), &y).into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e-3, "seed {seed}: kkt {worst}");
        assert!(m.equality_residual().abs() <= 1e-6);
        assert!(m.alpha(y.len()).iter().all(|&a| (0.0..=10.0 + 1e-12).contains(&a)));
    }
}

#[test]
fn rbf_svm_separates_xor() {
    let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
    let y = [true, true, false, false];
    let m = fit_svm_rbf(x.view(), &y, 10.0, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let d = m.decision_function(x.view()).unwrap();
    for (v, &label) in d.iter().zip(&y) {
        assert_eq!(*v > 0.0, label);
    }
}

#[test]
fn platt_probability_increases_with_decision() {
    let (x, y) = random_problem(11, 120, 2);
    let m = fit_svm_rbf(x.view(), &y, 1.0, 0.5, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(m.platt.a < 0.0);
    let probs: Vec<f64> = (-40..=40).map(|i| m.platt.probability(i as f64 / 10.0)).collect();
    assert!(probs.windows(2).all(|w| w[1] > w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cv_plan_partitions_rows(n in 4usize..200, k in 2usize..8, seed in any::<u64>(), stratified in any::<bool>(), p in 0.1f64..0.9) {
        prop_assume!(k <= n);
        let y: Vec<bool> = (0..n).map(|i| (i as f64 * p).fract() < p).collect();
        let plan = make_cv_plan(n, k, Some(&y), seed, stratified).unwrap();
        let mut seen = vec![0usize; n];
        for f in 0..k {
            let (train, test) = plan.split(f);
            prop_assert_eq!(train.len() + test.len(), n);
            for &i in &test {
                seen[i] += 1;
            }
            prop_assert!(train.iter().all(|i| !test.contains(i)));
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(&plan, &make_cv_plan(n, k, Some(&y), seed, stratified).unwrap());
    }
}

#[test]
fn accuracy_and_auroc_can_pick_different_points() {
    // Search small seeded datasets for one where the two metrics disagree.
    let grid = LearnerSpec::logistic_grid(&[0.01, 0.1, 1.0, 10.0]);
    let found = (0..500u64).find_map(|seed| {
        let (x, y) = random_problem(seed, 8, 1);
        let plan = make_cv_plan(8, 2, Some(&y), seed, true).ok()?;
        let by_auroc = grid_search(&grid, x.view(), &y, &plan, Metric::Auroc).ok()?;
        let by_acc = grid_search(&grid, x.view(), &y, &plan, Metric::Accuracy).ok()?;
        (by_auroc.best_index != by_acc.best_index).then_some((seed, by_auroc.best_point, by_acc.best_point))
    });
    let (seed, a, b) = found.expect("no disagreeing 8-row dataset");
    assert_ne!(a, b, "seed {seed}");
}

#[test]
fn in_sample_auroc_is_at_least_out_of_fold() {
    let (mut oof_total, mut in_total) = (0.0, 0.0);
    for seed in 0..20 {
        let cfg = SynthConfig {
            n_total: 300,
            seed,
            ..Default::default()
        };
        let cohort = generate_cohort(&cfg).unwrap();
        let idx: Vec<usize> = (0..cohort.len()).collect();
        let pre = Preprocessor::fit_rows(&cohort, &idx, FeatureGroup::Basic).unwrap();
        let x = pre.transform_rows(&cohort, &idx).unwrap();
        let y = cohort.labels();
        let spec = LearnerSpec::Logistic { c: 10.0 };
        let plan = make_cv_plan(y.len(), 5, Some(&y), seed, true).unwrap();
        let oof = cross_val_predict(&spec, x.view(), &y, &plan).unwrap();
        assert!(oof.is_out_of_fold());
        let fit = spec.fit(x.view(), &y).unwrap().predict_proba(x.view()).unwrap();
        oof_total += auroc(oof.values(), &y).unwrap();
        in_total += auroc(fit.as_slice().unwrap(), &y).unwrap();
    }
    assert!(oof_total <= in_total, "oof {} vs in-sample {}", oof_total / 20.0, in_total / 20.0);
}
