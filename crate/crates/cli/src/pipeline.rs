//! The six commands as library functions. Each reads its inputs from the run
//! directory, writes its artifacts there and appends to the manifest.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use triage_core::cascade::{
    baseline_policy, certainty, combine, make_triage_labels, risk_coverage_curve, select_threshold, BaselineKind,
    CascadePolicy, EscalationDecision, RiskCoveragePoint, ThresholdSelection, ThresholdStrategy, TriageLabels,
};
use triage_core::data::{
    generate_cohort, load_cohort, load_patients, split_cohort, write_cohort, CohortSplit, CohortTable, FeatureGroup,
    FeatureSchema, Patient, Preprocessor,
};
use triage_core::eval::{
    auroc, balance_report, bootstrap_ci, cost_curve, metric_set, paired_delta_auroc, pr_curve, rate_grid, roc_curve,
    BalanceTable, BootstrapCi, CostPoint, EvalError, MetricSet, PairedDeltaTest,
};
use triage_core::explain::{background_for, explain_decision, write_explanations_csv, ExplanationRecord};
use triage_core::seeding;
use triage_core::learners::{
    cross_val_predict, cross_val_predict_with_extra, grid_search, make_cv_plan, FittedClassifier, GridSearchResult,
    LearnerSpec,
};

use crate::config::{RunConfig, Stream};
use crate::error::{CliError, Result};
use crate::manifest::RunDir;

pub const COHORT_FILE: &str = "cohort.csv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const SPLIT_FILE: &str = "split.json";
pub const OOF_FILE: &str = "oof.csv";
pub const POLICY_FILE: &str = "policy.json";
pub const BASIC_MODEL: &str = "models/basic.json";
pub const ADVANCED_MODEL: &str = "models/advanced.json";
pub const TRIAGE_MODEL: &str = "models/triage.json";

fn resolve_schema(cfg: &RunConfig, dir: &Path) -> Result<FeatureSchema> {
    if let Some(p) = &cfg.schema {
        return Ok(FeatureSchema::load(p)?);
    }
    let local = dir.join(SCHEMA_FILE);
    if local.exists() {
        return Ok(FeatureSchema::load(local)?);
    }
    Ok(cfg.synth.schema())
}

fn resolve_cohort(cfg: &RunConfig, dir: &Path, schema: &FeatureSchema) -> Result<CohortTable> {
    let path = match &cfg.cohort {
        Some(p) => p.clone(),
        None => dir.join(COHORT_FILE),
    };
    if !path.exists() {
        return Err(CliError::Config(format!(
            "no cohort at {}; run `triage synth` first or set `cohort` in the config",
            path.display()
        )));
    }
    Ok(load_cohort(&path, schema)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, rel: &str) -> Result<T> {
    let path = dir.join(rel);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}; run the earlier pipeline steps first", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn patients<'a>(cohort: &'a CohortTable, idx: &[usize]) -> Vec<&'a Patient> {
    cohort.patients_at(idx)
}

// ---------------------------------------------------------------- synth

pub fn cmd_synth(cfg: &RunConfig, dir: &Path) -> Result<CohortTable> {
    cfg.validate()?;
    let mut run = RunDir::open(dir)?;
    let cohort = generate_cohort(&cfg.synth).map_err(|e| CliError::Config(e.to_string()))?;
    let mut bytes = Vec::new();
    write_cohort(&cohort, &mut bytes)?;
    run.write_bytes(COHORT_FILE, &bytes)?;
    let mut schema = cohort.schema().to_json_pretty();
    schema.push('\n');
    run.write_bytes(SCHEMA_FILE, schema.as_bytes())?;
    run.finish("synth", cfg)?;
    Ok(cohort)
}

// ---------------------------------------------------------------- train

/// Out-of-fold view of the Advanced/Triage training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofRow {
    pub id: String,
    pub label: u8,
    pub p_basic: f64,
    pub p_advanced: f64,
    pub z: u8,
    /// Out-of-fold escalation score.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_basic_train: usize,
    pub n_advanced_train: usize,
    pub n_test: usize,
    pub delta: f64,
    pub z_positive: usize,
    pub z_rate: f64,
    pub basic_grid: GridSearchResult,
    pub advanced_grid: GridSearchResult,
    pub triage_grid: GridSearchResult,
    /// Mean held-out AUROC of the selected Triage model across folds.
    pub triage_cv_auroc: f64,
    /// AUROC of pooled out-of-fold escalation scores against `z`.
    pub triage_oof_auroc: f64,
    pub converged: ConvergenceFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFlags {
    pub basic: bool,
    pub advanced: bool,
    pub triage: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub split: CohortSplit,
    pub basic: FittedClassifier,
    pub advanced: FittedClassifier,
    pub triage: FittedClassifier,
    pub labels: TriageLabels,
    pub oof: Vec<OofRow>,
    pub report: TrainReport,
}

fn select_and_fit(
    grid: &[LearnerSpec],
    preprocessor: Preprocessor,
    x: &ndarray::Array2<f64>,
    y: &[bool],
    plan: &triage_core::learners::CvPlan,
    cfg: &RunConfig,
) -> Result<(GridSearchResult, FittedClassifier)> {
    let search = grid_search(grid, x.view(), y, plan, cfg.grids.metric)?;
    if search.mean_scores.iter().all(Option::is_none) {
        return Err(CliError::Numeric(format!(
            "every grid point failed: {}",
            search.warnings.first().cloned().unwrap_or_default()
        )));
    }
    let model = search.best_point.fit(x.view(), y)?;
    let fitted = FittedClassifier {
        spec: search.best_point.clone(),
        preprocessor,
        model,
    };
    Ok((search, fitted))
}

pub fn cmd_train(cfg: &RunConfig, dir: &Path) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut run = RunDir::open(dir)?;
    let schema = resolve_schema(cfg, dir)?;
    let cohort = resolve_cohort(cfg, dir, &schema)?;
    let split = split_cohort(&cohort, cfg.split.test_n, cfg.stream(Stream::Split))?;
    let idx = split.indices(&cohort)?;
    let (folds, stratified) = (cfg.grids.folds, cfg.grids.stratified);

    // Basic model on every non-test row.
    let basic_rows = patients(&cohort, &idx.basic_train);
    let y_b = cohort.labels_at(&idx.basic_train);
    let pre_b = Preprocessor::fit(&schema, &basic_rows, FeatureGroup::Basic)?;
    let x_b = pre_b.transform(&basic_rows)?;
    let plan_b = make_cv_plan(y_b.len(), folds, Some(&y_b), cfg.stream(Stream::CvBasic), stratified)?;
    let (basic_grid, basic) = select_and_fit(&cfg.grids.basic_grid(), pre_b, &x_b, &y_b, &plan_b, cfg)?;

    // Advanced model on the advanced-available training rows.
    let adv_rows = patients(&cohort, &idx.advanced_train);
    let y_a = cohort.labels_at(&idx.advanced_train);
    let pre_a = Preprocessor::fit(&schema, &adv_rows, FeatureGroup::Combined)?;
    let x_a = pre_a.transform(&adv_rows)?;
    let plan_a = make_cv_plan(y_a.len(), folds, Some(&y_a), cfg.stream(Stream::CvAdvanced), stratified)?;
    let (advanced_grid, advanced) = select_and_fit(&cfg.grids.advanced_grid(), pre_a, &x_a, &y_a, &plan_a, cfg)?;

    // Out-of-fold probabilities for both models on the same folds. Basic
    // fold models also train on the basic-only rows, which are never
    // predicted here.
    let p_a_oof = cross_val_predict(&advanced.spec, x_a.view(), &y_a, &plan_a)?;
    let in_adv: std::collections::HashSet<usize> = idx.advanced_train.iter().copied().collect();
    let extra: Vec<usize> = idx.basic_train.iter().copied().filter(|i| !in_adv.contains(i)).collect();
    let x_b_adv = basic.preprocessor.transform(&adv_rows)?;
    let x_b_extra = basic.preprocessor.transform(&patients(&cohort, &extra))?;
    let y_extra = cohort.labels_at(&extra);
    let p_b_oof = cross_val_predict_with_extra(&basic.spec, x_b_adv.view(), &y_a, &plan_a, x_b_extra.view(), &y_extra)?;
    let labels = TriageLabels::from_oof(&p_b_oof, &p_a_oof, cfg.delta)?;
    let z_positive = labels.positives();
    if z_positive == 0 || z_positive == labels.z.len() {
        return Err(CliError::Numeric(format!(
            "triage labels contain a single class ({z_positive} of {} rows escalate at delta {}); lower delta or \
             check that the advanced model improves certainty",
            labels.z.len(),
            cfg.delta
        )));
    }

    // Triage model on basic features of the same rows.
    let pre_t = Preprocessor::fit(&schema, &adv_rows, FeatureGroup::Basic)?;
    let x_t = pre_t.transform(&adv_rows)?;
    let plan_t = make_cv_plan(labels.z.len(), folds, Some(&labels.z), cfg.stream(Stream::CvTriage), stratified)?;
    let (triage_grid, triage) = select_and_fit(&cfg.grids.triage_grid(), pre_t, &x_t, &labels.z, &plan_t, cfg)?;
    let g_oof = cross_val_predict(&triage.spec, x_t.view(), &labels.z, &plan_t)?;
    let triage_oof_auroc = auroc(g_oof.values(), &labels.z)?;

    let oof: Vec<OofRow> = (0..y_a.len())
        .map(|i| OofRow {
            id: adv_rows[i].id.clone(),
            label: y_a[i] as u8,
            p_basic: p_b_oof.values()[i],
            p_advanced: p_a_oof.values()[i],
            z: labels.z[i] as u8,
            g: g_oof.values()[i],
        })
        .collect();

    let report = TrainReport {
        n_basic_train: idx.basic_train.len(),
        n_advanced_train: idx.advanced_train.len(),
        n_test: idx.test.len(),
        delta: cfg.delta,
        z_positive,
        z_rate: z_positive as f64 / labels.z.len() as f64,
        triage_cv_auroc: triage_grid.best_score,
        triage_oof_auroc,
        converged: ConvergenceFlags {
            basic: basic.model.converged(),
            advanced: advanced.model.converged(),
            triage: triage.model.converged(),
        },
        basic_grid,
        advanced_grid,
        triage_grid,
    };

    run.write_json(SPLIT_FILE, &split)?;
    for (rel, name, model) in [
        (BASIC_MODEL, "basic", &basic),
        (ADVANCED_MODEL, "advanced", &advanced),
        (TRIAGE_MODEL, "triage", &triage),
    ] {
        let mut text = model.to_json();
        text.push('\n');
        run.write_bytes(rel, text.as_bytes())?;
        run.record_fingerprint(name, model.fingerprint());
    }
    run.write_csv(OOF_FILE, &oof)?;
    run.write_json("triage_labels.json", &labels)?;
    run.write_json("train_report.json", &report)?;
    run.finish("train", cfg)?;
    Ok(TrainOutput {
        split,
        basic,
        advanced,
        triage,
        labels,
        oof,
        report,
    })
}

pub fn read_oof(dir: &Path) -> Result<Vec<OofRow>> {
    let path = dir.join(OOF_FILE);
    let mut r = csv::Reader::from_path(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}; run `triage train` first", path.display())))?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<OofRow>, _>>()?)
}

// ---------------------------------------------------------------- threshold

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub path: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format_version: u32,
    pub tau: f64,
    pub delta: f64,
    pub strategy: ThresholdStrategy,
    pub selection: ThresholdSelection,
    pub basic: ModelRef,
    pub advanced: ModelRef,
    pub triage: ModelRef,
}

impl PolicyFile {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(dir, POLICY_FILE)
    }

    /// Loads the referenced models and checks their fingerprints.
    pub fn policy(&self, dir: &Path) -> Result<CascadePolicy> {
        let load = |r: &ModelRef| -> Result<FittedClassifier> {
            let model = FittedClassifier::load(dir.join(&r.path))?;
            if model.fingerprint() != r.fingerprint {
                return Err(CliError::Data(format!("model {} does not match the policy fingerprint", r.path)));
            }
            Ok(model)
        };
        Ok(CascadePolicy::new(load(&self.basic)?, load(&self.advanced)?, load(&self.triage)?, self.tau)?)
    }
}

pub fn cmd_threshold(cfg: &RunConfig, dir: &Path) -> Result<PolicyFile> {
    cfg.validate()?;
    let mut run = RunDir::open(dir)?;
    let oof = read_oof(dir)?;
    let g: Vec<f64> = oof.iter().map(|r| r.g).collect();
    let p_b: Vec<f64> = oof.iter().map(|r| r.p_basic).collect();
    let y: Vec<bool> = oof.iter().map(|r| r.label == 1).collect();
    let curve = risk_coverage_curve(&g, &p_b, &y)?;
    let selection = select_threshold(&curve, cfg.threshold)?;
    let model_ref = |rel: &str| -> Result<ModelRef> {
        Ok(ModelRef {
            path: rel.to_string(),
            fingerprint: FittedClassifier::load(dir.join(rel))?.fingerprint(),
        })
    };
    let policy = PolicyFile {
        format_version: 1,
        tau: selection.tau,
        delta: cfg.delta,
        strategy: cfg.threshold,
        selection,
        basic: model_ref(BASIC_MODEL)?,
        advanced: model_ref(ADVANCED_MODEL)?,
        triage: model_ref(TRIAGE_MODEL)?,
    };
    run.write_csv("risk_coverage.csv", &curve)?;
    run.write_json(POLICY_FILE, &policy)?;
    run.finish("threshold", cfg)?;
    Ok(policy)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCis {
    pub auroc: BootstrapCi,
    pub auprc: BootstrapCi,
    pub accuracy: BootstrapCi,
    pub recall: BootstrapCi,
    pub precision: BootstrapCi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub name: String,
    pub escalation_rate: f64,
    pub metrics: MetricSet,
    pub ci: Option<MetricCis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    pub delta: f64,
    pub test: Option<PairedDeltaTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceOutcome {
    pub table: Option<BalanceTable>,
    pub note: Option<String>,
}

impl BalanceOutcome {
    fn from(result: std::result::Result<BalanceTable, EvalError>) -> Self {
        match result {
            Ok(t) => Self { table: Some(t), note: None },
            Err(e) => Self {
                table: None,
                note: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub tau: f64,
    pub n_escalated: usize,
    pub escalation_rate: f64,
    pub unit_cost: f64,
    pub cost_per_100: f64,
    pub saving_per_100: f64,
    /// AUROC of test escalation scores against test certainty-gain labels.
    pub triage_test_auroc: Option<f64>,
    pub policies: Vec<PolicyMetrics>,
    pub paired: Vec<PairedComparison>,
    pub balance_escalated: BalanceOutcome,
    pub balance_train_test: BalanceOutcome,
}

impl EvalReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyMetrics> {
        self.policies.iter().find(|p| p.name == name)
    }

    pub fn comparison(&self, b: &str) -> Option<&PairedComparison> {
        self.paired.iter().find(|p| p.b == b)
    }
}

#[derive(Serialize)]
struct RocRow<'a> {
    policy: &'a str,
    threshold: f64,
    fpr: f64,
    tpr: f64,
}

#[derive(Serialize)]
struct PrRow<'a> {
    policy: &'a str,
    threshold: f64,
    recall: f64,
    precision: f64,
}

#[derive(Serialize)]
struct CostRow<'a> {
    ordering: &'a str,
    escalation_rate: f64,
    n_escalated: usize,
    expected_cost_per_100: f64,
    auroc: f64,
}

#[derive(Serialize)]
struct TestRow<'a> {
    id: &'a str,
    label: u8,
    p_basic: f64,
    p_advanced: f64,
    g: f64,
    escalate: u8,
    p_cascade: f64,
}

fn cis(scores: &[f64], labels: &[bool], cfg: &RunConfig) -> Result<MetricCis> {
    let (b, seed) = (cfg.bootstrap.replicates, cfg.stream(Stream::Bootstrap));
    let thresholded = |pick: fn(&MetricSet) -> f64| {
        move |s: &[f64], l: &[bool]| -> std::result::Result<f64, EvalError> { Ok(pick(&metric_set(s, l, 0.5)?)) }
    };
    Ok(MetricCis {
        auroc: bootstrap_ci(auroc, scores, labels, b, seed)?,
        auprc: bootstrap_ci(triage_core::eval::auprc, scores, labels, b, seed)?,
        accuracy: bootstrap_ci(thresholded(|m| m.accuracy), scores, labels, b, seed)?,
        recall: bootstrap_ci(thresholded(|m| m.recall), scores, labels, b, seed)?,
        precision: bootstrap_ci(thresholded(|m| m.precision), scores, labels, b, seed)?,
    })
}

pub fn cmd_evaluate(cfg: &RunConfig, dir: &Path, bootstrap: bool) -> Result<EvalReport> {
    cfg.validate()?;
    let bootstrap = bootstrap && cfg.bootstrap.enabled;
    let mut run = RunDir::open(dir)?;
    let policy_file = PolicyFile::load(dir)?;
    let policy = policy_file.policy(dir)?;
    let schema = resolve_schema(cfg, dir)?;
    let cohort = resolve_cohort(cfg, dir, &schema)?;
    let split: CohortSplit = read_json(dir, SPLIT_FILE)?;
    let idx = split.indices(&cohort)?;
    let test = patients(&cohort, &idx.test);
    let y = cohort.labels_at(&idx.test);
    let n = y.len();

    let p_b = policy.basic.predict(&test)?;
    let p_a = policy.advanced.predict(&test)?;
    let g = policy.triage.predict(&test)?;
    let escalate: Vec<bool> = g.iter().map(|&s| policy.escalates(s)).collect();
    let n_escalated = escalate.iter().filter(|&&e| e).count();
    let rate = n_escalated as f64 / n as f64;
    let cascade = combine(&escalate, &p_b, &p_a);

    let mut named: Vec<(String, f64, Vec<f64>)> = vec![
        ("basic".into(), 0.0, p_b.clone()),
        ("advanced".into(), 1.0, p_a.clone()),
        ("cascade".into(), rate, cascade.clone()),
    ];
    for kind in BaselineKind::ALL {
        let mask = baseline_policy(kind, rate, &p_b, cfg.stream(Stream::RandomBaseline))?;
        let k = mask.iter().filter(|&&e| e).count();
        named.push((kind.name().to_string(), k as f64 / n as f64, combine(&mask, &p_b, &p_a)));
    }

    let policies = named
        .iter()
        .map(|(name, r, scores)| {
            Ok(PolicyMetrics {
                name: name.clone(),
                escalation_rate: *r,
                metrics: metric_set(scores, &y, 0.5)?,
                ci: if bootstrap { Some(cis(scores, &y, cfg)?) } else { None },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let paired = named
        .iter()
        .filter(|(name, _, _)| name != "cascade")
        .map(|(name, _, scores)| {
            let test = if bootstrap {
                Some(paired_delta_auroc(
                    &cascade,
                    scores,
                    &y,
                    cfg.bootstrap.replicates,
                    cfg.stream(Stream::Bootstrap),
                )?)
            } else {
                None
            };
            Ok(PairedComparison {
                a: "cascade".into(),
                b: name.clone(),
                delta: auroc(&cascade, &y)? - auroc(scores, &y)?,
                test,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Test-set certainty-gain labels; both models are fixed, so no leakage.
    let z_test = make_triage_labels(&p_b, &p_a, policy_file.delta)?;
    let triage_test_auroc = auroc(&g, &z_test.z).ok();

    let characteristics = &schema.demographic_columns;
    let balance_escalated = BalanceOutcome::from(balance_report(
        &schema,
        &test,
        &escalate,
        characteristics,
        ("escalated", "not_escalated"),
    ));
    let mut both = patients(&cohort, &idx.basic_train);
    let mut is_train = vec![true; both.len()];
    both.extend(test.iter().copied());
    is_train.extend(std::iter::repeat_n(false, test.len()));
    let balance_train_test =
        BalanceOutcome::from(balance_report(&schema, &both, &is_train, characteristics, ("train", "test")));

    // Curves.
    let mut roc_rows = Vec::new();
    let mut pr_rows = Vec::new();
    for (name, _, scores) in &named {
        for p in roc_curve(scores, &y)? {
            roc_rows.push(RocRow { policy: name, threshold: p.threshold, fpr: p.fpr, tpr: p.tpr });
        }
        for p in pr_curve(scores, &y)? {
            pr_rows.push(PrRow { policy: name, threshold: p.threshold, recall: p.recall, precision: p.precision });
        }
    }
    let rates = rate_grid(20);
    let neg_certainty: Vec<f64> = p_b.iter().map(|&p| certainty(p).map(|c| -c)).collect::<std::result::Result<_, _>>()?;
    let random_priority = uniform_priorities(n, cfg.stream(Stream::RandomBaseline));
    let mut cost_rows = Vec::new();
    for (ordering, priority) in [
        ("triage", &g),
        ("top_prob", &p_b),
        ("most_uncertain", &neg_certainty),
        ("random", &random_priority),
    ] {
        let points: Vec<CostPoint> = cost_curve(priority, &p_b, &p_a, &y, cfg.unit_cost, &rates)?;
        cost_rows.extend(points.into_iter().map(|c| CostRow {
            ordering,
            escalation_rate: c.escalation_rate,
            n_escalated: c.n_escalated,
            expected_cost_per_100: c.expected_cost_per_100,
            auroc: c.auroc,
        }));
    }
    let test_curve: Vec<RiskCoveragePoint> = risk_coverage_curve(&g, &p_b, &y)?;
    let test_rows: Vec<TestRow> = (0..n)
        .map(|i| TestRow {
            id: &test[i].id,
            label: y[i] as u8,
            p_basic: p_b[i],
            p_advanced: p_a[i],
            g: g[i],
            escalate: escalate[i] as u8,
            p_cascade: cascade[i],
        })
        .collect();

    let report = EvalReport {
        n_test: n,
        tau: policy.tau,
        n_escalated,
        escalation_rate: rate,
        unit_cost: cfg.unit_cost,
        cost_per_100: triage_core::eval::cost_per_100(rate, cfg.unit_cost),
        saving_per_100: triage_core::eval::cost_per_100(1.0 - rate, cfg.unit_cost),
        triage_test_auroc,
        policies,
        paired,
        balance_escalated,
        balance_train_test,
    };
    run.write_json("report.json", &report)?;
    run.write_csv("test_predictions.csv", &test_rows)?;
    run.write_csv("roc_curves.csv", &roc_rows)?;
    run.write_csv("pr_curves.csv", &pr_rows)?;
    run.write_csv("cost_curves.csv", &cost_rows)?;
    run.write_csv("test_risk_coverage.csv", &test_curve)?;
    run.finish("evaluate", cfg)?;
    Ok(report)
}

/// Seeded uniform priorities for a random escalation ordering.
fn uniform_priorities(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecisionLine {
    Decision(EscalationDecision),
    RowError { row: usize, error: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOutput {
    pub lines: Vec<DecisionLine>,
    pub n_errors: usize,
}

fn read_input_patients(path: &Path, schema: &FeatureSchema) -> Result<Vec<std::result::Result<Patient, String>>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(load_patients(file, schema)?
        .into_iter()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect())
}

/// Routes every row of `input`. Bad rows are logged and skipped; the caller
/// reports them through the exit code.
pub fn cmd_predict(cfg: &RunConfig, dir: &Path, input: &Path, output: &str) -> Result<PredictOutput> {
    cfg.validate()?;
    let mut run = RunDir::open(dir)?;
    let policy = PolicyFile::load(dir)?.policy(dir)?;
    let schema = resolve_schema(cfg, dir)?;
    let mut lines = Vec::new();
    for (i, row) in read_input_patients(input, &schema)?.into_iter().enumerate() {
        let line = match row.and_then(|p| policy.route(&p).map_err(|e| e.to_string())) {
            Ok(d) => DecisionLine::Decision(d),
            Err(error) => DecisionLine::RowError { row: i + 1, error },
        };
        lines.push(line);
    }
    let mut text = String::new();
    for l in &lines {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    run.write_bytes(output, text.as_bytes())?;
    run.finish("predict", cfg)?;
    let n_errors = lines.iter().filter(|l| matches!(l, DecisionLine::RowError { .. })).count();
    Ok(PredictOutput { lines, n_errors })
}

// ---------------------------------------------------------------- explain

/// Explains the Triage decision for each patient in `input`, or for the test
/// split when no input is given. `limit` caps the number of patients.
pub fn cmd_explain(cfg: &RunConfig, dir: &Path, input: Option<&Path>, limit: Option<usize>) -> Result<Vec<ExplanationRecord>> {
    cfg.validate()?;
    let mut run = RunDir::open(dir)?;
    let policy = PolicyFile::load(dir)?.policy(dir)?;
    let schema = resolve_schema(cfg, dir)?;
    let cohort = resolve_cohort(cfg, dir, &schema)?;
    let split: CohortSplit = read_json(dir, SPLIT_FILE)?;
    let idx = split.indices(&cohort)?;
    let background = background_for(
        &policy.triage,
        &patients(&cohort, &idx.advanced_train),
        cfg.explain.background_cap,
        cfg.stream(Stream::Background),
    )?;
    let targets: Vec<Patient> = match input {
        Some(path) => read_input_patients(path, &schema)?.into_iter().filter_map(|r| r.ok()).collect(),
        None => patients(&cohort, &idx.test).into_iter().cloned().collect(),
    };
    let take = limit.unwrap_or(targets.len()).min(targets.len());
    let method = match cfg.explain.method {
        triage_core::explain::ShapleyMethod::Sampled { n_samples, .. } => triage_core::explain::ShapleyMethod::Sampled {
            n_samples,
            seed: cfg.stream(Stream::Shapley),
        },
        m => m,
    };
    let records = targets[..take]
        .iter()
        .map(|p| explain_decision(&policy, p, &background, method))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    run.write_json("explanations.json", &records)?;
    let mut csv_bytes = Vec::new();
    write_explanations_csv(&records, &mut csv_bytes)?;
    run.write_bytes("explanations.csv", &csv_bytes)?;
    run.finish("explain", cfg)?;
    Ok(records)
}
