use std::path::Path;
use std::process::{Command, Output};

use triage_cli::manifest::RunManifest;

const SMALL: &str = r#"{
  "synth": {"n_total": 320, "advanced_fraction": 0.6},
  "split": {"test_n": 50},
  "bootstrap": {"replicates": 200},
  "explain": {"background_cap": 30}
}"#;

fn triage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triage"))
        .arg("--quiet")
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_pipeline(dir: &Path, config: &str, threshold: &[&str]) {
    for step in [&["synth"][..], &["train"], threshold, &["evaluate"]] {
        let mut args = vec!["--config", config];
        args.extend_from_slice(step);
        let o = triage(dir, &args);
        assert!(o.status.success(), "{step:?}: {}", stderr(&o));
    }
}

#[test]
fn pipeline_writes_every_artifact_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&a, &config, &["threshold"]);
    run_pipeline(&b, &config, &["threshold"]);
    for name in [
        "cohort.csv",
        "schema.json",
        "split.json",
        "oof.csv",
        "triage_labels.json",
        "train_report.json",
        "models/basic.json",
        "models/advanced.json",
        "models/triage.json",
        "risk_coverage.csv",
        "policy.json",
        "report.json",
        "test_predictions.csv",
        "roc_curves.csv",
        "pr_curves.csv",
        "cost_curves.csv",
    ] {
        assert!(a.join(name).exists(), "missing {name}");
    }
    let ma = RunManifest::load(&a).unwrap();
    let mb = RunManifest::load(&b).unwrap();
    assert_eq!(ma.commands.len(), 4);
    assert_eq!(ma.artifact_checksums(), mb.artifact_checksums());

    let o = triage(&a, &["--config", &config, "explain", "--limit", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("explanations.json")).unwrap()).unwrap();
    assert_eq!(records.as_array().unwrap().len(), 2);
}

#[test]
fn fixed_threshold_reaches_policy_and_routes_missing_advanced() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let config = write_config(tmp.path(), SMALL);
    run_pipeline(&dir, &config, &["threshold", "--strategy", "fixed", "--tau", "0"]);
    let policy: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("policy.json")).unwrap()).unwrap();
    assert_eq!(policy["tau"], 0.0);

    // Rows without advanced features, plus one malformed row.
    let cohort = std::fs::read_to_string(dir.join("cohort.csv")).unwrap();
    let mut lines = cohort.lines();
    let header = lines.next().unwrap();
    let avail = header.split(',').position(|h| h == "advanced_available").unwrap();
    let mut rows: Vec<String> = lines
        .filter(|l| l.split(',').nth(avail) == Some("0"))
        .take(3)
        .map(str::to_string)
        .collect();
    let mut broken: Vec<&str> = rows[0].split(',').collect();
    broken[0] = "BROKEN";
    broken[1] = "not-a-number";
    rows.push(broken.join(","));
    let input = tmp.path().join("input.csv");
    std::fs::write(&input, format!("{header}\n{}\n", rows.join("\n"))).unwrap();

    let o = triage(&dir, &["--config", &config, "predict", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[data]: 1 of 4 rows"));
    let log = std::fs::read_to_string(dir.join("decisions.jsonl")).unwrap();
    let decisions: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(decisions.len(), 4);
    for d in &decisions[..3] {
        assert_eq!(d["route"], "advanced-required");
        assert!(d["final_probability"].is_null());
    }
    assert_eq!(decisions[3]["row"], 4);

    // An empty input is not an error.
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, format!("{header}\n")).unwrap();
    let o = triage(&dir, &["--config", &config, "predict", "--input", empty.to_str().unwrap(), "--output", "empty.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");

    let bad = write_config(tmp.path(), r#"{"dleta": 0.2}"#);
    let o = triage(&dir, &["--config", &bad, "synth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]:"));
    assert_eq!(stderr(&o).trim_end().lines().count(), 1);

    let o = triage(&dir, &["threshold", "--strategy", "fixed"]);
    assert_eq!(o.status.code(), Some(2));

    // No cohort in the run directory yet: a setup problem, not bad data.
    let o = triage(&dir, &["train"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // No certainty gain can exceed 0.5, so every triage label is negative.
    let config = write_config(tmp.path(), &SMALL.replace("\"split\"", "\"delta\": 0.6, \"split\""));
    assert!(triage(&dir, &["--config", &config, "synth"]).status.success());
    let cohort_path = dir.join("cohort.csv");
    let cohort = std::fs::read_to_string(&cohort_path).unwrap();

    let mut corrupt: Vec<String> = cohort.lines().map(str::to_string).collect();
    corrupt[5] = corrupt[5].replacen(',', ",oops,", 1);
    std::fs::write(&cohort_path, corrupt.join("\n")).unwrap();
    let o = triage(&dir, &["--config", &config, "train"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[data]:"));

    std::fs::write(&cohort_path, cohort).unwrap();
    let o = triage(&dir, &["--config", &config, "train"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[numeric]:"));
}
