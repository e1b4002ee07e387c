//! End-to-end tests of the `prognoses` binary: command flows, exit codes,
//! and the determinism contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_prognoses")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("PROGNOSES_SEED")
        .output()
        .expect("spawn prognoses")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn synth_cohort(dir: &Path, seed: u64, extra: &str) -> PathBuf {
    let config = dir.join("synth.toml");
    write(&config, &format!("preset = \"easy\"\nseed = {seed}\n{extra}"));
    let out = run(
        &["synth", "--config", "synth.toml", "--out", "cohort"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("cohort")
}

#[test]
fn validate_prints_summary_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 42, "");
    let out = run(
        &[
            "validate",
            "--features",
            "cohort/features.jsonl",
            "--labels",
            "cohort/labels.csv",
            "--source",
            "biomarker",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("patients=30"), "{stdout}");
    assert!(stdout.contains("positive="), "{stdout}");
}

#[test]
fn validate_empty_features_exits_two_with_no_records() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("empty.jsonl"), "");
    write(&dir.path().join("labels.csv"), "patient_id,readmitted\n");
    let out = run(
        &[
            "validate",
            "--features",
            "empty.jsonl",
            "--labels",
            "labels.csv",
            "--source",
            "biomarker",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no records"));
}

#[test]
fn validate_reports_offending_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    for i in 0..20 {
        let dims = if i == 16 { 7 } else { 38 }; // line 17 is malformed
        lines.push(format!(
            "{{\"patient_id\":\"P{:03}\",\"view\":\"L1\",\"day\":1,\"source\":\"biomarker\",\"features\":[{}]}}",
            i + 1,
            vec!["0.0"; dims].join(",")
        ));
    }
    write(&dir.path().join("features.jsonl"), &(lines.join("\n") + "\n"));
    let labels: String = (0..20).map(|i| format!("P{:03},0\n", i + 1)).collect();
    write(
        &dir.path().join("labels.csv"),
        &format!("patient_id,readmitted\n{labels}"),
    );
    let out = run(
        &[
            "validate",
            "--features",
            "features.jsonl",
            "--labels",
            "labels.csv",
            "--source",
            "biomarker",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 17"));
}

#[test]
fn synth_is_byte_deterministic_and_validates_params() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 9, "");
    let features = std::fs::read(dir.path().join("cohort/features.jsonl")).unwrap();
    let truth = std::fs::read(dir.path().join("cohort/ground_truth.json")).unwrap();
    assert_eq!(
        features.lines_count(),
        360,
        "default params write 30 x 6 x 2 records"
    );
    // Regenerate into a second directory: byte-identical outputs.
    let config = dir.path().join("synth.toml");
    write(&config, "preset = \"easy\"\nseed = 9\n");
    let out = run(&["synth", "--config", "synth.toml", "--out", "cohort2"], dir.path());
    assert!(out.status.success());
    assert_eq!(features, std::fs::read(dir.path().join("cohort2/features.jsonl")).unwrap());
    assert_eq!(truth, std::fs::read(dir.path().join("cohort2/ground_truth.json")).unwrap());

    // Invalid params exit 2.
    write(&config, "seed = 9\nn_patients = 10\nprevalence = 0.05\n");
    let out = run(&["synth", "--config", "synth.toml", "--out", "bad"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prevalence"));
}

trait LinesCount {
    fn lines_count(&self) -> usize;
}
impl LinesCount for Vec<u8> {
    fn lines_count(&self) -> usize {
        self.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count()
    }
}

const RUN_CONFIG: &str = r#"
seed = 11

[data]
features = "cohort/features.jsonl"
labels = "cohort/labels.csv"
source = "biomarker"

[experiment]
views = "L3"
temporal = "difference"
day_policy = "first_pair"
classifiers = ["svm"]
bootstrap_iters = 300
"#;

#[test]
fn run_emits_report_and_identical_rerun() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 21, "");
    write(&dir.path().join("run.toml"), RUN_CONFIG);
    let out = run(&["run", "--config", "run.toml", "--out", "r1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("f1="), "{stdout}");
    assert!(stdout.contains("dim=38"), "{stdout}");

    let out = run(&["run", "--config", "run.toml", "--out", "r2"], dir.path());
    assert!(out.status.success());
    for file in ["report.json", "predictions.csv"] {
        let a = std::fs::read(dir.path().join("r1").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("r2").join(file)).unwrap();
        assert_eq!(a, b, "{file} changed between identical runs");
    }
    let predictions = std::fs::read_to_string(dir.path().join("r1/predictions.csv")).unwrap();
    assert!(predictions.starts_with("patient_id,view,day_a,day_b,y_true,proba,y_pred\n"));
    assert_eq!(predictions.lines().count(), 31); // header + 30 pooled predictions
}

#[test]
fn all_views_run_reports_6d_dimension() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 33, "");
    write(
        &dir.path().join("run.toml"),
        &RUN_CONFIG
            .replace("views = \"L3\"", "views = \"all\"\nfeature_fusion = \"concatenate\"")
            .replace("classifiers = [\"svm\"]", "classifiers = [\"decision_tree\"]"),
    );
    let out = run(&["run", "--config", "run.toml", "--out", "r"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dim=228")); // 6 x 38
}

#[test]
fn seed_flag_beats_env_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 5, "");
    write(&dir.path().join("run.toml"), RUN_CONFIG);

    let base = run(&["run", "--config", "run.toml", "--out", "a"], dir.path());
    assert!(base.status.success());

    // Env var changes the seed -> different report.
    let out = Command::new(bin())
        .args(["run", "--config", "run.toml", "--out", "b"])
        .current_dir(dir.path())
        .env("PROGNOSES_SEED", "999")
        .output()
        .unwrap();
    assert!(out.status.success());
    let a = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert_ne!(a, b);

    // Explicit flag wins over env: matches a plain --seed run.
    let out = Command::new(bin())
        .args(["run", "--config", "run.toml", "--out", "c", "--seed", "11"])
        .current_dir(dir.path())
        .env("PROGNOSES_SEED", "999")
        .output()
        .unwrap();
    assert!(out.status.success());
    let c = std::fs::read(dir.path().join("c/report.json")).unwrap();
    assert_eq!(a, c);
}

#[test]
fn config_schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 5, "");
    write(
        &dir.path().join("run.toml"),
        &RUN_CONFIG.replace("temporal = \"difference\"", "temporal = \"bogus\""),
    );
    let out = run(&["run", "--config", "run.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("temporal"));
}

#[test]
fn forest_run_feeds_the_importance_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    synth_cohort(dir.path(), 13, "");
    write(
        &dir.path().join("run.toml"),
        &RUN_CONFIG.replace("classifiers = [\"svm\"]", "classifiers = [\"random_forest\"]"),
    );
    let out = run(&["run", "--config", "run.toml", "--out", "rf"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let counts = dir.path().join("rf/importance_counts.csv");
    assert!(counts.exists());
    assert!(dir.path().join("rf/models/fold_0.json").exists());

    let out = run(
        &[
            "importance",
            "--counts",
            "rf/importance_counts.csv",
            "--out",
            "radar.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let radar = std::fs::read_to_string(dir.path().join("radar.csv")).unwrap();
    assert!(radar.starts_with("group,avg_frequency,normalized\n"));
    assert_eq!(radar.lines().count(), 10); // header + 9 canonical groups
}

#[test]
fn missing_config_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--config", "nope.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablate_emits_daypair_and_biomarker_tables() {
    let dir = tempfile::tempdir().unwrap();
    // Small multi-day cohort: these checks are about table shape, and the
    // five-classifier table3 includes the MLP variants.
    let config = dir.path().join("synth.toml");
    write(
        &config,
        "preset = \"easy\"\nseed = 88\nn_patients = 15\ndays = [1, 2, 3]\n",
    );
    let out = run(&["synth", "--config", "synth.toml", "--out", "cohort"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    write(
        &dir.path().join("ablate.toml"),
        r#"
seed = 17
classifier = "decision_tree"

[data]
features = "cohort/features.jsonl"
labels = "cohort/labels.csv"
source = "biomarker"

[biomarker_data]
features = "cohort/features.jsonl"
labels = "cohort/labels.csv"
source = "biomarker"

[ablate]
exhibits = ["table2", "table3"]
bootstrap_iters = 100
"#,
    );
    let out = run(
        &["ablate", "--config", "ablate.toml", "--out", "tables", "--jobs", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let table2 = std::fs::read_to_string(dir.path().join("tables/table2_daypair.csv")).unwrap();
    let lines: Vec<&str> = table2.lines().collect();
    assert_eq!(lines.len(), 8); // header + 6 views + All Views
    assert!(lines[0].contains("day12_single_day_model"));
    assert!(lines[0].contains("all_days_all_days_model"));

    let table3 = std::fs::read_to_string(dir.path().join("tables/table3_biomarker.csv")).unwrap();
    let lines: Vec<&str> = table3.lines().collect();
    assert_eq!(lines.len(), 7); // header + 6 view/day variants
    assert!(lines[1].starts_with("Left-3 (Day 1 vs Day 2),"));
    assert!(lines[6].starts_with("All Views (All Days),"));

    // table3 without a biomarker dataset is a schema error.
    write(
        &dir.path().join("bad.toml"),
        r#"
seed = 17

[data]
features = "cohort/features.jsonl"
labels = "cohort/labels.csv"
source = "biomarker"

[ablate]
exhibits = ["table3"]
"#,
    );
    let out = run(&["ablate", "--config", "bad.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("biomarker_data"));
}
