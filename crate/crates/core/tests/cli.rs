use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rbmvote::data::read_labels;
use rbmvote::mapping::CondIndParams;
use rbmvote::PredictionMatrix;

fn rbmvote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbmvote"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_writes_full_size_condind_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbmvote(&["generate", "--generator", "condind", "--n", "10000", "--seed", "3", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10_000);
    assert!(lines.iter().all(|l| l.split(',').count() == 15 && l.split(',').all(|v| v == "0" || v == "1")));
    assert_eq!(read_labels(&dir.path().join("labels.csv")).unwrap().len(), 10_000);
    let sidecar = fs::read_to_string(dir.path().join("generator.json")).unwrap();
    assert!(sidecar.contains("\"kind\": \"condind\""));
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = rbmvote(&["generate", "--generator", "tree", "--n", "500", "--seed", "9", "--out", p(&dir.path().join(sub))]);
        assert!(out.status.success());
    }
    for file in ["predictions.csv", "labels.csv", "generator.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn generate_rejects_empty_sample_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never");
    let out = rbmvote(&["generate", "--generator", "condind", "--n", "0", "--out", p(&target)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sample size"));
    assert!(!target.exists());
}

#[test]
fn generate_reuses_sidecar_model() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(rbmvote(&["generate", "--generator", "layered_graph", "--n", "50", "--seed", "1", "--out", p(&first)]).status.success());
    let second = dir.path().join("second");
    let out = rbmvote(&[
        "generate",
        "--generator",
        "layered_graph",
        "--n",
        "50",
        "--seed",
        "2",
        "--model",
        p(&first.join("generator.json")),
        "--out",
        p(&second),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(first.join("generator.json")).unwrap(),
        fs::read(second.join("generator.json")).unwrap()
    );
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_reports_repetitions_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"source": {"generator": {"kind": "condind", "n": 2000}}, "method": "vote", "repetitions": 3, "seed": 5}"#,
    );
    let mut reports = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = rbmvote(&["run", "--config", p(&config), "--out", p(&out_dir)]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("balanced accuracy"));
        reports.push(fs::read_to_string(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let report: serde_json::Value = serde_json::from_str(&reports[0]).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["method"], "vote");
    let reps = report["repetitions"].as_array().unwrap();
    assert_eq!(reps.len(), 3);
    for rep in reps {
        let acc = rep["balanced_accuracy"].as_f64().unwrap();
        assert!((0.5..=1.0).contains(&acc));
        // four decimal places
        assert!(((acc * 1e4).round() - acc * 1e4).abs() < 1e-6);
    }
    // a fresh dataset per repetition
    assert!(reps.iter().any(|r| r["balanced_accuracy"] != reps[0]["balanced_accuracy"]));
}

#[test]
fn run_dnn_reports_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"source": {"generator": {"kind": "condind", "n": 1000}}, "method": "dnn",
            "train": {"epochs": 5}, "repetitions": 2, "passes": 10}"#,
    );
    let out = rbmvote(&["run", "--config", p(&config), "--out", p(dir.path()), "--mode", "map"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["mode"], "map");
    let arch = report["architecture"].as_str().unwrap();
    assert!(arch.starts_with("15-") && arch.ends_with("-1"));
    for rep in report["repetitions"].as_array().unwrap() {
        assert_eq!(rep["balanced_accuracy"], rep["map_accuracy"]);
    }
}

#[test]
fn run_on_csv_files_leaves_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    assert!(rbmvote(&["generate", "--generator", "condind", "--n", "800", "--seed", "4", "--out", p(&data_dir)]).status.success());
    let predictions = data_dir.join("predictions.csv");
    let labels = data_dir.join("labels.csv");
    let before = (fs::read(&predictions).unwrap(), fs::read(&labels).unwrap());
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{"source": {{"csv": {{"predictions": {:?}, "labels": {:?}}}}}, "method": "ds", "repetitions": 2}}"#,
            p(&predictions),
            p(&labels)
        ),
    );
    let out = rbmvote(&["run", "--config", p(&config), "--out", p(&dir.path().join("out"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(before, (fs::read(&predictions).unwrap(), fs::read(&labels).unwrap()));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let reps = report["repetitions"].as_array().unwrap();
    // file sources only re-seed training; ds is deterministic
    assert_eq!(reps[0]["balanced_accuracy"], reps[1]["balanced_accuracy"]);
}

#[test]
fn run_requires_labels_for_csv_sources() {
    let dir = tempfile::tempdir().unwrap();
    let predictions = dir.path().join("x.csv");
    fs::write(&predictions, "1,0\n0,1\n").unwrap();
    let config = write_config(
        dir.path(),
        &format!(r#"{{"source": {{"csv": {{"predictions": {:?}}}}}, "method": "vote"}}"#, p(&predictions)),
    );
    let out = rbmvote(&["run", "--config", p(&config), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("labels"));
}

#[test]
fn csv_parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let predictions = dir.path().join("bad.csv");
    fs::write(&predictions, "# header comment\n1,0,1\n1,2,0\n").unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "1\n0\n").unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{"source": {{"csv": {{"predictions": {:?}, "labels": {:?}}}}}, "method": "vote"}}"#,
            p(&predictions),
            p(&labels)
        ),
    );
    let out = rbmvote(&["run", "--config", p(&config), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.csv:3:"), "{}", stderr(&out));
}

#[test]
fn verify_suites_pass_and_print_errors() {
    let out = rbmvote(&["verify", "--suite", "bijection", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().count() >= 3 && text.lines().all(|l| l.starts_with("PASS")), "{text}");

    let out = rbmvote(&["verify", "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn map_params_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let theta = CondIndParams::new(vec![0.9, 0.7, 0.6], vec![0.8, 0.65, 0.95], 0.4).unwrap();
    let input = dir.path().join("theta.json");
    fs::write(&input, serde_json::to_string(&theta).unwrap()).unwrap();
    let rbm = dir.path().join("rbm.json");
    let back = dir.path().join("back.json");
    assert!(rbmvote(&["map-params", "--input", p(&input), "--to", "rbm", "--out", p(&rbm)]).status.success());
    assert!(rbmvote(&["map-params", "--input", p(&rbm), "--to", "condind", "--out", p(&back)]).status.success());
    let got: CondIndParams = serde_json::from_str(&fs::read_to_string(&back).unwrap()).unwrap();
    for (a, b) in got.psi.iter().chain(&got.eta).zip(theta.psi.iter().chain(&theta.eta)) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!((got.pi - theta.pi).abs() < 1e-10);
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rbmvote(&["generate", "--generator", "condind", "--n", "600", "--out", p(dir.path())]).status.success());
    let train_cfg = dir.path().join("train.json");
    fs::write(&train_cfg, r#"{"epochs": 5, "batch_size": 20}"#).unwrap();
    let model = dir.path().join("model.json");
    let out = rbmvote(&[
        "train",
        "--predictions",
        p(&dir.path().join("predictions.csv")),
        "--config",
        p(&train_cfg),
        "--out",
        p(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("architecture 15-"));

    let scores = dir.path().join("scores.txt");
    let out = rbmvote(&[
        "predict",
        "--model",
        p(&model),
        "--predictions",
        p(&dir.path().join("predictions.csv")),
        "--labels",
        p(&dir.path().join("labels.csv")),
        "--passes",
        "5",
        "--out",
        p(&scores),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("balanced accuracy"));
    let values: Vec<f64> = fs::read_to_string(&scores)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 600);
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn correlations_export_square_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rbmvote(&["generate", "--generator", "tree", "--n", "2000", "--out", p(dir.path())]).status.success());
    let out = rbmvote(&[
        "correlations",
        "--predictions",
        p(&dir.path().join("predictions.csv")),
        "--labels",
        p(&dir.path().join("labels.csv")),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 15);
    assert!(text.lines().all(|l| l.split(',').count() == 15));
}

#[test]
fn search_writes_best_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rbmvote(&["generate", "--generator", "condind", "--n", "400", "--out", p(dir.path())]).status.success());
    let space = dir.path().join("space.json");
    fs::write(&space, r#"{"n_configs": 2, "epochs": {"min": 2, "max": 2, "scale": "linear"}}"#).unwrap();
    let out = rbmvote(&["search", "--predictions", p(&dir.path().join("predictions.csv")), "--config", p(&space)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["trials"].as_array().unwrap().len(), 2);
    assert!(result["score"].as_f64().unwrap() < 0.0);
}

#[test]
fn usage_errors_exit_with_validation_code() {
    assert_eq!(rbmvote(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(rbmvote(&["--help"]).status.code(), Some(0));
}

#[test]
fn generated_csv_round_trips_through_library() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rbmvote(&["generate", "--generator", "truncated_gaussian", "--n", "100", "--out", p(dir.path())]).status.success());
    let data = PredictionMatrix::read_csv(&dir.path().join("predictions.csv")).unwrap();
    assert_eq!((data.n_rows(), data.n_cols()), (100, 15));
}
