use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nsai::cli::{digest_file, ModelFile, RunManifest};
use nsai::datakit::load_csv;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn nsai(args: &[&str]) -> Output {
    nsai_env(args, &[])
}

fn nsai_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsai"))
        .args(args)
        .env_clear()
        .envs(env.iter().copied())
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Trained {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

fn train_on_toy(extra: &[&str]) -> Trained {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("model");
    let data = fixture("toy.csv");
    let mut args = vec!["train", "--data", &data, "--seed", "3", "--out", s(&dir)];
    args.extend_from_slice(extra);
    ok(&nsai(&args));
    Trained { _tmp: tmp, dir }
}

#[test]
fn synth_writes_requested_rows_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&nsai(&["synth", "--rows", "427", "--seed", "7", "--out", s(dir)]));
    }
    let train = load_csv(a.join("train.csv")).unwrap();
    let test = load_csv(a.join("test.csv")).unwrap();
    assert_eq!(train.len(), 427);
    assert_eq!(test.len(), 85);
    assert_eq!(train.n_features(), 9);
    for f in ["train.csv", "test.csv", "manifest.json"] {
        assert_eq!(digest_file(a.join(f)).unwrap(), digest_file(b.join(f)).unwrap(), "{f}");
    }
    let m = manifest(&a);
    assert_eq!(m.command, "synth");
    assert_eq!(m.seed, Some(7));
    assert_eq!(m.outputs["train.csv"], digest_file(a.join("train.csv")).unwrap());
}

#[test]
fn zero_rows_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsai(&["synth", "--rows", "0", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_missing_flags_exit_2() {
    assert_eq!(nsai(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(nsai(&["train"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture("toy.csv");
    let out = nsai(&["train", "--data", &data, "--model", "nsai", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rules"));
}

#[test]
fn unreadable_input_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsai(&["train", "--data", "/nonexistent/train.csv", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn baseline_memorizes_the_toy_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("memorize.toml");
    std::fs::write(&cfg, "[classifier.train]\nl1 = 0.0\nl2 = 0.0\npatience = 100\n").unwrap();
    let t = train_on_toy(&["--config", s(&cfg)]);
    let model = t.dir.join("model.json");
    let file: ModelFile = serde_json::from_slice(&std::fs::read(&model).unwrap()).unwrap();
    assert!(file.network.unit_labels().is_none());

    let out_dir = t.dir.join("eval");
    let stdout = ok(&nsai(&["evaluate", "--model", s(&model), "--data", &fixture("toy.csv"), "--out", s(&out_dir)]));
    let metrics: nsai::evalharness::Metrics =
        serde_json::from_slice(&std::fs::read(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.n, 12);
    assert_eq!(metrics.accuracy, 1.0, "{stdout}");
    assert!(out_dir.join("metrics.txt").exists());
}

#[test]
fn nsai_model_trains_extracts_and_explains() {
    let rules = fixture("ct.rules");
    let t = train_on_toy(&["--rules", &rules]);
    let model = t.dir.join("model.json");
    let data = fixture("toy.csv");

    let rules_dir = t.dir.join("rules");
    let text = ok(&nsai(&["extract", "--model", s(&model), "--data", &data, "--out", s(&rules_dir)]));
    assert!(text.contains("Final_score:"));
    assert!(text.contains("CT_concepts:"));
    assert!(text.contains("% fidelity"));
    assert!(rules_dir.join("rules.json").exists());

    let exp_dir = t.dir.join("explain");
    ok(&nsai(&["explain", "--model", s(&model), "--data", &data, "--samples", "200", "--out", s(&exp_dir)]));
    let global: nsai::explain::GlobalExplanation =
        serde_json::from_slice(&std::fs::read(exp_dir.join("global.json")).unwrap()).unwrap();
    assert_eq!(global.n_instances, 12);
    assert_eq!(global.features.len(), 9);
    assert!(exp_dir.join("mispredictions.csv").exists());
}

#[test]
fn extract_refuses_unlabeled_models() {
    let t = train_on_toy(&[]);
    let out = nsai(&["extract", "--model", s(&t.dir.join("model.json")), "--data", &fixture("toy.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("explain"));
}

#[test]
fn smote_augmented_training_records_the_source() {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    ok(&nsai(&["synth", "--rows", "120", "--test-rows", "30", "--seed", "2", "--out", s(&data_dir)]));
    let out = tmp.path().join("m");
    ok(&nsai(&[
        "train", "--data", s(&data_dir.join("train.csv")), "--augment", "smote", "--seed", "1", "--out", s(&out),
    ]));
    let m = manifest(&out);
    assert_eq!(m.command, "train");
    let counts = &m.summary["training_class_counts"];
    assert!(counts["Low"].as_u64().unwrap() > 0);
    assert_eq!(counts["Low"], counts["High"], "{}", m.summary);
    assert!(m.summary["training_rows"].as_u64().unwrap() > 120);
}

#[test]
fn manifest_rerun_reproduces_training() {
    let t = train_on_toy(&["--rules", &fixture("ct.rules")]);
    let again = t.dir.parent().unwrap().join("again");
    ok(&nsai(&["train", "--config", s(&t.dir.join("manifest.json")), "--out", s(&again)]));
    for f in ["model.json", "train_report.json", "manifest.json"] {
        assert_eq!(digest_file(t.dir.join(f)).unwrap(), digest_file(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_of_another_command_is_rejected() {
    let t = train_on_toy(&[]);
    let out = nsai(&["synth", "--config", s(&t.dir.join("manifest.json")), "--out", s(&t.dir.join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn environment_and_config_files_feed_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let from_env = tmp.path().join("env");
    ok(&nsai_env(
        &["synth", "--out", s(&from_env)],
        &[("NSAI_ROWS", "50"), ("NSAI_TEST_ROWS", "20"), ("NSAI_SEED", "5")],
    ));
    assert_eq!(load_csv(from_env.join("train.csv")).unwrap().len(), 50);

    // the flag wins over the environment
    let from_flag = tmp.path().join("flag");
    ok(&nsai_env(
        &["synth", "--rows", "40", "--out", s(&from_flag)],
        &[("NSAI_ROWS", "50"), ("NSAI_TEST_ROWS", "20")],
    ));
    assert_eq!(load_csv(from_flag.join("train.csv")).unwrap().len(), 40);

    let cfg = tmp.path().join("synth.toml");
    std::fs::write(&cfg, "n_rows = 33\nn_test = 11\nseed = 5\n").unwrap();
    let from_file = tmp.path().join("file");
    ok(&nsai(&["synth", "--config", s(&cfg), "--out", s(&from_file)]));
    assert_eq!(load_csv(from_file.join("train.csv")).unwrap().len(), 33);
    assert_eq!(load_csv(from_file.join("test.csv")).unwrap().len(), 11);
}

#[test]
fn compare_writes_report_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&nsai(&["synth", "--rows", "150", "--test-rows", "40", "--seed", "4", "--out", s(&data)]));
    let out = tmp.path().join("cmp");
    let stdout = ok(&nsai(&[
        "compare",
        "--train", s(&data.join("train.csv")),
        "--test", s(&data.join("test.csv")),
        "--rules", &fixture("ct.rules"),
        "--folds", "2",
        "--repeats", "2",
        "--seed", "4",
        "--out", s(&out),
    ]));
    for name in ["Deep NN", "Deep NN-SMOTE", "Deep NN-Autoencoder", "NSAI"] {
        assert!(stdout.contains(name), "{name} missing from\n{stdout}");
    }
    let report: nsai::evalharness::ExperimentReport =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.models.len(), 4);
    assert_eq!(report.test_rows, 40);
    assert!(report.models.iter().all(|m| m.cv.as_ref().unwrap().folds == 2));
    assert_eq!(std::fs::read_to_string(out.join("report.txt")).unwrap(), stdout);
}
