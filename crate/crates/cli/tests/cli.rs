use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stackcast::artifact::ModelArtifact;
use stackcast::dataset::{build_lagged, load_csv, synth};
use stackcast::learner::{fit_learner, Regressor};
use stackcast_cli::commands;
use stackcast_cli::config::RunConfig;

const SMALL: &str = r#"
[data.synth]
n_days = 1300

[lags]
delays = [1, 7]

[stack.master]
kind = "mlp"
arch = { hidden_sizes = [8] }
train = { learning_rate = 1e-3, max_epochs = 20 }

[[stack.sub_learners]]
kind = "gbdt"
n_estimators = 15
learning_rate = 0.1
max_bins = 31

[[stack.sub_learners]]
kind = "random_forest"
n_estimators = 4
max_depth = 5
"#;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stackcast")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().unwrap()
}

fn small_dir() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), SMALL).unwrap();
    d
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn gen_data_twice_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(d.path(), &["gen-data", "--days", "3650", "--seed", "7", "--out", "out"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = files(&a.path().join("out"));
    assert_eq!(fa.len(), 2);
    for f in fa {
        let other = b.path().join("out").join(f.file_name().unwrap());
        assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(other).unwrap(), "{}", f.display());
    }
    let d = load_csv(a.path().join("out/ed_synthetic.csv"), &synth::file_schema()).unwrap();
    assert_eq!(d.n_rows(), 3650);
}

#[test]
fn saved_model_predicts_like_the_fitted_one() {
    let dir = small_dir();
    let o = run(dir.path(), &["train", "--config", "c.toml", "--seed", "11", "--out", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut cfg = RunConfig::load(Some(&dir.path().join("c.toml")), &[]).unwrap();
    cfg.seed = 11;
    let (train, test) = commands::prepare(&cfg).unwrap();
    let fitted = fit_learner(&cfg.stack.model_spec(11), &train).unwrap();
    let loaded = ModelArtifact::load(dir.path().join("out/model.json")).unwrap();
    assert_eq!(loaded.seed, 11);
    assert_eq!(loaded.config_hash, cfg.hash().unwrap());

    let first = train.slice_rows(0, 1000);
    for d in [&first, &test] {
        let a = fitted.predict(d.x()).unwrap();
        let b = loaded.predict(d.x()).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn predict_command_matches_artifact() {
    let dir = small_dir();
    let p = dir.path();
    assert!(run(p, &["gen-data", "--config", "c.toml", "--seed", "2", "--out", "out"]).status.success());
    assert!(run(p, &["train", "--config", "out/stackcast.toml", "--out", "out"]).status.success());
    let o = run(p, &["predict", "--model", "out/model.json", "--input", "out/ed_synthetic.csv", "--out", "pred"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let a = ModelArtifact::load(p.join("out/model.json")).unwrap();
    let d = load_csv(p.join("out/ed_synthetic.csv"), &a.input_schema).unwrap();
    let d = build_lagged(&d, &a.lags).unwrap();
    let want = a.predict(d.x()).unwrap();
    let mut r = csv::Reader::from_path(p.join("pred/predictions.csv")).unwrap();
    let got: Vec<f64> = r.records().map(|rec| rec.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(got.len(), want.len());
    assert!(got.iter().zip(&want).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn evaluate_reports_summary_rows() {
    let dir = small_dir();
    let o = run(dir.path(), &["evaluate", "--config", "c.toml", "--repeats", "3", "--out", "out"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/metrics_summary.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "statistic,r,evs,mae,msle,rmse,smape,medae,mape,mda,rse");
    let labels: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["Mean", "STD", "Min", "Max"]);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 11);
    }
}

#[test]
fn unknown_key_exits_2_naming_it() {
    let dir = small_dir();
    std::fs::write(dir.path().join("bad.toml"), "[split]\ntest_fraktion = 0.2\n").unwrap();
    let o = run(dir.path(), &["train", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("test_fraktion"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let o = run(dir.path(), &["train", "--config", "c.toml", "--set", "stack.master.kind=perceptron"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["train", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let dir = small_dir();
    let o = run(dir.path(), &["train", "--config", "c.toml", "--set", "data.path=nowhere.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.csv"));
}

#[test]
fn singular_fit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("a,b,y\n");
    for i in 0..40 {
        let a = (i % 9) as f64;
        csv += &format!("{a},{a},{}\n", 2.0 * a + (i % 4) as f64);
    }
    std::fs::write(dir.path().join("d.csv"), csv).unwrap();
    let cfg = r#"
[data]
path = "d.csv"
columns = [{ name = "a" }, { name = "b" }, { name = "y", role = "target" }]

[lags]
delays = []

[stack.learner]
kind = "linear"
"#;
    std::fs::write(dir.path().join("c.toml"), cfg).unwrap();
    let o = run(dir.path(), &["train", "--config", "c.toml"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
