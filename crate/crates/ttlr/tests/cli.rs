use std::path::Path;
use std::process::{Command, Output};

fn ttlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttlr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ttlr(args);
    assert!(
        out.status.success(),
        "ttlr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn noise_train_predict() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.svm");
    let noisy = dir.path().join("noisy.svm");
    let model = dir.path().join("model.txt");
    let preds = dir.path().join("preds.csv");

    ok(&["noise", "--synthetic", "300", "--kind", "none", "--level", "0", "--out", s(&clean)]);
    ok(&["noise", "--data", s(&clean), "--kind", "outlier", "--level", "0.2", "--seed", "1", "--out", s(&noisy)]);
    let a = std::fs::read_to_string(&clean).unwrap();
    let b = std::fs::read_to_string(&noisy).unwrap();
    assert_eq!(a.lines().count(), 300);
    assert_eq!(b.lines().count(), 300);
    assert_ne!(a, b);

    ok(&["train", "--data", s(&noisy), "--lambda", "1e-3", "--out", s(&model)]);
    assert!(std::fs::read_to_string(&model).unwrap().starts_with("ttlr-model v1\n"));

    let out = ok(&["predict", "--model", s(&model), "--data", s(&clean), "--out", s(&preds)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("accuracy"));
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,label,predicted"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 300);
    let right = rows.iter().filter(|r| r[1] == r[2]).count();
    assert!(right as f64 / 300.0 > 0.9, "{right}");

    let json = ok(&["predict", "--model", s(&model), "--data", s(&clean), "--format", "json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 300);
}

#[test]
fn sweep_is_reproducible_without_timing() {
    let args = [
        "sweep", "--seed", "11", "--repetitions", "1", "--levels", "0,0.2", "--lambda", "1e-3", "--no-timing",
    ];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "method,noise_kind,noise_level,rep,lambda,accuracy,seconds"
    );
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(String::from_utf8_lossy(&a.stderr).contains("ttlr(0.6,1.6)"));
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    let out = dir.path().join("rows.json");
    std::fs::write(
        &config,
        r#"
seed = 2
timing = false
methods = [{ kind = "ttlr", t1 = 0.8, t2 = 1.2 }]
[data]
source = "synthetic"
n_train = 100
n_test = 100
[noise]
kind = "random_flip"
levels = [0.1]
[cv]
folds = 2
lambdas = [1e-4, 1e-1]
"#,
    )
    .unwrap();
    ok(&["sweep", "--config", s(&config), "--format", "json", "--out", s(&out)]);
    let rows = ttlr::experiment::read_json(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].method, "ttlr(0.8,1.2)");
    assert_eq!(rows[0].noise_kind, "random_flip");
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "methods = []\n").unwrap();
    assert!(!ttlr(&["sweep", "--config", s(&config)]).status.success());

    let data = dir.path().join("bad.svm");
    std::fs::write(&data, "1 1:1\n1 2:1 2:1\n").unwrap();
    let out = ttlr(&["train", "--data", s(&data), "--out", s(&dir.path().join("m"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert!(!ttlr(&["train", "--data", s(&data), "--t2", "3", "--out", "m"]).status.success());
    assert!(!ttlr(&["predict", "--model", s(&config), "--data", s(&data)]).status.success());
}

#[test]
fn verify_gradients_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let curv = dir.path().join("curv.csv");
    let bayes = dir.path().join("bayes.csv");
    let out = ok(&[
        "verify", "--suite", "gradients", "--curvature-csv", s(&curv), "--bayes-csv", s(&bayes),
    ]);
    assert!(!String::from_utf8_lossy(&out.stdout).is_empty());
    let c = std::fs::read_to_string(&curv).unwrap();
    assert!(c.starts_with("margin,loss,first_deriv,second_deriv\n"));
    let b = std::fs::read_to_string(&bayes).unwrap();
    assert!(b.starts_with("eta,t1,t2,a_star_numeric,a_star_closed_form,abs_error,sign_consistent\n"));
    assert!(b.lines().count() > 10);
}
