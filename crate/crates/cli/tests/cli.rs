use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn manifest(dir: &Path, members: usize) -> PathBuf {
    let text = format!(
        r#"
seed = 7
output_dir = "{out}"
strategies = ["EFL", "UFL"]

[split]
n_train = 150
n_test = 50

[federation]
strategy = "EFL"
budget = 120
lambda = 0.05

[convergence]
window = 20
tolerance = 0.05

[data]
kind = "synthetic"
members_per_population = {members}
n_records = 200

[[data.populations]]
name = "city"
true_params = [0.5, 1.0, -1.0]
input_ranges = [[0.0, 1.0], [-1.0, 1.0]]
noise_std = 0.01

[[data.populations]]
name = "highway"
true_params = [-0.5, 2.0, 0.5]
input_ranges = [[0.0, 1.0], [-1.0, 1.0]]
noise_std = 0.01
"#,
        out = dir.join("out").display()
    );
    let path = dir.join("manifest.toml");
    fs::write(&path, text).unwrap();
    path
}

fn evfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evfl")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 2);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&evfl(&["synth", "--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    }
    let (fa, fb) = (csv_files(&a.join("fleet")), csv_files(&b.join("fleet")));
    assert_eq!(fa.len(), 4);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    assert_eq!(fs::read(a.join("ground_truth.json")).unwrap(), fs::read(b.join("ground_truth.json")).unwrap());

    let c = dir.path().join("c");
    ok(&evfl(&["synth", "--manifest", m.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "8"]));
    assert_ne!(fs::read(&fa[0]).unwrap(), fs::read(&csv_files(&c.join("fleet"))[0]).unwrap());
}

#[test]
fn synth_writes_one_file_per_member() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 13);
    ok(&evfl(&["synth", "--manifest", m.to_str().unwrap()]));
    let out = dir.path().join("out");
    assert_eq!(csv_files(&out.join("fleet")).len(), 26);
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn zero_members_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 0);
    let out = evfl(&["synth", "--manifest", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("members_per_population"));
}

#[test]
fn missing_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nope.toml");
    let out = evfl(&["train", "--manifest", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn unknown_strategy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 1);
    let out = evfl(&["train", "--manifest", m.to_str().unwrap(), "--strategy", "XFL"]);
    assert!(!out.status.success());
}

#[test]
fn compare_prints_rows_and_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 2);
    let stdout = ok(&evfl(&["compare", "--manifest", m.to_str().unwrap()]));
    assert!(stdout.lines().any(|l| l.starts_with("E-FL") && l.contains("sqrt MSE")));
    assert!(stdout.lines().any(|l| l.starts_with("U-FL") && l.contains("sqrt MSE")));
    assert!(stdout.contains("E-FL vs U-FL") && stdout.contains("reduction %"));

    let out = dir.path().join("out");
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(table.starts_with("method,criteria,"));
    assert!(table.lines().next().unwrap().ends_with("averaged result"));
    for s in ["E-FL", "U-FL"] {
        assert!(out.join(s).join("metrics.csv").exists());
        assert!(out.join(s).join("models.csv").exists());
    }
    // the manifest copy reproduces the run
    let copy = out.join("manifest.toml");
    let again = dir.path().join("again");
    ok(&evfl(&["compare", "--manifest", copy.to_str().unwrap(), "--out", again.to_str().unwrap()]));
    assert_eq!(
        fs::read(out.join("comparison.csv")).unwrap(),
        fs::read(again.join("comparison.csv")).unwrap()
    );
}

#[test]
fn strategy_flag_replaces_manifest_list() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 1);
    let stdout = ok(&evfl(&["train", "--manifest", m.to_str().unwrap(), "--strategy", "S-FL"]));
    assert!(stdout.contains("S-FL"));
    let out = dir.path().join("out");
    assert!(out.join("S-FL").join("models.csv").exists());
    assert!(!out.join("E-FL").exists());
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 2);
    let m = m.to_str().unwrap();
    ok(&evfl(&["train", "--manifest", m]));
    let stdout = ok(&evfl(&["evaluate", "--manifest", m]));
    let mut lines = stdout.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("method,") && header.ends_with("averaged result"));
    assert_eq!(header.split(',').count(), 1 + 4 + 1);
    assert_eq!(lines.count(), 2);
    assert!(dir.path().join("out").join("evaluation.csv").exists());
}

#[test]
fn evaluate_without_models_fails() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 1);
    let out = evfl(&["evaluate", "--manifest", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `train` first"));
}

#[test]
fn evaluate_names_member_with_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), 1);
    let m = m.to_str().unwrap();
    ok(&evfl(&["train", "--manifest", m, "--strategy", "EFL"]));
    let path = dir.path().join("out").join("E-FL").join("models.csv");
    let text = fs::read_to_string(&path).unwrap();
    let first_member = text.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    // drop the last parameter column
    let truncated: String = text
        .lines()
        .map(|l| format!("{}\n", &l[..l.rfind(',').unwrap()]))
        .collect();
    fs::write(&path, truncated).unwrap();

    let out = evfl(&["evaluate", "--manifest", m, "--strategy", "EFL"]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("`{first_member}`")), "{stderr}");
}
