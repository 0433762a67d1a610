use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = "id = \"cli\"\nn_sensors = 8\nn_freqs = 2\nn_snapshots = 1\nmc = 2\nseed = 5\n\
                        [sources]\nkind = \"fixed\"\nthetas_deg = [60.0, 100.0]\n";

fn mfdoa(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfdoa")).args(args).arg("--config").arg(config).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "n_sensors = 4\nn_freqs = 2\nmc = 0\n[sources]\nkind = \"spread\"\nk = 1\n");
    let out = mfdoa(&["sweep"], &cfg);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mfdoa(&["sweep"], &dir.path().join("missing.toml"));
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(dir.path(), "ok.toml", SCENARIO);
    let out = mfdoa(&["sweep", "--estimator", "nope"], &cfg);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unconverged_solve_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("max_iter = 1\n{SCENARIO}"));
    for cmd in ["solve", "extract", "nullspec"] {
        let out = mfdoa(&[cmd], &cfg);
        assert_eq!(out.status.code(), Some(3), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn simulate_then_solve_and_extract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    let meas = dir.path().join("y.json");
    let out = mfdoa(&["simulate", "--out", meas.to_str().unwrap()], &cfg);
    assert!(out.status.success());
    let y: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meas).unwrap()).unwrap();
    assert!(y.get("slices").is_some());

    let dump = dir.path().join("problem.txt");
    let out = mfdoa(&["solve", "--input", meas.to_str().unwrap(), "--dump-problem", dump.to_str().unwrap()], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "optimal");
    assert!(report["objective"].as_f64().unwrap() > 0.0);
    assert!(!std::fs::read_to_string(&dump).unwrap().is_empty());

    let from_file = mfdoa(&["extract", "--input", meas.to_str().unwrap()], &cfg);
    let direct = mfdoa(&["extract"], &cfg);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, direct.stdout);
    let text = String::from_utf8(direct.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta_deg,w,power,null_spectrum"));
    let mut thetas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    thetas.sort_by(f64::total_cmp);
    assert_eq!(thetas.len(), 2);
    assert!((thetas[0] - 60.0).abs() < 0.05 && (thetas[1] - 100.0).abs() < 0.05, "{thetas:?}");
}

#[test]
fn nullspec_and_sweep_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SCENARIO);
    let out = mfdoa(&["nullspec", "--grid", "64"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 65);
    assert!(text.lines().skip(1).all(|l| l.split(',').last().unwrap().parse::<f64>().unwrap() >= 0.0));

    let out = mfdoa(&["sweep", "--format", "json", "--mc", "1"], &cfg);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["missing_baselines"], serde_json::json!(["sbl", "crb"]));
}
