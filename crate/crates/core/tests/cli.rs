use std::path::{Path, PathBuf};
use std::process::Command;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn gafsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gafsim"))
        .args(args)
        .env_remove("GAFSIM_SEED")
        .output()
        .unwrap()
}

fn mean_variance(region_half: f64) -> String {
    format!(
        r#"{{
  "experiment": "mean_variance",
  "weight": {{"kind": "radial_power", "alpha": 2.0}},
  "l_grid": [5, 8],
  "trials": 12,
  "region": {{"x_min": -{r}, "x_max": {r}, "y_min": -{r}, "y_max": {r}}},
  "psi": {{"kind": "polynomial_bump", "center": [0, 0], "radius": 0.5, "height": 1}},
  "seeds": {{"master": 99}}
}}"#,
        r = region_half
    )
}

#[test]
fn run_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "mv.json", &mean_variance(0.6));
    let cfg = cfg.to_str().unwrap();
    let mut reports = Vec::new();
    for (i, extra) in [vec!["--threads", "1"], vec!["--threads", "3"], vec!["--sequential"]].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let mut args = vec!["run", cfg, "--out", out.to_str().unwrap()];
        args.extend(extra.iter().copied());
        let o = gafsim(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(out.join("mean_variance.json")).unwrap());
        let csv = std::fs::read_to_string(out.join("mean_variance.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
    let v: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert!(v["rows"][0]["theory_mean"].is_number());
    assert!(v["rows"][0]["theory_var"].is_number());
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["seeds"]["master"], 99);
}

#[test]
fn seed_override_changes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "mv.json", &mean_variance(0.6));
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_gafsim"))
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("GAFSIM_SEED", "5")
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("mean_variance.json")).unwrap()).unwrap();
    assert_eq!(v["seeds"]["master"], 5);
}

#[test]
fn psi_outside_region_is_a_region_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &mean_variance(0.4));
    let o = gafsim(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`region`"), "{err}");
}

#[test]
fn validate_reports_ok_refusal_and_budget_warning() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", &mean_variance(0.6));
    let o = gafsim(&["validate", ok.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success());
    assert!(text.starts_with("ok (estimated runtime ~"), "{text}");

    let quartic = mean_variance(0.6)
        .replace("mean_variance", "normality")
        .replace("\"alpha\": 2.0", "\"alpha\": 4.0");
    let p = write(dir.path(), "quartic.json", &quartic);
    let o = gafsim(&["validate", p.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(!o.status.success());
    assert!(text.contains("not locally flat"), "{text}");

    let hole = mean_variance(0.6)
        .replace("mean_variance", "hole")
        .replace("[5, 8]", "[10, 40]")
        .replace("\"seeds\"", "\"disc\": {\"center\": [0, 0], \"radius\": 0.5}, \"seeds\"");
    let p = write(dir.path(), "hole.json", &hole);
    let o = gafsim(&["validate", p.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("warning: insufficient trial budget"), "{text}");
}

#[test]
fn diag_kernel_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.json", &mean_variance(0.6));
    let o = gafsim(&["diag", "kernel", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("mean_variance_kernel.json")).unwrap()).unwrap();
    assert_eq!(v["experiment"], "kernel_diagnostics");
    assert!(v["diagnostics"]["diag_band_min"].as_f64().unwrap() > 0.0);
}
