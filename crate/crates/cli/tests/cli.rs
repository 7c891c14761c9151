use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
mu = 1.0
seed = 3

[grid]
extents = [1.0]
points = [31]

[motility]
family = "exponential"
alpha = 0.1

[u0]
kind = "random-smooth"
amplitude = 0.3

[scheme]
t_end = 0.5
output_stride = 10

[diagnostics]
eps = 0.5
constant_samples = 8
audit_points = 5000
gap_monotone_from = 0.0
"#;

fn chemolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemolab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn run_in(cmd: &str, cfg: &str, out: &Path) -> Output {
    chemolab(&[cmd, "--config", cfg, "--out", out.to_str().unwrap()])
}

#[test]
fn unknown_key_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL.replace("alpha = 0.1", "alpha = 0.1\nbeta = 2.0"));
    let o = run_in("simulate", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    let msg = text(&o);
    assert!(msg.contains("line 12") && msg.contains("beta"), "{msg}");
}

#[test]
fn missing_config_exits_2() {
    let o = chemolab(&["verify", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("/nonexistent/run.toml"));
}

#[test]
fn bad_flag_exits_2() {
    assert_eq!(chemolab(&["simulate", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn simulate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_in("simulate", &cfg, out);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "scalars.csv") && names.iter().any(|n| n == "plot.py"));
    for n in names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")) {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_flag_changes_random_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_in("simulate", &cfg, &a).status.success());
    let o = chemolab(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success(), "{}", text(&o));
    assert_ne!(fs::read(a.join("u_00000.csv")).unwrap(), fs::read(b.join("u_00000.csv")).unwrap());
    assert!(fs::read_to_string(b.join("config.toml")).unwrap().contains("seed = 99"));
}

#[test]
fn verify_small_config_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let out = dir.path().join("out");
    let o = run_in("verify", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("verdict: PASS"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn verify_exits_1_on_gated_failure() {
    let dir = tempfile::tempdir().unwrap();
    let strict = SMALL.replace("eps = 0.5", "eps = 1e-9");
    let cfg = write_config(dir.path(), "run.toml", &strict);
    let out = dir.path().join("out");
    let o = run_in("verify", &cfg, &out);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(out.join("report.txt").exists());
}

#[test]
fn verify_ac1_preset_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let preset = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ac1.toml");
    let o = chemolab(&["verify", "--config", preset, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}

#[test]
fn envelope_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    for source in ["measured", "closed-bound", "zero"] {
        let cfg = write_config(
            dir.path(),
            "env.toml",
            &format!("{SMALL}\n[envelope]\nsource = \"{source}\"\ndt = 1e-3\n"),
        );
        let out = dir.path().join(source);
        let o = run_in("envelope", &cfg, &out);
        assert_eq!(o.status.code(), Some(0), "{source}: {}", text(&o));
        let csv = fs::read_to_string(out.join("envelope.csv")).unwrap();
        assert!(csv.lines().count() > 100, "{source}");
        let bounded = !csv.lines().nth(1).unwrap().ends_with(",,");
        assert_eq!(bounded, source == "closed-bound", "{source}");
    }
}

#[test]
fn sweep_gates_low_mu() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", &format!("{SMALL}\n[sweep]\nmu = [0.1, 0.5, 1.0]\n"));
    let out = dir.path().join("out");
    let o = chemolab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let labels = ["mu=0.1_alpha=0.1", "mu=0.5_alpha=0.1", "mu=1_alpha=0.1"];
    for l in labels {
        assert!(out.join(l).join("report.json").exists(), "{l}");
    }
    let low: Value = serde_json::from_str(&fs::read_to_string(out.join(labels[0]).join("report.json")).unwrap()).unwrap();
    for check in low["checks"].as_array().unwrap() {
        let name = check["name"].as_str().unwrap();
        if ["convergence", "decay", "gap-monotone", "rectangle-closed-bound", "lp-bound"].contains(&name) {
            assert_eq!(check["status"], "informational", "{name}");
        }
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let audits: Vec<bool> = summary.as_array().unwrap().iter().map(|r| r["audit_passed"].as_bool().unwrap()).collect();
    assert_eq!(audits, [false, true, true]);
}

#[test]
fn sweep_without_section_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    assert_eq!(run_in("sweep", &cfg, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn audit_reports_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(dir.path(), "ok.toml", SMALL);
    let o = run_in("audit", &ok, &dir.path().join("ok"));
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let a: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ok/audit.json")).unwrap()).unwrap();
    let mu0 = a["mu0_hat"].as_f64().unwrap();
    assert!((mu0 - 0.2).abs() < 1e-3, "{mu0}");

    let low = write_config(dir.path(), "low.toml", &SMALL.replace("mu = 1.0", "mu = 0.1"));
    assert_eq!(run_in("audit", &low, &dir.path().join("low")).status.code(), Some(1));
}

#[test]
fn constants_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let o = run_in("constants", &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let k: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    let c = k["c_omega_hat"].as_f64().unwrap();
    assert!(c > 0.0 && c < 1.0);
    assert!(k["c_p"]["4"].as_f64().unwrap() > 0.0);
}
