use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-sphere"))
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).arg("--quiet").output().unwrap();
    out.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn summary(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["tau", "action", "lower_bound", "n_clusters", "dim_estimate", "el_gap", "termination"]
    );
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn verify_kernel_passes_and_detects_faults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    assert_eq!(run(&["verify-kernel", "--out", out.to_str().unwrap()]), 0);
    assert_eq!(json(&out.join("verify_kernel.json"))["passed"], true);

    let bad = dir.path().join("bad");
    assert_eq!(run(&["verify-kernel", "--inject-fault", "nu2", "--out", bad.to_str().unwrap()]), 4);
    let doc = json(&bad.join("verify_kernel.json"));
    assert_eq!(doc["passed"], false);
    assert_eq!(doc["fault"], "nu2");

    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "[verify]\ntaus = []\n").unwrap();
    assert_eq!(run(&["verify-kernel", "--config", cfg.to_str().unwrap(), "--out", bad.to_str().unwrap()]), 2);
}

#[test]
fn optimize_beats_octahedron_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["optimize", "--tau", "1.6", "--seed", "1", "--out", a.to_str().unwrap()]), 0);
    let out = bin()
        .args(["optimize", "--tau", "1.6", "--seed", "1", "--quiet", "--out", b.to_str().unwrap()])
        .env("CAUSAL_SPHERE_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(out.code(), Some(0));
    let report = json(&a.join("report.json"));
    assert!(report["action"].as_f64().unwrap() <= 1.0 / 6.0 + 1e-4);
    for f in ["measure.json", "report.json", "trace.csv", "diagnostics.json", "audit.csv", "caps.csv", "box_counts.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,action,el_gap,n_points,n_clusters\n"));
    assert!(fs::read_to_string(a.join("run.log")).unwrap().contains("wall_time_secs"));
}

#[test]
fn invalid_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(run(&["optimize", "--tau", "0.5", "--out", out.to_str().unwrap()]), 2);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[optimizer]\ntua = 2.0\n").unwrap();
    assert_eq!(run(&["optimize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert_eq!(run(&["optimize", "--restarts", "0", "--out", out.to_str().unwrap()]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
}

#[test]
fn sweep_in_timelike_regime_meets_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(run(&["sweep", "--taus", "1.2,1.3,1.2", "--out", out.to_str().unwrap()]), 0);
    let rows = summary(&out.join("summary.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let action: f64 = r[1].parse().unwrap();
        let lb: f64 = r[2].parse().unwrap();
        assert!(action - lb <= 1e-3, "{r:?}");
    }
    assert!(out.join("tau_1.2/measure.json").exists());
    assert!(out.join("tau_1.3/report.json").exists());
}

#[test]
fn sweep_in_singular_regime_has_stable_cluster_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, "[sweep]\ntaus = [1.6, 2.0]\n").unwrap();
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]), 0);
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]), 0);
    let ra = summary(&a.join("summary.csv"));
    assert_eq!(ra, summary(&b.join("summary.csv")));
    for r in &ra {
        let n: usize = r[3].parse().unwrap();
        assert!(n > 0 && n < 100);
    }
}

#[test]
fn diagnose_files() {
    let dir = tempfile::tempdir().unwrap();
    let measure = dir.path().join("octahedron.json");
    fs::write(
        &measure,
        r#"{"format_version": 1, "tau": 2.0,
            "points": [[1,0,0],[-1,0,0],[0,1,0],[0,-1,0],[0,0,1],[0,0,-1]],
            "weights": [0.16666666666666666,0.16666666666666666,0.16666666666666666,
                        0.16666666666666666,0.16666666666666666,0.16666666666666666]}"#,
    )
    .unwrap();
    let out = dir.path().join("d");
    // Not a minimizer at τ=2: the Euler–Lagrange certificate fails.
    assert_eq!(run(&["diagnose", measure.to_str().unwrap(), "--out", out.to_str().unwrap()]), 4);
    let d = json(&out.join("diagnostics.json"));
    assert!(d["el"]["spread_on_support"].as_f64().unwrap().abs() < 1e-15);
    assert!((d["gram_min_eigenvalue"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(d["gram_pass"], true);
    let audit = fs::read_to_string(out.join("audit.csv")).unwrap();
    assert_eq!(audit.lines().count(), 7);

    assert_eq!(run(&["diagnose", measure.to_str().unwrap(), "--tau", "2.5", "--out", out.to_str().unwrap()]), 2);
    // Below √2 the octahedron attains the lower bound ν₀, so it is a minimizer.
    assert_eq!(
        run(&["diagnose", measure.to_str().unwrap(), "--override-tau", "1.2", "--out", out.to_str().unwrap()]),
        0
    );
    assert_eq!(json(&out.join("diagnostics.json"))["tau"], 1.2);

    let truncated = dir.path().join("truncated.json");
    let text = fs::read_to_string(&measure).unwrap();
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(run(&["diagnose", truncated.to_str().unwrap(), "--out", out.to_str().unwrap()]), 5);
    assert_eq!(run(&["diagnose", "/nonexistent/measure.json", "--out", out.to_str().unwrap()]), 5);
}

#[test]
fn diagnose_accepts_optimizer_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["optimize", "--tau", "2.6", "--out", out.to_str().unwrap()]), 0);
    let d = dir.path().join("d");
    let m = out.join("measure.json");
    assert_eq!(run(&["diagnose", m.to_str().unwrap(), "--out", d.to_str().unwrap()]), 0);
    let doc = json(&d.join("diagnostics.json"));
    assert_eq!(doc["audit"]["verdict"]["applicable"], true);
    assert_eq!(doc["passed"], true);
}
