use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_broyden-lab"));
    cmd.env_remove("BROYDEN_LAB_SEED");
    cmd
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const QUAD_BFGS: &str = r#"{
    "name": "quad",
    "instance": {"kind": "quadratic", "n": 6, "spectrum": {"log_spaced": [1, 50]}, "seed": 4},
    "method": "bfgs",
    "x0": {"random_ball": {"radius": 2.0}}
}"#;

#[test]
fn run_writes_three_files_and_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", QUAD_BFGS);
    let out_dir = tmp.path().join("out");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = out_dir.join("quad");
    for f in ["trace.csv", "envelopes.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,lambda,g,r,xi,nu,v,psi,eig_min,eig_max,tau\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["first_violation"], serde_json::Value::Null);
    assert!(summary["K0"].as_u64().unwrap() >= 1);
    assert_eq!(summary["instance_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", QUAD_BFGS);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = tmp.path().join(run);
        let out = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
        assert_eq!(code(&out), 0);
        let dir = out_dir.join("quad");
        csvs.push((
            std::fs::read(dir.join("trace.csv")).unwrap(),
            std::fs::read(dir.join("envelopes.csv")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn seed_from_environment_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", QUAD_BFGS);
    let read_trace = |env: Option<&str>, sub: &str| {
        let out_dir = tmp.path().join(sub);
        let mut cmd = bin();
        if let Some(s) = env {
            cmd.env("BROYDEN_LAB_SEED", s);
        }
        let out = cmd.arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
        assert_eq!(code(&out), 0);
        std::fs::read_to_string(out_dir.join("quad/trace.csv")).unwrap()
    };
    let plain = read_trace(None, "plain");
    let same = read_trace(Some("4"), "same");
    let other = read_trace(Some("5"), "other");
    assert_eq!(plain, same);
    assert_ne!(plain, other);

    let out = bin()
        .env("BROYDEN_LAB_SEED", "not-a-number")
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn forced_violation_exits_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{
            "name": "forced",
            "instance": {"kind": "quadratic", "n": 3, "spectrum": [1, 1.5, 2], "seed": 0},
            "method": "bfgs",
            "x0": {"coords": [1, 1, 1]},
            "envelopes": [{"name": "quad_linear", "mu_scale": 2}]
        }"#,
    );
    let out_dir = tmp.path().join("out");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 1);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("forced/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
    assert_eq!(summary["first_violation_envelope"], "quad_linear_mu_x2.0");
    let env = std::fs::read_to_string(out_dir.join("forced/envelopes.csv")).unwrap();
    assert!(env.lines().next().unwrap().contains("bound_quad_linear_mu_x2.0"));
}

#[test]
fn malformed_configs_exit_two_without_output() {
    let tmp = TempDir::new().unwrap();
    let bodies = [
        r#"{"instance": {"kind": "quadratic", "n": 2, "spectrum": [-1, 2]}, "method": "bfgs", "x0": {"coords": [0, 0]}}"#,
        r#"{"instance": {"kind": "log_sum_exp", "n": 2, "m": 3, "mu": -0.1}, "method": "bfgs", "x0": {"coords": [0, 0]}}"#,
        r#"{"instance": {"kind": "quadratic", "n": 2, "spectrum": [1, 2]}, "method": "bfgs", "x0": {"coords": [0, 0]}, "envelopes": ["nope"]}"#,
        r#"{"instance": {"kind": "quadratic", "n": 2, "spectrum": [1, 2]}, "method": "bfgs", "x0": {"random_ball": {"radius": 0}}}"#,
        r#"{"instance": {"kind": "quadratic", "n": 2, "spectrum": [1, 2]}, "method": "bfgs", "x0": {"coords": [0]}}"#,
        r#"{"instance": {"kind": "quadratic", "n": 2, "spectrum": [1, 2]}, "method": "bfgs", "x0": {"coords": [0, 0]}, "typo": 1}"#,
        r#"[]"#,
        r#"not json"#,
    ];
    for (i, body) in bodies.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("c{i}.json"), body);
        let out_dir = tmp.path().join(format!("out{i}"));
        let out = bin().arg("run").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
        assert_eq!(code(&out), 2, "config {i}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out_dir.exists(), "config {i} wrote output");
    }
    let out = bin().arg("run").arg(tmp.path().join("missing.json")).output().unwrap();
    assert_eq!(code(&out), 2);
    let cfg = write(tmp.path(), "ok.json", QUAD_BFGS);
    let out = bin().arg("run").arg(&cfg).arg("--jobs").arg("0").output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn suite_runs_concurrently_with_unique_dirs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "suite.json",
        r#"[
            {"instance": {"kind": "quadratic", "n": 4, "spectrum": {"log_spaced": [1, 10]}, "seed": 1},
             "method": "dfp", "x0": {"coords": [0, 0, 0, 0]}},
            {"instance": {"kind": "quadratic", "n": 4, "spectrum": {"log_spaced": [1, 10]}, "seed": 1},
             "method": {"constant": 0.5}, "x0": {"coords": [0, 0, 0, 0]}},
            {"instance": {"kind": "log_sum_exp", "n": 4, "m": 9, "mu": 0.2, "seed": 3},
             "method": "bfgs", "x0": {"region_fraction": 0.5}, "solver": {"grad_tol": 1e-11}}
        ]"#,
    );
    let out_dir = tmp.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--jobs")
        .arg("3")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    for i in 0..3 {
        assert!(out_dir.join(format!("experiment_{i:03}/summary.json")).is_file());
    }
}

#[test]
fn verify_exit_codes() {
    let out = bin().args(["verify", "--trials", "200", "--seed", "3"]).output().unwrap();
    assert_eq!(code(&out), 0);
    let again = bin().args(["verify", "--trials", "200", "--seed", "3"]).output().unwrap();
    assert_eq!(out.stdout, again.stdout);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["inverse_identity", "det_ratio", "eigen_bracket", "progress_v", "progress_psi", "scalar_gap"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert_eq!(code(&bin().args(["verify", "--trials", "0"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["verify", "--n-max", "0"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["verify", "--bogus"]).output().unwrap()), 2);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let tmp = TempDir::new().unwrap();
    let grid = write(
        tmp.path(),
        "grid.json",
        r#"{"n": [2, 4], "l_over_mu": [10, 100], "methods": ["bfgs", "dfp"], "seed": 1}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = bin().arg("sweep").arg(&grid).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    assert!(lines[0].starts_with("n,L_over_mu,method,iters_to_1e-10,K0_new,K0_prev,"));
    for row in &lines[1..] {
        assert!(row.ends_with(",true,true"), "{row}");
    }
    let empty = write(tmp.path(), "empty.json", r#"{"n": [], "l_over_mu": [10]}"#);
    assert_eq!(code(&bin().arg("sweep").arg(&empty).output().unwrap()), 2);
}
