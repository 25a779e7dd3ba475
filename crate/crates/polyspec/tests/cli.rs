use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polyspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyspec"))
        .args(args)
        .env_remove("POLYSPEC_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr holds a JSON error")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn linearize_prints_pencil() {
    let out = polyspec(&["linearize", "--poly", "x*y+y*x"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["m"], 3);
    assert_eq!(doc["gamma1"].as_array().unwrap().len(), 3);
    assert_eq!(doc["config"]["polynomial"], "x*y + y*x");
}

#[test]
fn linearize_rejects_non_selfadjoint_input() {
    let out = polyspec(&["linearize", "--poly", "x*y"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["exit_code"], 1);
}

#[test]
fn semicircle_density_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&[
        "density", "--poly", "x", "--nu", "0:1", "--eps", "1e-9", "--xmin", "-1", "--xmax", "1", "--npoints", "3",
        "--out", path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,density"));
    let mid: Vec<f64> = lines.nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.0);
    assert!((mid[1] - 1.0 / std::f64::consts::PI).abs() < 1e-6);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("density.run.json")).unwrap()).unwrap();
    assert_eq!(sidecar["command"], "density");
    assert_eq!(sidecar["config"]["npoints"], 3);
    assert_eq!(sidecar["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn unknown_flag_is_a_usage_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    let out = polyspec(&["density", "--poly", "x", "--nu", "0:1", "--eps", "0.1", "--bogus", "--out", path(&target)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["density", "--poly", "x", "--nu", "0:1", "--eps", "0.1", "--npoints", "3", "--out", path(dir.path())];
    assert!(polyspec(&args).status.success());
    fs::write(dir.path().join("density.csv"), "sentinel").unwrap();
    let out = polyspec(&args);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "usage");
    assert_eq!(fs::read_to_string(dir.path().join("density.csv")).unwrap(), "sentinel");

    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(polyspec(&forced).status.success());
    assert!(fs::read_to_string(dir.path().join("density.csv")).unwrap().starts_with("x,density"));
}

#[test]
fn numerical_failure_exits_with_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("k");
    let out = polyspec(&["kernel", "--poly", "x", "--nu", "0:1", "--z", "0.1+1e-7i", "--out", path(&target)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 2);
    assert_eq!(err["error"], "derivative_unreliable");
    assert!(!target.exists());
}

#[test]
fn kernel_matches_gue_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["kernel", "--poly", "x", "--nu", "0:1", "--z", "2i", "--out", path(dir.path())]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "z1_re,z1_im,z2_re,z2_im,gamma_re,gamma_im,Gamma_re,Gamma_im,rho_sigma2T,fd_discrepancy"
    );
    assert_eq!(lines.len(), 3);
    // Γ(z, z̄) for the semicircle at z = 2i, where g(z) = −i(√2 − 1):
    // g'(z) g'(z̄) / (1 − g(z) g(z̄))² with g'(z) = a/(1 + a), a = |g(z)|².
    let a = (2f64.sqrt() - 1.0).powi(2);
    let dg = a / (1.0 + a);
    let exact = dg * dg / ((1.0 - a) * (1.0 - a));
    let cells: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(cells[3], -2.0);
    assert!((cells[6] - exact).abs() < 1e-7 * exact, "{} vs {}", cells[6], exact);
}

const SIM_CONFIG: &str = r#"{
  "polynomial": "x*y+y*x",
  "preset": "gaussian-complex",
  "sigma2": 1.0,
  "nu_atoms": [[-1, 0.5], [1, 0.5]],
  "N": 40,
  "trials": 60,
  "seed": 11,
  "z_grid": [[0, 2], "1+1.5i"],
  "histogram_bins": 16
}"#;

#[test]
fn simulation_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    fs::write(&config, SIM_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(polyspec(&["--threads", "1", "simulate", "--config", path(&config), "--out", path(&a)]).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_polyspec"))
        .args(["simulate", "--config", path(&config), "--out", path(&b)])
        .env("POLYSPEC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    for name in ["traces.csv", "covariance.csv", "histogram.csv", "xi.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{}", name);
    }
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("simulate.run.json")).unwrap()).unwrap();
    assert_eq!(sidecar["threads"], 2);
    assert_eq!(sidecar["config"]["seed"], 11);
    assert_eq!(sidecar["config"]["theta"], 0.0);
}

#[test]
fn simulation_config_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    fs::write(&config, SIM_CONFIG.replace("\"seed\": 11", "\"seed\": 11, \"extra\": 1")).unwrap();
    let out = polyspec(&["simulate", "--config", path(&config), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(&config, SIM_CONFIG.replace("\"seed\": 11", "\"seed\": 11, \"theta\": [0, 0.5]")).unwrap();
    let out = polyspec(&["simulate", "--config", path(&config), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("traces.csv").exists());
}

#[test]
fn compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    fs::write(&config, SIM_CONFIG).unwrap();
    let sim = dir.path().join("sim");
    let kernel = dir.path().join("kernel");
    let report = dir.path().join("report");
    assert!(polyspec(&["simulate", "--config", path(&config), "--out", path(&sim)]).status.success());
    assert!(polyspec(&[
        "kernel", "--poly", "x*y+y*x", "--nu", "-1:0.5,1:0.5", "--z", "2i,1+1.5i", "--out", path(&kernel)
    ])
    .status
    .success());
    let out = polyspec(&[
        "compare", "--sim", path(&sim), "--kernel", path(&kernel.join("kernel.csv")), "--out", path(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rows"], 6);
    let text = fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(text.starts_with("i,j,kind,z1_re,z1_im,z2_re,z2_im,cov_re,cov_im,Gamma_re,Gamma_im,se,z_score,rel_error,within"));
    assert_eq!(text.lines().count(), 7);
    assert!(report.join("compare.run.json").exists());

    // a kernel table on a different grid cannot be matched
    let other = dir.path().join("other");
    assert!(polyspec(&["kernel", "--poly", "x*y+y*x", "--nu", "-1:0.5,1:0.5", "--z", "3i", "--out", path(&other)])
        .status
        .success());
    let out = polyspec(&[
        "compare", "--sim", path(&sim), "--kernel", path(&other.join("kernel.csv")), "--out", path(&other),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "grid_mismatch");
}

#[test]
fn selftest_passes_and_records_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["selftest", "--out", path(dir.path())]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().count() >= 5);
    assert!(!stdout.contains("FAIL"));
    let text = fs::read_to_string(dir.path().join("selftest.csv")).unwrap();
    assert!(text.starts_with("check,metric,value,tolerance,pass"));
    assert!(dir.path().join("selftest.run.json").exists());
}
