use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sphereflow(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphereflow"))
        .args(args)
        .env("SPHEREFLOW_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = match fs::read_dir(root) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    dirs
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().ok()).collect())
        .collect();
    (header, rows)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

const CIRCLE_H: &str = r#"{
  "schema_version": 1,
  "run": {"curve_flow": {
    "speed": {"family": "H", "n": 1},
    "initial": {"kind": "circle", "radius": 1.2},
    "resolution": 64,
    "cadence": 20
  }}
}"#;

/// A circle about the pole keeps `cos r = cos r0 e^t` under curve
/// shortening, and its length is `2 pi sin r`.
#[test]
fn circle_config_collapses_cleanly_and_tracks_the_ode() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let cfg = write_config(&tmp, "circle.json", CIRCLE_H);
    let out = sphereflow(&root, &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dirs = run_dirs(&root);
    assert_eq!(dirs.len(), 1);
    let dir = &dirs[0];
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-curve_flow"));
    let m = manifest(dir);
    let stop = m["stop_reason"].as_str().unwrap();
    assert!(stop == "pole_margin" || stop == "collapse", "{stop}");
    assert!(dir.join("snapshots/initial.csv").exists());
    assert!(dir.join("snapshots/final.csv").exists());

    let (header, rows) = read_csv(&dir.join("series.csv"));
    assert_eq!(
        header,
        ["t", "L", "total_kappa", "q", "area", "gauss_bonnet_residual", "kappa_min", "kappa_max", "rho_c1_norm", "harnack_min"]
    );
    assert!(rows.len() > 10);
    let c0 = 1.2f64.cos();
    let mut worst = 0.0f64;
    for row in &rows {
        let (t, l) = (row[0].unwrap(), row[1].unwrap());
        let r_flow = (l / TAU).asin();
        let r_ode = (c0 * t.exp()).acos();
        worst = worst.max((r_flow - r_ode).abs());
    }
    assert!(worst < 1e-6, "{worst}");

    // The ODE subcommand on the same radius follows the same law.
    let root2 = tmp.path().join("ode");
    let out = sphereflow(&root2, &["sphere-ode", "--speed", "H", "--r0", "1.2", "--tol", "1e-11"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = stdout_json(&out);
    assert_eq!(summary["stop_reason"], "collapse");
    let (header, rows) = read_csv(&run_dirs(&root2)[0].join("series.csv"));
    assert_eq!(header, ["t", "r", "F_value"]);
    for row in &rows {
        let (t, r, f) = (row[0].unwrap(), row[1].unwrap(), row[2].unwrap());
        assert!((r.cos() - c0 * t.exp()).abs() < 1e-8);
        assert!((f - 1.0 / r.tan()).abs() < 1e-12 * f.max(1.0));
    }
    let tc = summary["collapse_time"].as_f64().unwrap();
    assert!((tc + c0.ln()).abs() < 1e-8);
}

#[test]
fn malformed_configs_exit_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let cases = [
        (r#"{"schema_version": 1, "run": {"curve_flow": {"speed": {"family": "H", "n": 1}, "initial": {"kind": "circle", "radius": 1.0}, "stops": {"max_kapa": 3}}}}"#, "run.curve_flow.stops"),
        (r#"{"schema_version": 1, "run": {"curve_flow": {"speed": {"family": "H", "n": 1}, "initial": {"kind": "circle", "radius": 1.0}}}, "colour": 1}"#, "colour"),
        (r#"{"schema_version": 1, "run": {"curve_flow": {"speed": {"family": "H", "n": 1}, "initial": {"kind": "circle", "radius": "big"}}}}"#, "run.curve_flow.initial"),
        (r#"{"schema_version": 1, "run": {"sphere_ode": {"speed": {"family": "H", "n": 1}, "r0": 3.0}}}"#, "run.sphere_ode.r0"),
        (r#"{"schema_version": 1, "run": "#, "EOF"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_config(&tmp, &format!("bad{i}.json"), text);
        let out = sphereflow(&root, &["run", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
    let out = sphereflow(&root, &["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = sphereflow(&root, &["curve-flow", "--initial", r#"{"kind": "square"}"#]);
    assert_eq!(out.status.code(), Some(2));
    let out = sphereflow(&root, &["sphere-ode", "--speed", "H^p", "--r0", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = sphereflow(&root, &["verify", "--only", "c99"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!root.exists());
}

#[test]
fn blowup_and_failures_exit_1_with_a_manifest() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("blowup");
    let cfg = write_config(
        &tmp,
        "blowup.json",
        r#"{"schema_version": 1, "run": {"curve_flow": {
            "speed": {"family": "H", "n": 1},
            "initial": {"kind": "perturbed_circle", "radius": 1.0, "amplitude": 0.05, "mode": 5},
            "resolution": 64, "time_step": {"fixed": 1.0}}}}"#,
    );
    let out = sphereflow(&root, &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(manifest(&run_dirs(&root)[0])["stop_reason"], "blowup");

    // The ellipse flow needs a convex start.
    let root = tmp.path().join("failed");
    let out = sphereflow(
        &root,
        &[
            "curve-flow",
            "--flow",
            "ellipse-flow",
            "--initial",
            r#"{"kind": "perturbed_circle", "radius": 1.45, "amplitude": 0.1, "mode": 4}"#,
            "--resolution",
            "64",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&run_dirs(&root)[0]);
    assert_eq!(m["stop_reason"], "failed");
    assert!(m["stop_detail"].as_str().unwrap().contains("convex"));
}

#[test]
fn identical_configs_give_identical_series() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let cfg = write_config(
        &tmp,
        "c.json",
        r#"{"schema_version": 1, "seed": 7, "run": {"curve_flow": {
            "speed": {"family": "H^p", "params": [0.5], "n": 1},
            "initial": {"kind": "fourier", "mean": 1.0, "cos": [0.0, 0.03], "sin": [0.0, 0.0, 0.02]},
            "resolution": 64, "stops": {"max_time": 0.05}}}}"#,
    );
    for _ in 0..2 {
        let out = sphereflow(&root, &["run", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let dirs = run_dirs(&root);
    assert_eq!(dirs.len(), 2);
    let a = fs::read(dirs[0].join("series.csv")).unwrap();
    let b = fs::read(dirs[1].join("series.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(manifest(&dirs[0])["config"]["seed"], 7);
}

#[test]
fn explicit_output_and_plots() {
    let tmp = TempDir::new().unwrap();
    let env_root = tmp.path().join("env");
    let flag_root = tmp.path().join("flag");
    let out = sphereflow(
        &env_root,
        &[
            "axisym-flow",
            "--n",
            "3",
            "--initial",
            r#"{"kind": "perturbed_sphere", "radius": 1.0, "amplitude": 0.02, "mode": 2}"#,
            "--resolution",
            "32",
            "--max-time",
            "0.02",
            "--plots",
            "--out",
            flag_root.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!env_root.exists());
    let dir = &run_dirs(&flag_root)[0];
    assert_eq!(manifest(dir)["stop_reason"], "max_time");
    let (header, _) = read_csv(&dir.join("series.csv"));
    for col in ["w_min", "w_max", "kappa1_min", "kappa2_min", "H_max"] {
        assert!(header.iter().any(|h| h == col), "{col}");
    }
    let svg = fs::read_to_string(dir.join("plots/series_H_max.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(dir.join("plots/snapshots.svg").exists());
}

fn write_curve(path: &Path, rho: impl Fn(f64) -> f64, n: usize) {
    let mut text = String::from("theta,rho\n");
    for i in 0..n {
        let th = TAU * i as f64 / n as f64;
        text.push_str(&format!("{th:.17e},{:.17e}\n", rho(th)));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn reflect_check_reports_json() {
    let tmp = TempDir::new().unwrap();
    let round = tmp.path().join("round.csv");
    write_curve(&round, |_| FRAC_PI_2 - 0.05, 128);
    let out = sphereflow(
        tmp.path(),
        &["reflect-check", "--input", round.to_str().unwrap(), "--delta0", "0.3", "--delta1", "0.05", "--grid", "6x8"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], true);
    assert!(v["min_margin"].as_f64().unwrap() >= -1e-8);
    assert!(v["worst_V"]["delta"].is_f64() && v["worst_V"]["phi"].is_f64());
    assert_eq!(v["checked"], 48);

    // A geodesic circle well away from the pole fails for small tilts.
    let offset = tmp.path().join("offset.csv");
    write_curve(&offset, |th| sphereflow::curve_flow::offset_circle_radius(FRAC_PI_2 - 0.1, 0.4, th), 256);
    let out = sphereflow(
        tmp.path(),
        &["reflect-check", "--input", offset.to_str().unwrap(), "--delta0", "0.1", "--delta1", "0.02", "--grid", "8x16"],
    );
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], false);
    assert!(v["min_margin"].as_f64().unwrap() < 0.0);

    let out = sphereflow(
        tmp.path(),
        &["reflect-check", "--input", round.to_str().unwrap(), "--delta0", "0.3", "--delta1", "0.05", "--grid", "0x8"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn project_roundtrip() {
    let tmp = TempDir::new().unwrap();
    let sphere = tmp.path().join("sphere.csv");
    let rho = |th: f64| 0.9 + 0.05 * (2.0 * th).cos();
    write_curve(&sphere, rho, 128);
    let plane = tmp.path().join("plane.csv");
    let back = tmp.path().join("back.csv");
    let o = sphereflow(tmp.path(), &["project", "--input", sphere.to_str().unwrap(), "--to", "plane", "--output", plane.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = sphereflow(tmp.path(), &["project", "--input", plane.to_str().unwrap(), "--to", "sphere", "--output", back.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (hp, rows_p) = read_csv(&plane);
    assert_eq!(hp, ["theta", "r", "kappa"]);
    let (hb, rows_b) = read_csv(&back);
    assert_eq!(hb, ["theta", "rho", "kappa"]);
    for (p, b) in rows_p.iter().zip(&rows_b) {
        let th = b[0].unwrap();
        assert!((p[1].unwrap() - rho(th).tan()).abs() < 1e-13);
        assert!((b[1].unwrap() - rho(th)).abs() < 1e-14);
    }

    // Grids must be uniform.
    fs::write(tmp.path().join("bad.csv"), "theta,rho\n0,1\n0.1,1\n0.5,1\n1,1\n2,1\n3,1\n4,1\n5,1\n").unwrap();
    let o = sphereflow(tmp.path(), &["project", "--input", tmp.path().join("bad.csv").to_str().unwrap(), "--to", "plane", "--output", plane.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn xcheck_writes_a_gap_report() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let out = sphereflow(
        &root,
        &["xcheck", "--pair", "csf-oval", "--horizon", "0.05", "--resolution", "128", "--snapshots", "2"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["max_gap"].as_f64().unwrap() < 1e-3);
    assert_eq!(v["per_snapshot"].as_array().unwrap().len(), 2);
    assert!(run_dirs(&root)[0].join("gap_report.json").exists());
}

#[test]
fn verify_single_criterion() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let out = sphereflow(&root, &["verify", "--suite", "fast", "--only", "c01"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().next().unwrap().starts_with("PASS c01"));
    let report: Value = serde_json::from_slice(&fs::read(run_dirs(&root)[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "fast");
    assert_eq!(report["criteria"][0]["id"], "c01");
    assert_eq!(report["passed"], true);
}
