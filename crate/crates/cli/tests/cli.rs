use std::path::Path;
use std::process::{Command, Output};

use magflow_core::surface::bolza_group;
use magflow_core::{Complex, HPoint};
use serde_json::Value;

fn magflow(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn flow_summary_reports_period_and_return() {
    let dir = tempfile::tempdir().unwrap();
    let run = magflow(dir.path(), &["flow", "--B", "1", "--E", "0.25"]);
    assert!(run.status.success());
    let s = read_json(&dir.path().join("flow_summary.json"));
    assert_eq!(s["regime"], "Subcritical");
    // 2π/√(B² − 2E) at B = 1, E = 1/4.
    let period = 2.0 * std::f64::consts::PI * 2f64.sqrt();
    assert!((s["period"].as_f64().unwrap() - period).abs() < 1e-12);
    assert!((s["period"].as_f64().unwrap() - 8.885766).abs() < 1e-6);
    assert!(s["return_residual"].as_f64().unwrap() < 1e-9);
    assert!(s["max_divergence"].as_f64().unwrap() < 1e-8);

    let exact = csv_rows(&dir.path().join("trajectory_exact.csv"));
    let numeric = csv_rows(&dir.path().join("trajectory_numeric.csv"));
    assert_eq!(exact.len(), numeric.len());
    assert_eq!(exact[0], ["0.0000000000000000e0", "0.0000000000000000e0", "1.0000000000000000e0", "0.0000000000000000e0", "7.0710678118654757e-1"]);
}

#[test]
fn critical_flow_has_no_period() {
    let dir = tempfile::tempdir().unwrap();
    assert!(magflow(dir.path(), &["flow", "--B", "1", "--E", "0.5"]).status.success());
    let s = read_json(&dir.path().join("flow_summary.json"));
    assert_eq!(s["regime"], "Critical");
    assert!(s.get("period").is_none());
    assert!(s.get("return_residual").is_none());
}

#[test]
fn supercritical_lyapunov() {
    // Eigenvalues of F are ±√(2E − B²)/2 = ±1/2.
    let dir = tempfile::tempdir().unwrap();
    assert!(magflow(dir.path(), &["flow", "--B", "1", "--E", "1"]).status.success());
    let s = read_json(&dir.path().join("flow_summary.json"));
    assert_eq!(s["regime"], "Supercritical");
    assert!((s["lyapunov"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn spectrum_table() {
    let dir = tempfile::tempdir().unwrap();
    assert!(magflow(dir.path(), &["spectrum", "--k", "10", "--B", "1"]).status.success());
    let rows = csv_rows(&dir.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[9][3].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn cover_density_mass_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let run = magflow(dir.path(), &["density", "--B", "1", "--E", "0.25", "--grid", "200"]);
    assert!(run.status.success());
    let s = read_json(&dir.path().join("density.json"));
    assert!(s["mass_check"]["rel_err"].as_f64().unwrap() < 0.01);
    assert_eq!(s["grid"]["n"], 200);
    assert!(s["exponent_fits"]["center_slope"].is_f64());
    assert_eq!(csv_rows(&dir.path().join("density_grid.csv")).len(), 40_000);
}

#[test]
fn surface_grid_matches_cover_inside_the_domain_at_small_energy() {
    let dir = tempfile::tempdir().unwrap();
    let (cover, surface) = (dir.path().join("cover"), dir.path().join("surface"));
    let common = ["density", "--B", "1", "--E", "0.05", "--grid", "60", "--extent", "2.5"];
    assert!(magflow(&cover, &common).status.success());
    let mut args = common.to_vec();
    args.extend(["--surface", "bolza"]);
    assert!(magflow(&surface, &args).status.success());

    let group = bolza_group();
    let a = csv_rows(&cover.join("density_grid.csv"));
    let b = csv_rows(&surface.join("density_grid.csv"));
    let mut compared = 0;
    for (ra, rb) in a.iter().zip(&b) {
        let (x, y): (f64, f64) = (ra[0].parse().unwrap(), ra[1].parse().unwrap());
        let Ok(p) = HPoint::from_disk(Complex::new(x, y)) else { continue };
        if group.contains(&p) {
            let (da, db): (f64, f64) = (ra[3].parse().unwrap(), rb[3].parse().unwrap());
            assert!((da - db).abs() <= 1e-12 * da.abs().max(1.0), "{ra:?} vs {rb:?}");
            compared += 1;
        }
    }
    assert!(compared > 1000);
    let s = read_json(&surface.join("density.json"));
    assert_eq!(s["enumeration_cap_exceeded"], false);
}

#[test]
fn near_critical_surface_reports_enumeration_cap() {
    let dir = tempfile::tempdir().unwrap();
    let run = magflow(dir.path(), &["density", "--B", "1", "--E", "0.499", "--surface", "bolza"]);
    assert!(run.status.success());
    let s = read_json(&dir.path().join("density.json"));
    assert_eq!(s["enumeration_cap_exceeded"], true);
    assert!(s["radius"].as_f64().unwrap() > 6.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(magflow(out, &["sample", "--B", "1", "--E", "0.25", "--n", "20000", "--seed", "5"]).status.success());
        assert!(magflow(out, &["density", "--B", "1", "--E", "0.25", "--grid", "40"]).status.success());
        assert!(magflow(out, &["flow", "--B", "1.5", "--E", "0.3"]).status.success());
    }
    for name in ["sample_rings.csv", "sample_report.json", "density_grid.csv", "density.json", "trajectory_exact.csv", "trajectory_numeric.csv", "flow_summary.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let run = Command::new(env!("CARGO_BIN_EXE_magflow"))
            .args(["sample", "--B", "1", "--E", "0.25", "--n", "100000", "--out"])
            .arg(&out)
            .env("MAGFLOW_THREADS", threads)
            .output()
            .unwrap();
        assert!(run.status.success());
        outputs.push(std::fs::read(out.join("sample_rings.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn injected_orientation_flip_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let run = magflow(dir.path(), &["verify", "--only", "F,1", "--inject-j-flip"]);
    assert_eq!(run.status.code(), Some(3));
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], false);
    assert_eq!(report["criteria"][0]["id"], "F");
    assert_eq!(report["criteria"][0]["passed"], false);
    assert_eq!(report["criteria"][1]["passed"], true);

    let clean = magflow(dir.path(), &["verify", "--only", "F"]);
    assert_eq!(clean.status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["density", "--B", "1", "--E", "0.7"],
        &["density", "--B", "1.2", "--E", "0.2", "--surface", "bolza"],
        &["flow", "--B", "-1", "--E", "0.2"],
        &["flow", "--B", "1"],
        &["equidist", "--B", "1", "--E", "0.3"],
        &["spectrum", "--B", "1"],
        &["density", "--B", "1", "--E", "0.2", "--bands", "x"],
        &["verify", "--only", "nope"],
    ];
    for args in cases {
        assert_eq!(magflow(dir.path(), args).status.code(), Some(2), "{args:?}");
    }

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nB = 1\nE = 0.25\nsurface = 3\n").unwrap();
    let run = magflow(dir.path(), &["flow", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[model]\nB = 1.0\nE = 0.3\n\n[flow]\nstride = 0.5\nt_end = 5.0\n").unwrap();
    let run = magflow(dir.path(), &["flow", "--config", cfg.to_str().unwrap(), "--E", "0.25"]);
    assert!(run.status.success());
    let s = read_json(&dir.path().join("flow_summary.json"));
    assert_eq!(s["E"], 0.25);
    assert_eq!(csv_rows(&dir.path().join("trajectory_exact.csv")).len(), 11);
}

#[test]
fn equidist_at_critical_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[equidist]\nstarts = 2\nhorizon = 500.0\n").unwrap();
    let run = magflow(dir.path(), &["equidist", "--B", "1", "--config", cfg.to_str().unwrap()]);
    assert!(run.status.success());
    let s = read_json(&dir.path().join("equidist.json"));
    assert_eq!(s["runs"].as_array().unwrap().len(), 2);
    let target = s["area_average"].as_f64().unwrap();
    assert!(target > 0.0);
    for r in s["runs"].as_array().unwrap() {
        assert!(r["average"].as_f64().unwrap() > 0.0);
    }
}
