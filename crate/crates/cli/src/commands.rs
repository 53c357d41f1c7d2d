use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use magflow_core::flow::{
    lyapunov_exponent, period, trajectory_exact, trajectory_numeric, write_trajectory_csv,
};
use magflow_core::io::write_json;
use magflow_core::oracle::{compare_to_closed_form, sample_pushforward, write_comparison_csv, UniformStream};
use magflow_core::spectrum::{critical_gap, ladder, select_level, write_ladder_csv};
use magflow_core::surface::{
    area_average, birkhoff_average, bolza_group, check_chern, density_grid_surface,
    initial_condition, ObservableGrid, SurfaceDensity, ENUMERATION_CAP,
};
use magflow_core::torus::{density_grid_cover, write_grid_csv, GridSpec, ZonalTorus};
use magflow_core::verify::{self, default_observable, state_residual, VerifyOptions};
use magflow_core::{HTangent, MagneticConfig, Regime};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{RunConfig, Surface};
use crate::Failure;

const LYAPUNOV_HORIZON: f64 = 1e5;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Subcritical => "Subcritical",
        Regime::Critical => "Critical",
        Regime::Supercritical => "Supercritical",
    }
}

fn model_json(cfg: &MagneticConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("B".into(), json!(cfg.b()));
    m.insert("E".into(), json!(cfg.e()));
    m.insert("critical_energy".into(), json!(cfg.critical_energy()));
    m.insert("regime".into(), json!(regime_name(cfg.regime())));
    m
}

pub fn flow(rc: &RunConfig) -> Result<(), Failure> {
    let cfg = MagneticConfig::new(rc.b, rc.energy()?)?;
    let p0 = HTangent::reference().scaled(cfg.lambda());
    let period = (cfg.regime() == Regime::Subcritical && cfg.e() > 0.0)
        .then(|| period(&cfg))
        .transpose()?;
    let t_end = rc.t_end.unwrap_or(period.map_or(20.0, |t| 2.0 * t));
    let stride = rc.stride.unwrap_or(t_end / 400.0);

    let exact = trajectory_exact(&cfg, &p0, t_end, stride)?;
    let numeric = trajectory_numeric(&cfg, &p0, t_end, stride, rc.dt)?;
    let divergence = exact
        .iter()
        .zip(&numeric)
        .map(|(a, b)| state_residual(&a.state, &b.state))
        .fold(0.0, f64::max);

    write_trajectory_csv(create(&rc.out, "trajectory_exact.csv")?, &exact)?;
    write_trajectory_csv(create(&rc.out, "trajectory_numeric.csv")?, &numeric)?;

    let mut summary = model_json(&cfg);
    summary.insert("lambda".into(), json!(cfg.lambda()));
    if let Some(t) = period {
        let back = magflow_core::flow::flow_exact(&cfg, &p0, t)?;
        summary.insert("period".into(), json!(t));
        summary.insert("return_residual".into(), json!(state_residual(&back, &p0)));
    }
    let lyapunov = lyapunov_exponent(&cfg, LYAPUNOV_HORIZON)?;
    summary.insert("lyapunov".into(), json!(lyapunov));
    summary.insert("t_end".into(), json!(t_end));
    summary.insert("stride".into(), json!(stride));
    summary.insert("dt".into(), json!(rc.dt));
    summary.insert("max_divergence".into(), json!(divergence));
    write_json(&rc.out.join("flow_summary.json"), &summary)?;

    println!("regime {}", regime_name(cfg.regime()));
    if let Some(t) = period {
        println!("period {t:.9}");
    }
    println!("lyapunov {lyapunov:.6}");
    println!("exact vs numeric divergence {divergence:.3e}");
    Ok(())
}

pub fn density(rc: &RunConfig) -> Result<(), Failure> {
    let cfg = MagneticConfig::new(rc.b, rc.energy()?)?;
    let torus = ZonalTorus::new(&cfg)?;
    let total = torus.total_mass();
    let mass = torus.density_mass(rc.mass_resolution)?;
    let fits = torus.exponent_fits()?;

    let mut sidecar = model_json(&cfg);
    sidecar.insert("period".into(), json!(torus.period()));
    sidecar.insert("radius".into(), json!(torus.radius()));
    sidecar.insert("bands".into(), json!(rc.bands));
    sidecar.insert(
        "mass_check".into(),
        json!({
            "mass": mass,
            "expected": total,
            "rel_err": (mass / total - 1.0).abs(),
            "normalized_mass": mass / total,
        }),
    );
    sidecar.insert("exponent_fits".into(), json!(fits));

    let grid = match rc.surface {
        Surface::Cover => {
            sidecar.insert("surface".into(), json!("cover"));
            let spec = GridSpec {
                n: rc.grid,
                extent: rc.extent.unwrap_or(1.05 * torus.radius()),
            };
            sidecar.insert("grid".into(), json!(spec));
            density_grid_cover(&torus, spec, rc.bands)
        }
        Surface::Bolza => {
            check_chern(&cfg)?;
            let group = bolza_group();
            sidecar.insert("surface".into(), json!("bolza"));
            sidecar.insert("enumeration_cap".into(), json!(ENUMERATION_CAP));
            let capped = torus.radius() >= ENUMERATION_CAP;
            sidecar.insert("enumeration_cap_exceeded".into(), json!(capped));
            if capped {
                write_json(&rc.out.join("density.json"), &sidecar)?;
                println!(
                    "R_E = {:.6} exceeds the enumeration cap {ENUMERATION_CAP}; no surface grid written",
                    torus.radius()
                );
                return Ok(());
            }
            let surface = SurfaceDensity::new(&group, &cfg)?;
            let spec = GridSpec {
                n: rc.grid,
                extent: rc.extent.unwrap_or(group.circumradius),
            };
            sidecar.insert("grid".into(), json!(spec));
            sidecar.insert("translates".into(), json!(surface.translates().len()));
            let [n_radial, n_angular] = rc.surface_mass_resolution;
            let surface_mass = surface.mass(n_radial, n_angular);
            sidecar.insert(
                "surface_mass_check".into(),
                json!({
                    "mass": surface_mass,
                    "expected": total,
                    "rel_err": (surface_mass / total - 1.0).abs(),
                }),
            );
            density_grid_surface(&surface, spec, rc.bands)
        }
    };
    let max_preimages = grid.rows.iter().map(|r| r.n_preimages).max().unwrap_or(0);
    sidecar.insert("max_preimages".into(), json!(max_preimages));
    write_grid_csv(create(&rc.out, "density_grid.csv")?, &grid)?;
    write_json(&rc.out.join("density.json"), &sidecar)?;

    println!("mass {mass:.6} (expected {total:.6})");
    println!(
        "slopes center {:.4} boundary {:.4}",
        fits.center_slope, fits.boundary_slope
    );
    println!("max preimages {max_preimages}");
    Ok(())
}

pub fn spectrum(rc: &RunConfig) -> Result<(), Failure> {
    let k = rc
        .k
        .ok_or_else(|| Failure::Config("spectrum needs --k".into()))?;
    let entries = ladder(k, rc.b)?;
    write_ladder_csv(create(&rc.out, "spectrum.csv")?, &entries)?;

    let gap = critical_gap(k, rc.b)?;
    let mut summary = Map::new();
    summary.insert("B".into(), json!(rc.b));
    summary.insert("k".into(), json!(k));
    summary.insert("levels".into(), json!(entries.len()));
    summary.insert("critical_gap".into(), json!(gap));
    if let Some(e) = rc.e {
        let s = select_level(k, rc.b, e)?;
        summary.insert("E".into(), json!(e));
        summary.insert("selected".into(), json!(s));
        println!("nearest level m = {} scaled {:.12}", s.m, s.scaled);
    }
    write_json(&rc.out.join("spectrum.json"), &summary)?;
    println!("{} levels below the critical energy", entries.len());
    Ok(())
}

pub fn sample(rc: &RunConfig) -> Result<(), Failure> {
    let cfg = MagneticConfig::new(rc.b, rc.energy()?)?;
    let n = rc.n.unwrap_or(1_000_000);
    let seed = rc.seed.unwrap_or(VerifyOptions::default().seed);
    let hist = sample_pushforward(&cfg, n, seed)?;
    let report = compare_to_closed_form(&hist, &cfg)?;
    write_comparison_csv(create(&rc.out, "sample_rings.csv")?, &report)?;

    let mut summary = serde_json::to_value(&report)?;
    if let Value::Object(m) = &mut summary {
        m.remove("rings");
        m.insert("seed".into(), json!(seed));
        m.insert("radius".into(), json!(hist.radius));
    }
    write_json(&rc.out.join("sample_report.json"), &summary)?;
    println!(
        "{n} samples: window error {:.3}%, slopes center {:.3} boundary {:.3}",
        100.0 * report.max_rel_err_window,
        report.center_slope,
        report.boundary_slope
    );
    Ok(())
}

pub fn equidist(rc: &RunConfig) -> Result<(), Failure> {
    let cfg = MagneticConfig::critical(rc.b)?;
    if let Some(e) = rc.e {
        if (e - cfg.critical_energy()).abs() > 1e-9 {
            return Err(Failure::Config(format!(
                "equidistribution runs at E = B²/2 = {}, got E = {e}",
                cfg.critical_energy()
            )));
        }
    }
    check_chern(&cfg)?;
    let group = bolza_group();
    let obs = match &rc.observable {
        Some(path) => ObservableGrid::read_csv(File::open(path)?)?,
        None => default_observable(401),
    };
    let target = area_average(&group, &obs, 400, 64);

    let mut stream = UniformStream::new(rc.seed.unwrap_or(VerifyOptions::default().seed));
    let starts: Vec<(f64, f64, f64)> = (0..rc.starts)
        .map(|_| {
            let psi = stream.range(0.0, TAU);
            let r = stream.range(0.0, 0.9) * group.boundary_radius(psi);
            (r, psi, stream.range(0.0, TAU))
        })
        .collect();
    let averages: Vec<f64> = starts
        .par_iter()
        .map(|&(r, psi, angle)| {
            let p = initial_condition(&cfg, r, psi, angle);
            birkhoff_average(&group, &cfg, &obs, rc.horizon, &p)
        })
        .collect::<magflow_core::Result<_>>()?;
    let rel: Vec<f64> = averages.iter().map(|a| (a - target) / target).collect();
    let rms = (rel.iter().map(|x| x * x).sum::<f64>() / rel.len() as f64).sqrt();
    let worst = rel.iter().map(|x| x.abs()).fold(0.0, f64::max);

    let runs: Vec<Value> = starts
        .iter()
        .zip(&averages)
        .zip(&rel)
        .map(|((&(r, psi, angle), avg), err)| {
            json!({ "r": r, "psi": psi, "angle": angle, "average": avg, "rel_err": err })
        })
        .collect();
    let mut summary = model_json(&cfg);
    summary.insert("horizon".into(), json!(rc.horizon));
    summary.insert("area_average".into(), json!(target));
    summary.insert("runs".into(), json!(runs));
    summary.insert("rms_rel_err".into(), json!(rms));
    summary.insert("max_rel_err".into(), json!(worst));
    write_json(&rc.out.join("equidist.json"), &summary)?;
    println!(
        "area average {target:.6}; {} runs, rms error {:.2}%, max {:.2}%",
        rel.len(),
        100.0 * rms,
        100.0 * worst
    );
    Ok(())
}

pub fn verify(rc: &RunConfig) -> Result<(), Failure> {
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        seed: rc.seed.unwrap_or(defaults.seed),
        mc_samples: rc.n.unwrap_or(defaults.mc_samples),
        inject_j_flip: rc.inject_j_flip,
        ..defaults
    };
    let ids: Vec<String> = if rc.only.is_empty() {
        verify::criterion_ids().into_iter().map(String::from).collect()
    } else {
        rc.only.clone()
    };
    let mut criteria = Vec::new();
    for id in &ids {
        let outcome = verify::run_criterion(id, &opts)
            .ok_or_else(|| Failure::Config(format!("unknown criterion {id:?}")))?;
        println!("{}", outcome.summary_line());
        criteria.push(outcome);
    }
    let passed = criteria.iter().all(|c| c.passed);
    let report = verify::VerifyReport {
        options: opts,
        criteria,
        passed,
    };
    write_json(&rc.out.join("verify.json"), &report)?;
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed", ids.len() - failed, ids.len());
    std::io::stdout().flush()?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification(failed))
    }
}
