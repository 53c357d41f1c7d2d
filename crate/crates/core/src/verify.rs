//! The acceptance suite: each criterion recomputes a known identity from
//! independent pieces of the library and reports the measured values.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Result;
use crate::flow::{
    flow_exact, flow_numeric_oriented, lyapunov_exponent, period, JOrientation, MagneticConfig,
};
use crate::hyperbolic::{hyp_dist, Complex, HPoint, HTangent};
use crate::oracle::{compare_to_closed_form, sample_pushforward, UniformStream};
use crate::spectrum::{critical_gap, entry, level_count, select_level, SpectrumEntry};
use crate::surface::{
    area_average, birkhoff_average, bolza_group, initial_condition, Bump, ObservableGrid,
    SurfaceDensity,
};
use crate::torus::ZonalTorus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Monte Carlo sample count for the density oracle.
    pub mc_samples: u64,
    /// Integrate with the opposite orientation of `j`; the flow oracle must
    /// then fail.
    pub inject_j_flip: bool,
    /// Treat runtime budgets as part of each criterion.
    pub enforce_budgets: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 20_240_601,
            mc_samples: 10_000_000,
            inject_j_flip: false,
            enforce_budgets: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub measured: Value,
    pub runtime_s: f64,
    pub budget_s: f64,
}

impl CriterionOutcome {
    pub fn summary_line(&self) -> String {
        format!(
            "[{}] {:>2} {:<34} {:>8.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.runtime_s,
            self.measured
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

/// Random subcritical `(B, E)` with `B ∈ [0.5, 3]` and `E/E_c ∈ [0.02, 0.98]`.
pub fn random_subcritical(stream: &mut UniformStream) -> MagneticConfig {
    let b = stream.range(0.5, 3.0);
    let e = stream.range(0.02, 0.98) * 0.5 * b * b;
    MagneticConfig::new(b, e).expect("positive B, nonnegative E")
}

/// State at polar coordinates `(r, ψ)` with speed `λ`, rotated `angle` from vertical.
pub fn shell_state(cfg: &MagneticConfig, r: f64, psi: f64, angle: f64) -> HTangent {
    initial_condition(cfg, r, psi, angle)
}

/// Hyperbolic size of the difference of two states: base distance plus
/// the norm of the vector difference measured at the first base point.
pub fn state_residual(p: &HTangent, q: &HTangent) -> f64 {
    hyp_dist(&p.base, &q.base) + (p.v - q.v).norm() / p.base.z.im
}

/// `|det dΨ|` by central differences of `Ψ` in half-plane coordinates,
/// measured against hyperbolic area `dx dy / y²`.
pub fn jacobian_fd(torus: &ZonalTorus, theta: f64, t: f64, h: f64) -> f64 {
    let d = |f: &dyn Fn(f64) -> Complex| (f(h) - f(-h)) / (2.0 * h);
    let dtheta = d(&|s| torus.psi(theta + s, t).z);
    let dt = d(&|s| torus.psi(theta, t + s).z);
    let y = torus.psi(theta, t).z.im;
    (dtheta.re * dt.im - dtheta.im * dt.re).abs() / (y * y)
}

/// Linear scan of the whole ladder for the level nearest `E`, ties to smaller `m`.
pub fn select_level_scan(k: u64, b: f64, e: f64) -> Option<SpectrumEntry> {
    let mut best: Option<SpectrumEntry> = None;
    for m in 0..level_count(k, b) {
        let cand = entry(k, b, m);
        if best.is_none_or(|x| (cand.scaled - e).abs() < (x.scaled - e).abs()) {
            best = Some(cand);
        }
    }
    best
}

/// Maximum of `f` on `[a, b]` by golden-section search (for unimodal `f`).
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        if b - a < 1e-12 * b.abs().max(1.0) {
            break;
        }
    }
    f1.max(f2)
}

type Check = fn(&VerifyOptions) -> Result<(bool, Value)>;

const CRITERIA: [(&str, &str, f64, Check); 13] = [
    ("1", "periodicity", 1.0, periodicity),
    ("2", "footpoint radius", 1.0, footpoint_radius),
    ("3", "distance-profile derivatives", 1.0, profile_derivatives),
    ("4", "jacobian identity", 1.0, jacobian_identity),
    ("5", "density mass", 10.0, density_mass),
    ("6", "singularity exponents", 5.0, singularity_exponents),
    ("7", "monte carlo oracle", 60.0, monte_carlo),
    ("8", "preimage counts", 30.0, preimage_counts),
    ("9", "lyapunov trichotomy", 5.0, lyapunov),
    ("10", "spectrum", 5.0, spectrum),
    ("11", "bolza integrity", 5.0, bolza_integrity),
    ("12", "equidistribution at E_c", 60.0, equidistribution),
    ("F", "flow oracle (exact vs RK4)", 5.0, flow_oracle),
];

/// Ids of all criteria, in run order.
pub fn criterion_ids() -> Vec<&'static str> {
    CRITERIA.iter().map(|c| c.0).collect()
}

pub fn run_criterion(id: &str, opts: &VerifyOptions) -> Option<CriterionOutcome> {
    let &(id, name, budget, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let (ok, measured) = match check(opts) {
        Ok(r) => r,
        Err(e) => (false, json!({ "error": e.to_string() })),
    };
    let runtime_s = start.elapsed().as_secs_f64();
    Some(CriterionOutcome {
        id: id.to_owned(),
        name: name.to_owned(),
        passed: ok && (!opts.enforce_budgets || runtime_s < budget),
        measured,
        runtime_s,
        budget_s: budget,
    })
}

pub fn run_all(opts: &VerifyOptions) -> VerifyReport {
    let criteria: Vec<CriterionOutcome> = CRITERIA
        .iter()
        .map(|c| run_criterion(c.0, opts).expect("known id"))
        .collect();
    let passed = criteria.iter().all(|c| c.passed);
    VerifyReport {
        options: *opts,
        criteria,
        passed,
    }
}

fn periodicity(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let mut stream = UniformStream::new(opts.seed ^ 0x01);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let cfg = random_subcritical(&mut stream);
        let p = shell_state(
            &cfg,
            stream.range(0.0, 2.0),
            stream.range(0.0, TAU),
            stream.range(0.0, TAU),
        );
        let q = flow_exact(&cfg, &p, period(&cfg)?)?;
        worst = worst.max(state_residual(&p, &q));
    }
    Ok((worst < 1e-9, json!({ "pairs": 50, "max_residual": worst })))
}

fn footpoint_radius(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let mut stream = UniformStream::new(opts.seed ^ 0x02);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let cfg = random_subcritical(&mut stream);
        let torus = ZonalTorus::new(&cfg)?;
        let period = torus.period();
        // Coarse scan, then golden section around the best sample.
        let n = 2000;
        let best = (0..=n)
            .map(|j| j as f64 * period / n as f64)
            .max_by(|a, b| torus.phi(*a).total_cmp(&torus.phi(*b)))
            .unwrap_or(0.0);
        let step = period / n as f64;
        let max = golden_max(|t| torus.phi(t), best - step, best + step);
        let expected = ((cfg.b().powi(2) + 2.0 * cfg.e()) / cfg.kappa()).acosh();
        worst = worst.max((max - expected).abs());
    }
    Ok((worst < 1e-8, json!({ "pairs": 20, "max_abs_error": worst })))
}

fn profile_derivatives(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let mut stream = UniformStream::new(opts.seed ^ 0x03);
    let mut cfgs = vec![MagneticConfig::new(1.0, 0.25)?];
    cfgs.extend((0..10).map(|_| random_subcritical(&mut stream)));
    let (mut worst_d1, mut worst_d2) = (0.0f64, 0.0f64);
    let mut reference = 0.0;
    for (idx, cfg) in cfgs.iter().enumerate() {
        let torus = ZonalTorus::new(cfg)?;
        let mid = 0.5 * torus.period();
        let h1 = 1e-5;
        let d1 = (torus.phi(mid + h1) - torus.phi(mid - h1)) / (2.0 * h1);
        let h2 = 1e-4;
        let d2 = (torus.phi(mid + h2) - 2.0 * torus.phi(mid) + torus.phi(mid - h2)) / (h2 * h2);
        let target = cfg.lambda() / (2.0 * cfg.b()) * (2.0 * cfg.e() - cfg.b().powi(2));
        if idx == 0 {
            reference = d2;
        }
        worst_d1 = worst_d1.max(d1.abs());
        worst_d2 = worst_d2.max((d2 - target).abs());
    }
    Ok((
        worst_d1 < 1e-6 && worst_d2 < 1e-4,
        json!({
            "max_abs_phi1": worst_d1,
            "max_abs_phi2_error": worst_d2,
            "phi2_reference": reference,
        }),
    ))
}

fn jacobian_identity(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let mut stream = UniformStream::new(opts.seed ^ 0x04);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let cfg = random_subcritical(&mut stream);
        let torus = ZonalTorus::new(&cfg)?;
        let period = torus.period();
        for _ in 0..10 {
            let theta = stream.range(0.0, TAU);
            // Keep away from t ∈ {0, T/2, T}, where the Jacobian vanishes.
            let mut frac = stream.range(0.05, 0.45);
            if stream.next_f64() < 0.5 {
                frac += 0.5;
            }
            let t = frac * period;
            let fd = jacobian_fd(&torus, theta, t, 1e-5);
            let exact = torus.jacobian(t);
            worst = worst.max((fd - exact).abs() / exact);
        }
    }
    Ok((worst < 1e-4, json!({ "points": 100, "max_rel_error": worst })))
}

fn density_mass(_: &VerifyOptions) -> Result<(bool, Value)> {
    let cfg = MagneticConfig::new(1.0, 0.25)?;
    let torus = ZonalTorus::new(&cfg)?;
    let mass = torus.density_mass(512)?;
    let target = torus.total_mass();
    let normalized = mass / target;
    Ok((
        (normalized - 1.0).abs() < 0.01,
        json!({ "mass": mass, "target": target, "normalized": normalized }),
    ))
}

fn singularity_exponents(_: &VerifyOptions) -> Result<(bool, Value)> {
    let cfg = MagneticConfig::new(1.0, 0.25)?;
    let fits = ZonalTorus::new(&cfg)?.exponent_fits()?;
    let center_rel = (fits.center_product / fits.center_constant - 1.0).abs();
    let boundary_rel = (fits.boundary_product / fits.boundary_constant - 1.0).abs();
    let ok = (fits.center_slope + 1.0).abs() < 0.05
        && (fits.boundary_slope + 0.5).abs() < 0.05
        && center_rel < 0.01
        && boundary_rel < 0.02;
    Ok((
        ok,
        json!({
            "center_slope": fits.center_slope,
            "boundary_slope": fits.boundary_slope,
            "center_product": fits.center_product,
            "center_constant": fits.center_constant,
            "boundary_product": fits.boundary_product,
            "boundary_constant": fits.boundary_constant,
        }),
    ))
}

fn monte_carlo(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let cfg = MagneticConfig::new(1.0, 0.25)?;
    let hist = sample_pushforward(&cfg, opts.mc_samples, opts.seed)?;
    let report = compare_to_closed_form(&hist, &cfg)?;
    Ok((
        report.max_rel_err_window < 0.05 && report.out_of_disk == 0,
        json!({
            "n": report.n,
            "max_rel_err_window": report.max_rel_err_window,
            "chi_square": report.chi_square,
            "dof": report.degrees_of_freedom,
            "center_slope": report.center_slope,
            "boundary_slope": report.boundary_slope,
            "out_of_disk": report.out_of_disk,
        }),
    ))
}

fn preimage_counts(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let cfg = MagneticConfig::new(1.0, 0.25)?;
    let torus = ZonalTorus::new(&cfg)?;
    let r = torus.radius();
    let mut stream = UniformStream::new(opts.seed ^ 0x08);
    let mut wrong = 0;
    for k in 0..1000 {
        let angle = stream.range(0.0, TAU);
        let (point, expected) = match k % 10 {
            0..=3 => (HPoint::from_polar(stream.range(0.01, 0.99) * r, angle), 2),
            4..=6 => (torus.psi(angle, 0.5 * torus.period()), 1),
            _ => (HPoint::from_polar(r + stream.range(0.01, 1.0), angle), 0),
        };
        if torus.preimages(&point)?.len() != expected {
            wrong += 1;
        }
    }

    let group = bolza_group();
    let surface = SurfaceDensity::new(&group, &cfg)?;
    let bound = 2 * surface.translates().len();
    let n = 100;
    let half = (0.5 * group.circumradius).tanh();
    let counts: Vec<usize> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (ix, iy) = (idx % n, idx / n);
            let x = -half + (ix as f64 + 0.5) * 2.0 * half / n as f64;
            let y = -half + (iy as f64 + 0.5) * 2.0 * half / n as f64;
            HPoint::from_disk(Complex::new(x, y))
                .ok()
                .and_then(|p| surface.density(&p).ok())
                .map_or(0, |s| s.preimages.len())
        })
        .collect();
    let max_count = counts.iter().copied().max().unwrap_or(0);
    Ok((
        wrong == 0 && max_count <= bound,
        json!({
            "cover_probes": 1000,
            "cover_mismatches": wrong,
            "surface_max_preimages": max_count,
            "surface_bound": bound,
            "translates": surface.translates().len(),
        }),
    ))
}

fn lyapunov(opts: &VerifyOptions) -> Result<(bool, Value)> {
    const T_MAX: f64 = 1e5;
    let mut stream = UniformStream::new(opts.seed ^ 0x09);
    let mut worst_bounded = 0.0f64;
    for k in 0..8 {
        let cfg = if k < 5 {
            random_subcritical(&mut stream)
        } else {
            MagneticConfig::critical(stream.range(0.5, 3.0))?
        };
        worst_bounded = worst_bounded.max(lyapunov_exponent(&cfg, T_MAX)?);
    }
    let mut worst_hyperbolic = 0.0f64;
    for _ in 0..10 {
        let b = stream.range(0.5, 2.0);
        let e = stream.range(1.2, 3.0) * 0.5 * b * b;
        let cfg = MagneticConfig::new(b, e)?;
        let expected = 0.5 * (2.0 * e - b * b).sqrt();
        worst_hyperbolic = worst_hyperbolic.max((lyapunov_exponent(&cfg, T_MAX)? - expected).abs());
    }
    Ok((
        worst_bounded < 1e-3 && worst_hyperbolic < 1e-3,
        json!({
            "t_max": T_MAX,
            "max_exponent_at_or_below_critical": worst_bounded,
            "max_error_supercritical": worst_hyperbolic,
        }),
    ))
}

fn spectrum(_: &VerifyOptions) -> Result<(bool, Value)> {
    let fields = [0.5, 1.0, 1.5, 2.0];
    let mismatches: usize = fields
        .par_iter()
        .map(|&b| {
            let critical = 0.5 * b * b;
            let mut bad = 0;
            for k in 1..=500u64 {
                if level_count(k, b) == 0 {
                    continue;
                }
                for j in 0..50 {
                    let e = critical * j as f64 / 50.0;
                    let fast = select_level(k, b, e).ok();
                    if fast != select_level_scan(k, b, e) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();

    // k·|λ_top/k² − E_c| over k ≤ 10⁴ at both top indices. The sequence is
    // bounded if its tail never exceeds its early maximum.
    let mut sup_all = 0.0f64;
    let mut sup_head = 0.0f64;
    let mut sup_tail = 0.0f64;
    for &b in &[0.5, 1.0, 1.5, 2.0, std::f64::consts::FRAC_1_SQRT_2] {
        for k in 1..=10_000u64 {
            let scaled = k as f64 * critical_gap(k, b)?.max();
            sup_all = sup_all.max(scaled);
            if k <= 100 {
                sup_head = sup_head.max(scaled);
            }
            if k > 5_000 {
                sup_tail = sup_tail.max(scaled);
            }
        }
    }
    Ok((
        mismatches == 0 && sup_all.is_finite() && sup_tail <= sup_head,
        json!({
            "selection_mismatches": mismatches,
            "sup_k_gap": sup_all,
            "sup_k_gap_k_le_100": sup_head,
            "sup_k_gap_k_gt_5000": sup_tail,
        }),
    ))
}

fn bolza_integrity(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let group = bolza_group();
    let residual = group.relation_residual();
    let area_error = (group.domain_area() - 4.0 * PI).abs();
    let mut stream = UniformStream::new(opts.seed ^ 0x0b);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let psi = stream.range(0.0, TAU);
        let r = stream.range(0.0, 0.95) * group.boundary_radius(psi);
        let w = HPoint::from_polar(r, psi);
        let word: Vec<usize> = (0..5).map(|_| (stream.next_f64() * 8.0) as usize % 8).collect();
        let z = group.word_element(&word).apply(w);
        let red = group.reduce(&z)?;
        let back = red.element.inverse().apply(red.representative);
        worst = worst
            .max(hyp_dist(&red.representative, &w))
            .max(hyp_dist(&back, &z));
    }
    Ok((
        residual < 1e-9 && area_error < 1e-6 && worst < 1e-8,
        json!({
            "relation_residual": residual,
            "area_error": area_error,
            "max_roundtrip_error": worst,
        }),
    ))
}

/// Bump observable sampled on a grid, as used by the equidistribution check.
pub fn default_observable(n: usize) -> ObservableGrid {
    ObservableGrid::sample(&bolza_group(), &Bump { r0: 1.2 }, n)
}

fn equidistribution(_: &VerifyOptions) -> Result<(bool, Value)> {
    let group = bolza_group();
    let cfg = MagneticConfig::critical(1.0)?;
    let obs = default_observable(401);
    let target = area_average(&group, &obs, 400, 64);
    let starts = [(0.3, 0.2, 0.1), (1.0, 2.0, 2.5), (0.7, 4.0, 5.0)];
    let averages: Vec<f64> = starts
        .par_iter()
        .map(|&(r, psi, angle)| {
            let p = initial_condition(&cfg, r, psi, angle);
            birkhoff_average(&group, &cfg, &obs, 2000.0, &p)
        })
        .collect::<Result<_>>()?;
    let worst = averages
        .iter()
        .map(|a| (a - target).abs() / target)
        .fold(0.0, f64::max);
    Ok((
        worst < 0.05,
        json!({ "area_average": target, "birkhoff": averages, "max_rel_error": worst }),
    ))
}

fn flow_oracle(opts: &VerifyOptions) -> Result<(bool, Value)> {
    let cfg = MagneticConfig::new(1.0, 0.25)?;
    let orientation = if opts.inject_j_flip {
        JOrientation::Flipped
    } else {
        JOrientation::Standard
    };
    let period = period(&cfg)?;
    let p = HTangent::reference().scaled(cfg.lambda());
    let stride = period / 50.0;
    let mut state = p;
    let mut worst = 0.0f64;
    for j in 1..=100 {
        state = flow_numeric_oriented(&cfg, &state, stride, 1e-4, orientation)?.state;
        let exact = flow_exact(&cfg, &p, j as f64 * stride)?;
        worst = worst.max(hyp_dist(&exact.base, &state.base));
    }
    Ok((
        worst < 1e-8,
        json!({ "max_base_distance": worst, "orientation": format!("{orientation:?}") }),
    ))
}
