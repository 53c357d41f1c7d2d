//! The zonal torus: all magnetic trajectories at energy `E` leaving the
//! center `i`, parametrized by initial direction `θ` and flow time `t`, and
//! the density `α` of its projection to the base.
//!
//! Every trajectory through `i` is a hyperbolic circle passing through `i`;
//! they sweep the closed disk of radius `R_E` about `i`. Rotation about `i`
//! permutes them, so `Ψ(θ, t)` is `Ψ(0, t)` rotated by `θ`, and the distance
//! `φ(t) = d(i, Ψ(·, t))` rises monotonically to `R_E` at `T_E/2` and falls
//! back symmetrically.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{generator, period, FlowGenerator, MagneticConfig, Regime};
use crate::hyperbolic::{hyp_dist, mobius_apply, HPoint, HTangent, MoebiusElement};
use crate::numerics::{bisect, log_log_slope, simpson};

/// Points closer than this to the center have a full circle of preimages.
pub const CENTER_TOLERANCE: f64 = 1e-9;

/// Relative tolerance on `|d − R_E|` for a point to count as on the caustic.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Roots of `φ(t) = d` closer than this in `t` are merged into one.
pub const MERGE_TOLERANCE: f64 = 1e-7;

/// Half-width of the bands cut out around the singular set in [`ZonalTorus::density_mass`].
pub const MASS_EXCISION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub theta: f64,
    pub t: f64,
}

impl TorusPoint {
    /// Reduces `theta` mod `2π` and `t` mod `period`.
    pub fn new(theta: f64, t: f64, period: f64) -> Self {
        TorusPoint {
            theta: reduce_mod(theta, TAU),
            t: reduce_mod(t, period),
        }
    }
}

fn reduce_mod(x: f64, m: f64) -> f64 {
    let r = x.rem_euclid(m);
    if r >= m {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DensityFlag {
    NearCenter,
    NearBoundary,
    Outside,
    Regular,
}

impl DensityFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            DensityFlag::NearCenter => "near_center",
            DensityFlag::NearBoundary => "near_boundary",
            DensityFlag::Outside => "outside",
            DensityFlag::Regular => "regular",
        }
    }
}

/// Widths of the singular bands, relative to `R_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandWidths {
    pub center: f64,
    pub boundary: f64,
}

impl Default for BandWidths {
    fn default() -> Self {
        BandWidths {
            center: 1e-3,
            boundary: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub point: HPoint,
    /// Density of the pushforward of `dθ dt` against hyperbolic area.
    pub alpha_raw: f64,
    /// `alpha_raw / (2π T_E)`: the density of a probability measure.
    pub alpha_normalized: f64,
    pub preimages: Vec<TorusPoint>,
    pub flag: DensityFlag,
}

/// Geometry of the zonal torus at one subcritical energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZonalTorus {
    cfg: MagneticConfig,
    gen: FlowGenerator,
    period: f64,
    radius: f64,
}

impl ZonalTorus {
    pub fn new(cfg: &MagneticConfig) -> Result<Self> {
        if cfg.regime() != Regime::Subcritical || !(cfg.e() > 0.0) {
            return Err(Error::TorusUndefined);
        }
        Ok(ZonalTorus {
            cfg: *cfg,
            gen: generator(cfg),
            period: period(cfg)?,
            radius: radius(cfg)?,
        })
    }

    pub fn cfg(&self) -> &MagneticConfig {
        &self.cfg
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Total mass `2π T_E` of `dθ dt`.
    pub fn total_mass(&self) -> f64 {
        TAU * self.period
    }

    /// Frame of the torus point `(θ, t)`.
    pub fn frame(&self, theta: f64, t: f64) -> MoebiusElement {
        MoebiusElement::rotation(theta) * self.gen.exp(t)
    }

    /// Phase-space point `Φ_t(i, R_θ ξ₀)`, a tangent vector of length `λ`.
    pub fn state(&self, theta: f64, t: f64) -> HTangent {
        mobius_apply(&self.frame(theta, t), &HTangent::reference()).scaled(self.cfg.lambda())
    }

    pub fn psi(&self, theta: f64, t: f64) -> HPoint {
        self.frame(theta, t).apply(HPoint::i())
    }

    /// `φ(t) = d(i, Ψ(0, t))`.
    pub fn phi(&self, t: f64) -> f64 {
        hyp_dist(&HPoint::i(), &self.psi(0.0, t))
    }

    /// `|det dΨ| = 2E |sin(γt)|/γ`, with the phase taken as a fraction of
    /// the period so that it vanishes exactly at `0`, `T_E/2` and `T_E`.
    pub fn jacobian(&self, t: f64) -> f64 {
        2.0 * self.cfg.e() * sin_pi(2.0 * t / self.period).abs() / self.cfg.gamma()
    }

    /// Leading coefficient of `α ~ c/d` at the center: `√(2/E)`.
    pub fn center_constant(&self) -> f64 {
        (2.0 / self.cfg.e()).sqrt()
    }

    /// Leading coefficient of `α ~ c/√(R_E − d)` inside the caustic:
    /// `(1/E)(λ(B² − 2E)/(4B))^{1/2}`.
    pub fn boundary_constant(&self) -> f64 {
        let cfg = &self.cfg;
        (cfg.lambda() * cfg.kappa() / (4.0 * cfg.b())).sqrt() / cfg.e()
    }

    pub fn preimages(&self, y: &HPoint) -> Result<Vec<TorusPoint>> {
        let d = hyp_dist(&HPoint::i(), y);
        self.preimages_at(y, d)
    }

    fn preimages_at(&self, y: &HPoint, d: f64) -> Result<Vec<TorusPoint>> {
        if d < CENTER_TOLERANCE {
            return Err(Error::DegenerateCenter);
        }
        let r = self.radius;
        let half = 0.5 * self.period;
        if d > r + BOUNDARY_TOLERANCE * r.max(1.0) {
            return Ok(Vec::new());
        }
        let times = if (d - r).abs() <= BOUNDARY_TOLERANCE * r.max(1.0) || self.phi(half) <= d {
            vec![half]
        } else {
            let f = |t: f64| self.phi(t) - d;
            let t1 = bisect(f, 0.0, half);
            let t2 = bisect(f, half, self.period);
            if (t2 - t1).abs() < MERGE_TOLERANCE {
                vec![0.5 * (t1 + t2)]
            } else {
                vec![t1, t2]
            }
        };
        let target = y.polar_angle();
        Ok(times
            .into_iter()
            .map(|t| TorusPoint::new(target - self.psi(0.0, t).polar_angle(), t, self.period))
            .collect())
    }

    pub fn density(&self, y: &HPoint) -> Result<DensitySample> {
        self.density_with_bands(y, &BandWidths::default())
    }

    pub fn density_with_bands(&self, y: &HPoint, bands: &BandWidths) -> Result<DensitySample> {
        let d = hyp_dist(&HPoint::i(), y);
        let preimages = self.preimages_at(y, d)?;
        let r = self.radius;
        let flag = if preimages.is_empty() {
            DensityFlag::Outside
        } else if d < bands.center * r {
            DensityFlag::NearCenter
        } else if (d - r).abs() < bands.boundary * r {
            DensityFlag::NearBoundary
        } else {
            DensityFlag::Regular
        };
        let alpha_raw: f64 = preimages.iter().map(|p| self.jacobian(p.t).recip()).sum();
        Ok(DensitySample {
            point: *y,
            alpha_raw,
            alpha_normalized: alpha_raw / self.total_mass(),
            preimages,
            flag,
        })
    }

    /// `α` at hyperbolic distance `r` from the center.
    pub fn radial_density(&self, r: f64) -> Result<f64> {
        Ok(self.density(&HPoint::from_polar(r, 0.0))?.alpha_raw)
    }

    /// `∫ α dA` over the disk of radius `R_E`, in geodesic polar coordinates.
    ///
    /// Bands of width [`MASS_EXCISION`] at the center and at the caustic are
    /// integrated from the leading-order singular behaviour; the rest uses
    /// composite Simpson with `resolution` panels on each of two pieces, the
    /// outer one in the variable `u = √(R_E − r)` which removes the
    /// inverse-square-root singularity.
    pub fn density_mass(&self, resolution: usize) -> Result<f64> {
        if resolution < 64 {
            return Err(Error::ResolutionTooCoarse(resolution));
        }
        let r = self.radius;
        let delta = MASS_EXCISION.min(0.25 * r);
        let center_band = TAU * self.center_constant() * delta;
        let boundary_band = TAU * self.boundary_constant() * 2.0 * delta.sqrt() * r.sinh();

        let inner = simpson(
            |s| self.radial_density(s).unwrap_or(0.0) * TAU * s.sinh(),
            delta,
            0.5 * r,
            resolution,
        );
        let outer = simpson(
            |u| {
                let s = r - u * u;
                self.radial_density(s).unwrap_or(0.0) * TAU * s.sinh() * 2.0 * u
            },
            delta.sqrt(),
            (0.5 * r).sqrt(),
            resolution,
        );
        Ok(center_band + inner + outer + boundary_band)
    }

    /// `∫ α dA` over the annulus `r1 ≤ d ≤ r2`, clipped to the disk.
    ///
    /// Uses the substitution `r = R_E − u²` throughout, with the finite
    /// limits of the integrand substituted at `r = 0` and `r = R_E`.
    pub fn ring_integral(&self, r1: f64, r2: f64, panels: usize) -> f64 {
        let r = self.radius;
        let (lo, hi) = (r1.max(0.0), r2.min(r));
        if hi <= lo {
            return 0.0;
        }
        let integrand = |u: f64| {
            let s = r - u * u;
            if u < CENTER_TOLERANCE {
                return TAU * s.sinh() * 2.0 * self.boundary_constant();
            }
            if s < CENTER_TOLERANCE {
                return TAU * self.center_constant() * 2.0 * u;
            }
            self.radial_density(s).unwrap_or(0.0) * TAU * s.sinh() * 2.0 * u
        };
        simpson(integrand, (r - hi).sqrt(), (r - lo).sqrt(), panels)
    }

    /// Log–log slopes and leading constants of `α` at both singularities,
    /// sampled at distances `10⁻³ … 10⁻⁶` from the singular set.
    pub fn exponent_fits(&self) -> Result<ExponentFits> {
        let r = self.radius;
        let offsets = [1e-3, 1e-4, 1e-5, 1e-6];
        let center: Vec<f64> = offsets
            .iter()
            .map(|&d| self.radial_density(d))
            .collect::<Result<_>>()?;
        let boundary: Vec<f64> = offsets
            .iter()
            .map(|&d| self.radial_density(r - d))
            .collect::<Result<_>>()?;
        let last = offsets.len() - 1;
        Ok(ExponentFits {
            offsets: offsets.to_vec(),
            center_slope: log_log_slope(&offsets, &center),
            boundary_slope: log_log_slope(&offsets, &boundary),
            center_product: center[last] * offsets[last],
            boundary_product: boundary[last] * offsets[last].sqrt(),
            center_constant: self.center_constant(),
            boundary_constant: self.boundary_constant(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFits {
    pub offsets: Vec<f64>,
    pub center_slope: f64,
    pub boundary_slope: f64,
    /// `α·d` at the smallest offset.
    pub center_product: f64,
    /// `α·√(R_E − d)` at the smallest offset.
    pub boundary_product: f64,
    pub center_constant: f64,
    pub boundary_constant: f64,
}

/// `sin(πx)`, exact at integers and half-integers.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let s = (PI * (x - n)).sin();
    if n.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

pub fn psi(cfg: &MagneticConfig, theta: f64, t: f64) -> Result<HPoint> {
    Ok(ZonalTorus::new(cfg)?.psi(theta, t))
}

/// `R_E`, with `cosh R_E = (B² + 2E)/(B² − 2E)`; evaluated as
/// `2 asinh √(2E/(B² − 2E))` to stay accurate at small `E`.
pub fn radius(cfg: &MagneticConfig) -> Result<f64> {
    if cfg.regime() != Regime::Subcritical {
        return Err(Error::InvalidConfig(
            "radius requires E below the critical energy".into(),
        ));
    }
    Ok(2.0 * (2.0 * cfg.e() / cfg.kappa()).sqrt().asinh())
}

pub fn phi_profile(cfg: &MagneticConfig, t: f64) -> Result<f64> {
    Ok(ZonalTorus::new(cfg)?.phi(t))
}

pub fn jacobian(cfg: &MagneticConfig, _theta: f64, t: f64) -> Result<f64> {
    Ok(ZonalTorus::new(cfg)?.jacobian(t))
}

pub fn preimages_cover(cfg: &MagneticConfig, y: &HPoint) -> Result<Vec<TorusPoint>> {
    ZonalTorus::new(cfg)?.preimages(y)
}

pub fn density_cover(cfg: &MagneticConfig, y: &HPoint) -> Result<DensitySample> {
    ZonalTorus::new(cfg)?.density(y)
}

pub fn density_mass(cfg: &MagneticConfig, resolution: usize) -> Result<f64> {
    ZonalTorus::new(cfg)?.density_mass(resolution)
}

/// Square grid of cell centers in the Poincaré disk, `[−h, h]²` with
/// `h = tanh(extent/2)`, i.e. the box circumscribing the hyperbolic disk of
/// radius `extent` about the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Hyperbolic radius covered by the grid.
    pub extent: f64,
}

impl GridSpec {
    pub fn half_width(&self) -> f64 {
        (0.5 * self.extent).tanh()
    }

    /// Disk coordinates of cell `(ix, iy)`.
    pub fn cell(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = self.half_width();
        let step = 2.0 * h / self.n as f64;
        (-h + (ix as f64 + 0.5) * step, -h + (iy as f64 + 0.5) * step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub d_to_center: f64,
    pub alpha_raw: f64,
    pub alpha_normalized: f64,
    pub n_preimages: usize,
    pub flag: DensityFlag,
}

impl GridRow {
    /// Row for a cell whose disk coordinate lies on or beyond the unit circle.
    pub fn off_model(x: f64, y: f64) -> Self {
        GridRow {
            x,
            y,
            d_to_center: f64::INFINITY,
            alpha_raw: 0.0,
            alpha_normalized: 0.0,
            n_preimages: 0,
            flag: DensityFlag::Outside,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub bands: BandWidths,
    /// Row-major, `y` outer.
    pub rows: Vec<GridRow>,
}

/// Evaluates `f` on every cell, in parallel by grid row; the result does
/// not depend on scheduling.
pub fn evaluate_grid<F>(spec: GridSpec, bands: BandWidths, f: F) -> DensityGrid
where
    F: Fn(f64, f64) -> GridRow + Sync,
{
    let rows = (0..spec.n)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let f = &f;
            (0..spec.n).map(move |ix| {
                let (x, y) = spec.cell(ix, iy);
                f(x, y)
            })
        })
        .collect();
    DensityGrid { spec, bands, rows }
}

/// Cover density on a grid. The cell containing the center is reported
/// with infinite density.
pub fn density_grid_cover(torus: &ZonalTorus, spec: GridSpec, bands: BandWidths) -> DensityGrid {
    evaluate_grid(spec, bands, |x, y| {
        let Ok(p) = HPoint::from_disk(crate::Complex::new(x, y)) else {
            return GridRow::off_model(x, y);
        };
        let d = hyp_dist(&HPoint::i(), &p);
        match torus.density_with_bands(&p, &bands) {
            Ok(s) => GridRow {
                x,
                y,
                d_to_center: d,
                alpha_raw: s.alpha_raw,
                alpha_normalized: s.alpha_normalized,
                n_preimages: s.preimages.len(),
                flag: s.flag,
            },
            Err(_) => GridRow {
                x,
                y,
                d_to_center: d,
                alpha_raw: f64::INFINITY,
                alpha_normalized: f64::INFINITY,
                n_preimages: 0,
                flag: DensityFlag::NearCenter,
            },
        }
    })
}

pub fn write_grid_csv<W: std::io::Write>(out: W, grid: &DensityGrid) -> Result<()> {
    use crate::io::fmt_f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "x",
        "y",
        "d_to_center",
        "alpha_raw",
        "alpha_normalized",
        "n_preimages",
        "flag",
    ])?;
    for r in &grid.rows {
        w.write_record([
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(r.d_to_center),
            fmt_f64(r.alpha_raw),
            fmt_f64(r.alpha_normalized),
            r.n_preimages.to_string(),
            r.flag.as_str().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex;

    fn reference() -> ZonalTorus {
        ZonalTorus::new(&MagneticConfig::new(1.0, 0.25).unwrap()).unwrap()
    }

    #[test]
    fn undefined_outside_open_interval() {
        for e in [0.0, 0.5, 0.8] {
            let cfg = MagneticConfig::new(1.0, e).unwrap();
            assert_eq!(ZonalTorus::new(&cfg).unwrap_err(), Error::TorusUndefined);
        }
    }

    #[test]
    fn radius_values() {
        let r = |b, e| radius(&MagneticConfig::new(b, e).unwrap()).unwrap();
        assert_eq!(r(1.0, 0.0), 0.0);
        assert!((r(1.0, 0.25) - 3f64.acosh()).abs() < 1e-14);
        assert!(r(1.0, 0.49999) > 10.0);
        assert!(radius(&MagneticConfig::new(1.0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn psi_landmarks() {
        let tor = reference();
        for theta in [0.0, 1.0, 4.0] {
            assert!((tor.psi(theta, 0.0).z - Complex::i()).norm() < 1e-15);
        }
        let far = tor.psi(0.0, 0.5 * tor.period());
        let expected = Complex::new(std::f64::consts::SQRT_2, 0.5) / 1.5;
        assert!((far.z - expected).norm() < 1e-12);
    }

    #[test]
    fn jacobian_landmarks() {
        let tor = reference();
        assert_eq!(tor.jacobian(0.5 * tor.period()), 0.0);
        assert_eq!(tor.jacobian(0.0), 0.0);
        let q = tor.jacobian(0.25 * tor.period());
        assert!((q - 0.5 / 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn preimage_counts() {
        let tor = reference();
        let half = 0.5 * tor.period();
        let boundary = tor.psi(0.0, half);
        assert_eq!(tor.preimages(&boundary).unwrap().len(), 1);

        let y = tor.psi(0.3, tor.period() / 5.0);
        let pre = tor.preimages(&y).unwrap();
        assert_eq!(pre.len(), 2);
        assert!(pre
            .iter()
            .any(|p| (p.theta - 0.3).abs() < 1e-9 && (p.t - tor.period() / 5.0).abs() < 1e-9));

        let outside = HPoint::from_polar(tor.radius() + 0.1, 0.4);
        assert!(tor.preimages(&outside).unwrap().is_empty());
        assert_eq!(tor.preimages(&HPoint::i()).unwrap_err(), Error::DegenerateCenter);
    }

    #[test]
    fn outside_has_zero_density() {
        let tor = reference();
        let s = tor.density(&HPoint::from_polar(tor.radius() + 0.05, 2.0)).unwrap();
        assert_eq!(s.alpha_raw, 0.0);
        assert_eq!(s.flag, DensityFlag::Outside);
        assert!(s.preimages.is_empty());
    }

    #[test]
    fn flags_follow_bands() {
        let tor = reference();
        let r = tor.radius();
        let flag = |d: f64| tor.density(&HPoint::from_polar(d, 0.0)).unwrap().flag;
        assert_eq!(flag(0.5e-3 * r), DensityFlag::NearCenter);
        assert_eq!(flag(0.5 * r), DensityFlag::Regular);
        assert_eq!(flag(r * (1.0 - 0.5e-3)), DensityFlag::NearBoundary);
    }

    #[test]
    fn mass_matches_torus_volume() {
        let tor = reference();
        let mass = tor.density_mass(256).unwrap();
        assert!((mass / tor.total_mass() - 1.0).abs() < 1e-3, "{mass}");
        assert_eq!(tor.density_mass(63), Err(Error::ResolutionTooCoarse(63)));
        let annulus = tor.ring_integral(tor.radius(), tor.radius() + 0.1, 64);
        assert_eq!(annulus, 0.0);
    }

    #[test]
    fn ring_integrals_add_up() {
        let tor = reference();
        let r = tor.radius();
        let whole = tor.ring_integral(0.0, r, 512);
        assert!((whole / tor.total_mass() - 1.0).abs() < 1e-6, "{whole}");
        let parts: f64 = (0..8)
            .map(|k| tor.ring_integral(k as f64 * r / 8.0, (k + 1) as f64 * r / 8.0, 64))
            .sum();
        assert!((parts / whole - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sin_pi_is_exact_at_half_turns() {
        assert_eq!(sin_pi(1.0), 0.0);
        assert_eq!(sin_pi(2.0), 0.0);
        assert_eq!(sin_pi(0.5), 1.0);
        assert_eq!(sin_pi(1.5), -1.0);
        assert!((sin_pi(0.3) - (0.3 * PI).sin()).abs() < 1e-15);
    }
}
