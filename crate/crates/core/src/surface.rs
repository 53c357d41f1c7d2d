//! The Bolza surface as a quotient of the hyperbolic plane by the group
//! pairing opposite sides of the regular octagon with angles `π/4`, centered
//! at `i`. Densities on the surface are cover densities summed over the
//! translates of the octagon that can meet the caustic disk.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{generator, MagneticConfig, Regime};
use crate::hyperbolic::{frame_of, hyp_dist, Complex, HPoint, HTangent, MoebiusElement};
use crate::io::fmt_f64;
use crate::torus::{
    evaluate_grid, BandWidths, DensityFlag, DensityGrid, DensitySample, GridRow, GridSpec,
    ZonalTorus,
};

/// Distance decrease a generator must achieve for reduction to apply it.
pub const REDUCTION_EPS: f64 = 1e-12;

pub const MAX_REDUCTION_STEPS: usize = 100_000;

/// Largest disk radius accepted by [`FuchsianGroup::translates_meeting_disk`].
pub const ENUMERATION_CAP: f64 = 6.0;

/// Genus of the Bolza surface.
pub const GENUS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuchsianGroup {
    /// Side pairings; `generators[k + 4]` is the inverse of `generators[k]`
    /// and translates the octagon across its side in direction `kπ/4`.
    pub generators: Vec<MoebiusElement>,
    /// Generator indices whose ordered product is the identity.
    pub relation: Vec<usize>,
    /// Octagon vertices, counterclockwise from polar angle `π/8`.
    pub vertices: Vec<HPoint>,
    pub inradius: f64,
    pub circumradius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReduction {
    pub representative: HPoint,
    /// Generators in the order applied: `representative = g[w_n]⋯g[w_1]·z`.
    pub word: Vec<usize>,
    /// Product of the word, mapping the input to the representative.
    pub element: MoebiusElement,
}

/// The Bolza group. In a regular octagon with interior angles `π/4` the
/// inradius `ρ` satisfies `cosh ρ = cot(π/8)` and the circumradius
/// `cosh R = cot²(π/8)`; each side pairing translates by `2ρ` along the
/// perpendicular bisector of a pair of opposite sides.
pub fn bolza_group() -> FuchsianGroup {
    let cot = 1.0 / FRAC_PI_8.tan();
    let inradius = cot.acosh();
    let circumradius = (cot * cot).acosh();
    let generators = (0..8)
        .map(|k| MoebiusElement::translation(2.0 * inradius, k as f64 * FRAC_PI_4))
        .collect();
    let vertices = (0..8)
        .map(|k| HPoint::from_polar(circumradius, FRAC_PI_8 + k as f64 * FRAC_PI_4))
        .collect();
    FuchsianGroup {
        generators,
        relation: vec![0, 5, 2, 7, 4, 1, 6, 3],
        vertices,
        inradius,
        circumradius,
    }
}

impl FuchsianGroup {
    pub fn word_element(&self, word: &[usize]) -> MoebiusElement {
        word.iter()
            .fold(MoebiusElement::IDENTITY, |acc, &k| acc * self.generators[k])
    }

    /// Entrywise distance of the relation product from `±I`.
    pub fn relation_residual(&self) -> f64 {
        self.word_element(&self.relation)
            .distance_up_to_sign(&MoebiusElement::IDENTITY)
    }

    /// Index of the inverse generator.
    pub fn inverse_index(k: usize) -> usize {
        (k + 4) % 8
    }

    /// Hyperbolic area of the octagon, summed over the eight triangles
    /// `(i, v_k, v_{k+1})` with angles from the hyperbolic law of cosines.
    pub fn domain_area(&self) -> f64 {
        let center = HPoint::i();
        let n = self.vertices.len();
        (0..n)
            .map(|k| {
                let (p, q) = (&self.vertices[k], &self.vertices[(k + 1) % n]);
                let a = hyp_dist(p, q);
                let b = hyp_dist(&center, q);
                let c = hyp_dist(&center, p);
                let angle = |opp: f64, s1: f64, s2: f64| {
                    ((s1.cosh() * s2.cosh() - opp.cosh()) / (s1.sinh() * s2.sinh()))
                        .clamp(-1.0, 1.0)
                        .acos()
                };
                PI - angle(a, b, c) - angle(b, a, c) - angle(c, a, b)
            })
            .sum()
    }

    /// Distance from the center to the octagon boundary in direction `ψ`.
    pub fn boundary_radius(&self, psi: f64) -> f64 {
        let off = (psi.rem_euclid(FRAC_PI_4) - FRAC_PI_8).abs();
        let off = FRAC_PI_8 - off;
        (self.inradius.tanh() / off.cos()).atanh()
    }

    pub fn contains(&self, p: &HPoint) -> bool {
        let r = hyp_dist(&HPoint::i(), p);
        r <= self.boundary_radius(p.polar_angle()) + 1e-12
    }

    /// Greedy distance descent to the octagon.
    pub fn reduce(&self, z: &HPoint) -> Result<DomainReduction> {
        let center = HPoint::i();
        let mut point = *z;
        let mut element = MoebiusElement::IDENTITY;
        let mut word = Vec::new();
        let mut current = hyp_dist(&center, &point);
        for _ in 0..MAX_REDUCTION_STEPS {
            let best = self
                .generators
                .iter()
                .enumerate()
                .map(|(k, g)| (k, hyp_dist(&center, &g.apply(point))))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("eight generators");
            if best.1 >= current - REDUCTION_EPS {
                return Ok(DomainReduction {
                    representative: point,
                    word,
                    element,
                });
            }
            let g = self.generators[best.0];
            point = g.apply(point);
            element = g * element;
            word.push(best.0);
            current = best.1;
        }
        Err(Error::ReductionFailed(MAX_REDUCTION_STEPS))
    }

    /// Moves a frame so that its base point lies in the octagon.
    pub fn reduce_frame(&self, g: &MoebiusElement) -> Result<MoebiusElement> {
        let r = self.reduce(&g.apply(HPoint::i()))?;
        Ok(r.element * *g)
    }

    /// All group elements `g` whose translate `g·D` of the octagon can meet
    /// the disk of radius `radius` about `i`, i.e. `d(i, g·i) ≤ radius + R`
    /// with `R` the circumradius.
    ///
    /// Breadth-first search over the Cayley graph; nodes up to one octagon
    /// diameter beyond that bound are expanded, which is enough for every
    /// kept element to be reached through a chain of adjacent octagons.
    /// Sorted by distance of `g·i` from `i`, identity first.
    pub fn translates_meeting_disk(&self, radius: f64) -> Result<Vec<MoebiusElement>> {
        if !(radius < ENUMERATION_CAP) {
            return Err(Error::DiskTooLarge(radius));
        }
        let keep = radius.max(0.0) + self.circumradius;
        let expand = keep + 2.0 * self.circumradius;
        let center = HPoint::i();

        let mut seen = OrbitIndex::default();
        let mut kept = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(center);
        queue.push_back((MoebiusElement::IDENTITY, 0.0));
        while let Some((g, d)) = queue.pop_front() {
            if d <= keep {
                kept.push((d, g));
            }
            for s in &self.generators {
                let h = g * *s;
                let image = h.apply(center);
                let dh = hyp_dist(&center, &image);
                if dh <= expand && seen.insert(image) {
                    queue.push_back((h, dh));
                }
            }
        }
        kept.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then_with(|| x.1.entries().partial_cmp(&y.1.entries()).unwrap())
        });
        Ok(kept.into_iter().map(|(_, g)| g).collect())
    }

    pub fn export_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Export<'a> {
            generators: Vec<[String; 4]>,
            relation: &'a [usize],
            relation_residual: f64,
            vertices_disk: Vec<[String; 2]>,
            inradius: f64,
            circumradius: f64,
            area: f64,
        }
        let export = Export {
            generators: self
                .generators
                .iter()
                .map(|g| g.entries().map(fmt_f64))
                .collect(),
            relation: &self.relation,
            relation_residual: self.relation_residual(),
            vertices_disk: self
                .vertices
                .iter()
                .map(|v| {
                    let w = v.to_disk();
                    [fmt_f64(w.re), fmt_f64(w.im)]
                })
                .collect(),
            inradius: self.inradius,
            circumradius: self.circumradius,
            area: self.domain_area(),
        };
        crate::io::write_json(path, &export)
    }
}

/// Set of orbit points `g·i`, bucketed by `(ln y, x/y)` so that nearby
/// points land in neighbouring buckets.
#[derive(Default)]
struct OrbitIndex {
    buckets: HashMap<(i64, i64), Vec<HPoint>>,
}

impl OrbitIndex {
    const MATCH: f64 = 1e-3;

    fn key(p: &HPoint) -> (i64, i64) {
        (
            (4.0 * p.z.im.ln()).round() as i64,
            (4.0 * p.z.re / p.z.im).round() as i64,
        )
    }

    /// Returns `false` if an equal point is already present.
    fn insert(&mut self, p: HPoint) -> bool {
        let (kx, ky) = Self::key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.buckets.get(&(kx + dx, ky + dy)) {
                    if bucket.iter().any(|q| hyp_dist(q, &p) < Self::MATCH) {
                        return false;
                    }
                }
            }
        }
        self.buckets.entry((kx, ky)).or_default().push(p);
        true
    }
}

/// `2B(g − 1)` must be an integer for the line bundle to exist.
pub fn check_chern(cfg: &MagneticConfig) -> Result<()> {
    let c = 2.0 * cfg.b() * (GENUS - 1) as f64;
    if (c - c.round()).abs() > 1e-9 {
        return Err(Error::ChernConstraint(c));
    }
    Ok(())
}

/// Surface density at one energy: the zonal torus of the cover folded into
/// the octagon.
#[derive(Debug, Clone)]
pub struct SurfaceDensity {
    group: FuchsianGroup,
    torus: ZonalTorus,
    translates: Vec<MoebiusElement>,
}

impl SurfaceDensity {
    pub fn new(group: &FuchsianGroup, cfg: &MagneticConfig) -> Result<Self> {
        check_chern(cfg)?;
        let torus = ZonalTorus::new(cfg)?;
        let translates = group.translates_meeting_disk(torus.radius())?;
        Ok(SurfaceDensity {
            group: group.clone(),
            torus,
            translates,
        })
    }

    pub fn torus(&self) -> &ZonalTorus {
        &self.torus
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.group
    }

    pub fn translates(&self) -> &[MoebiusElement] {
        &self.translates
    }

    pub fn density(&self, y: &HPoint) -> Result<DensitySample> {
        self.density_with_bands(y, &BandWidths::default())
    }

    /// Sum of cover densities at all lifts `g·y` of the reduced point.
    pub fn density_with_bands(&self, y: &HPoint, bands: &BandWidths) -> Result<DensitySample> {
        let rep = self.group.reduce(y)?.representative;
        let reach = self.torus.radius() * (1.0 + 1e-9) + 1e-9;
        let center = HPoint::i();
        let mut alpha_raw = 0.0;
        let mut preimages = Vec::new();
        let mut flag = DensityFlag::Outside;
        for g in &self.translates {
            let lift = g.apply(rep);
            if hyp_dist(&center, &lift) > reach {
                continue;
            }
            let s = self.torus.density_with_bands(&lift, bands)?;
            if s.flag == DensityFlag::Outside {
                continue;
            }
            alpha_raw += s.alpha_raw;
            preimages.extend(s.preimages);
            flag = match (flag, s.flag) {
                (DensityFlag::NearCenter, _) | (_, DensityFlag::NearCenter) => {
                    DensityFlag::NearCenter
                }
                (DensityFlag::NearBoundary, _) | (_, DensityFlag::NearBoundary) => {
                    DensityFlag::NearBoundary
                }
                _ => DensityFlag::Regular,
            };
        }
        Ok(DensitySample {
            point: rep,
            alpha_raw,
            alpha_normalized: alpha_raw / self.torus.total_mass(),
            preimages,
            flag,
        })
    }

    /// `∫ α dA` over the octagon, by the midpoint rule in geodesic polar
    /// coordinates; `n_radial` cells per ray and `n_angular` rays per
    /// sixteenth of the octagon.
    pub fn mass(&self, n_radial: usize, n_angular: usize) -> f64 {
        use rayon::prelude::*;
        let sector = FRAC_PI_8;
        let rays = 16 * n_angular;
        let dpsi = sector / n_angular as f64;
        let per_ray: Vec<f64> = (0..rays)
            .into_par_iter()
            .map(|j| {
                let psi = (j as f64 + 0.5) * dpsi;
                let rmax = self.group.boundary_radius(psi);
                let dr = rmax / n_radial as f64;
                (0..n_radial)
                    .map(|i| {
                        let r = (i as f64 + 0.5) * dr;
                        let a = self
                            .density(&HPoint::from_polar(r, psi))
                            .map(|s| s.alpha_raw)
                            .unwrap_or(0.0);
                        a * r.sinh() * dr
                    })
                    .sum::<f64>()
                    * dpsi
            })
            .collect();
        per_ray.iter().sum()
    }
}

pub fn density_surface(
    group: &FuchsianGroup,
    cfg: &MagneticConfig,
    y: &HPoint,
) -> Result<DensitySample> {
    SurfaceDensity::new(group, cfg)?.density(y)
}

/// Surface density on a disk grid; every cell is first reduced to the
/// octagon, so cells outside it repeat values from inside.
pub fn density_grid_surface(
    surface: &SurfaceDensity,
    spec: GridSpec,
    bands: BandWidths,
) -> DensityGrid {
    evaluate_grid(spec, bands, |x, y| {
        let Ok(p) = HPoint::from_disk(Complex::new(x, y)) else {
            return GridRow::off_model(x, y);
        };
        match surface.density_with_bands(&p, &bands) {
            Ok(s) => GridRow {
                x,
                y,
                d_to_center: hyp_dist(&HPoint::i(), &s.point),
                alpha_raw: s.alpha_raw,
                alpha_normalized: s.alpha_normalized,
                n_preimages: s.preimages.len(),
                flag: s.flag,
            },
            Err(_) => GridRow {
                x,
                y,
                d_to_center: 0.0,
                alpha_raw: f64::INFINITY,
                alpha_normalized: f64::INFINITY,
                n_preimages: 0,
                flag: DensityFlag::NearCenter,
            },
        }
    })
}

/// A function on the surface, evaluated at points of the octagon.
pub trait Observable: Sync {
    fn value(&self, p: &HPoint) -> f64;
}

impl<F: Fn(&HPoint) -> f64 + Sync> Observable for F {
    fn value(&self, p: &HPoint) -> f64 {
        self(p)
    }
}

/// Smooth bump `exp(1 − 1/(1 − (d/r₀)²))` in the distance `d` from the
/// center, supported in `d < r₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub r0: f64,
}

impl Observable for Bump {
    fn value(&self, p: &HPoint) -> f64 {
        let s = hyp_dist(&HPoint::i(), p) / self.r0;
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }
}

/// Values on a regular grid of nodes over the bounding box of the octagon
/// in the disk, interpolated bilinearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableGrid {
    pub n: usize,
    pub half_width: f64,
    /// Row-major, `y` outer.
    pub values: Vec<f64>,
    pub inside: Vec<bool>,
}

impl ObservableGrid {
    pub fn sample<O: Observable + ?Sized>(group: &FuchsianGroup, f: &O, n: usize) -> Self {
        let half_width = (0.5 * group.circumradius).tanh() * (1.0 + 1e-9);
        let mut values = Vec::with_capacity(n * n);
        let mut inside = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = Self::node(half_width, n, ix, iy);
                match HPoint::from_disk(Complex::new(x, y)) {
                    Ok(p) => {
                        values.push(f.value(&p));
                        inside.push(group.contains(&p));
                    }
                    Err(_) => {
                        values.push(0.0);
                        inside.push(false);
                    }
                }
            }
        }
        ObservableGrid {
            n,
            half_width,
            values,
            inside,
        }
    }

    fn node(h: f64, n: usize, ix: usize, iy: usize) -> (f64, f64) {
        let step = 2.0 * h / (n - 1) as f64;
        (-h + ix as f64 * step, -h + iy as f64 * step)
    }

    /// CSV with columns `x, y, value, inside` in disk coordinates.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "value", "inside"])?;
        for iy in 0..self.n {
            for ix in 0..self.n {
                let (x, y) = Self::node(self.half_width, self.n, ix, iy);
                let k = iy * self.n + ix;
                w.write_record([
                    fmt_f64(x),
                    fmt_f64(y),
                    fmt_f64(self.values[k]),
                    u8::from(self.inside[k]).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written by [`ObservableGrid::write_csv`]: a square of
    /// equally spaced nodes, `x` varying fastest.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut xs = Vec::new();
        let mut values = Vec::new();
        let mut inside = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("missing column {i}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(e.to_string()))
            };
            xs.push(field(0)?);
            values.push(field(2)?);
            inside.push(field(3)? != 0.0);
        }
        let n = (values.len() as f64).sqrt().round() as usize;
        if n < 2 || n * n != values.len() {
            return Err(Error::Parse(format!(
                "expected a square grid, got {} nodes",
                values.len()
            )));
        }
        let half_width = -xs[0];
        if !(half_width > 0.0) || ((xs[n - 1] - half_width).abs() > 1e-9 * half_width) {
            return Err(Error::Parse("grid is not symmetric about the origin".into()));
        }
        Ok(ObservableGrid {
            n,
            half_width,
            values,
            inside,
        })
    }
}

impl Observable for ObservableGrid {
    fn value(&self, p: &HPoint) -> f64 {
        let w = p.to_disk();
        let step = 2.0 * self.half_width / (self.n - 1) as f64;
        let fx = ((w.re + self.half_width) / step).clamp(0.0, (self.n - 1) as f64);
        let fy = ((w.im + self.half_width) / step).clamp(0.0, (self.n - 1) as f64);
        let ix = (fx.floor() as usize).min(self.n - 2);
        let iy = (fy.floor() as usize).min(self.n - 2);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let at = |i: usize, j: usize| self.values[j * self.n + i];
        (1.0 - ty) * ((1.0 - tx) * at(ix, iy) + tx * at(ix + 1, iy))
            + ty * ((1.0 - tx) * at(ix, iy + 1) + tx * at(ix + 1, iy + 1))
    }
}

/// Mean of `f` over the octagon with respect to hyperbolic area, by the
/// midpoint rule in geodesic polar coordinates.
pub fn area_average<O: Observable + ?Sized>(
    group: &FuchsianGroup,
    f: &O,
    n_radial: usize,
    n_angular: usize,
) -> f64 {
    let dpsi = FRAC_PI_8 / n_angular as f64;
    let mut integral = 0.0;
    let mut area = 0.0;
    for j in 0..16 * n_angular {
        let psi = (j as f64 + 0.5) * dpsi;
        let rmax = group.boundary_radius(psi);
        let dr = rmax / n_radial as f64;
        for i in 0..n_radial {
            let r = (i as f64 + 0.5) * dr;
            let w = r.sinh() * dr * dpsi;
            integral += f.value(&HPoint::from_polar(r, psi)) * w;
            area += w;
        }
    }
    integral / area
}

/// Time average of `f` along the critical-energy trajectory from `p0`,
/// `(1/T)∫₀ᵀ f(π Φ_t p0) dt`, by the trapezoid rule with `10⁵` steps. The
/// frame is advanced by the exact one-step exponential and folded back into
/// the octagon after every step.
pub fn birkhoff_average<O: Observable + ?Sized>(
    group: &FuchsianGroup,
    cfg: &MagneticConfig,
    f: &O,
    horizon: f64,
    p0: &HTangent,
) -> Result<f64> {
    if (cfg.e() - cfg.critical_energy()).abs() > 1e-9 || cfg.regime() != Regime::Critical {
        return Err(Error::NotCritical);
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "averaging time must be positive, got {horizon}"
        )));
    }
    const STEPS: usize = 100_000;
    let h = horizon / STEPS as f64;
    let step = generator(cfg).exp(h);
    let mut frame = group.reduce_frame(&frame_of(&p0.scaled(cfg.lambda().recip()))?)?;
    let sample = |g: &MoebiusElement| f.value(&g.apply(HPoint::i()));
    let mut sum = 0.5 * sample(&frame);
    for k in 1..=STEPS {
        frame = group.reduce_frame(&(frame * step))?;
        let v = sample(&frame);
        sum += if k == STEPS { 0.5 * v } else { v };
    }
    Ok(sum * h / horizon)
}

/// A unit-speed initial condition at the critical energy: base point at
/// polar coordinates `(r, ψ)`, direction rotated by `angle` from vertical.
pub fn initial_condition(cfg: &MagneticConfig, r: f64, psi: f64, angle: f64) -> HTangent {
    let p = HPoint::from_polar(r, psi);
    let v = Complex::from_polar(cfg.lambda() * p.z.im, angle) * Complex::i();
    HTangent::new(p, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_geometry() {
        let g = bolza_group();
        assert!(g.relation_residual() < 1e-9);
        let trace = 2.0 * (1.0 + 2f64.sqrt());
        for s in &g.generators {
            assert!((s.trace().abs() - trace).abs() < 1e-12);
        }
        for k in 0..8 {
            let prod = g.generators[k] * g.generators[FuchsianGroup::inverse_index(k)];
            assert!(prod.approx_eq(&MoebiusElement::IDENTITY, 1e-12));
        }
        assert!((g.domain_area() - 4.0 * PI).abs() < 1e-9);
        assert!((g.inradius - 1.528570919480998).abs() < 1e-12);
    }

    #[test]
    fn side_pairings_carry_vertices_to_vertices() {
        let g = bolza_group();
        for (k, s) in g.generators.iter().enumerate() {
            let on_vertex = g
                .vertices
                .iter()
                .filter(|v| {
                    let image = s.apply(**v);
                    g.vertices.iter().any(|w| hyp_dist(w, &image) < 1e-9)
                })
                .count();
            // Only the two endpoints of the paired side land on vertices.
            assert_eq!(on_vertex, 2, "generator {k}");
        }
    }

    #[test]
    fn boundary_radius_landmarks() {
        let g = bolza_group();
        assert!((g.boundary_radius(0.0) - g.inradius).abs() < 1e-12);
        assert!((g.boundary_radius(FRAC_PI_8) - g.circumradius).abs() < 1e-9);
        assert!(g.contains(&HPoint::from_polar(1.5, 0.0)));
        assert!(!g.contains(&HPoint::from_polar(1.6, 0.0)));
    }

    #[test]
    fn reduction_of_domain_points_is_trivial() {
        let g = bolza_group();
        let p = HPoint::from_polar(0.8, 1.0);
        let r = g.reduce(&p).unwrap();
        assert!(r.word.is_empty());
        assert_eq!(r.representative, p);
    }

    #[test]
    fn small_disk_meets_one_translate() {
        let g = bolza_group();
        let t = g.translates_meeting_disk(0.1).unwrap();
        // The octagon itself, plus any neighbour whose center is within
        // R + 0.1; opposite-side neighbours sit at 2ρ ≈ 3.06 > 2.55.
        assert_eq!(t.len(), 1);
        assert!(g.translates_meeting_disk(6.0).is_err());
    }

    #[test]
    fn chern_constraint() {
        assert!(check_chern(&MagneticConfig::new(1.5, 0.1).unwrap()).is_ok());
        assert!(matches!(
            check_chern(&MagneticConfig::new(1.2, 0.1).unwrap()),
            Err(Error::ChernConstraint(_))
        ));
    }

    #[test]
    fn birkhoff_needs_critical_energy() {
        let g = bolza_group();
        let cfg = MagneticConfig::new(1.0, 0.25).unwrap();
        let p = initial_condition(&cfg, 0.0, 0.0, 0.0);
        let one = |_: &HPoint| 1.0;
        assert_eq!(
            birkhoff_average(&g, &cfg, &one, 10.0, &p),
            Err(Error::NotCritical)
        );
        let cfg = MagneticConfig::critical(1.0).unwrap();
        let p = initial_condition(&cfg, 0.3, 0.2, 0.1);
        let avg = birkhoff_average(&g, &cfg, &one, 10.0, &p).unwrap();
        assert!((avg - 1.0).abs() < 1e-12);
    }
}
