//! Monte Carlo check of the torus density: sample `(θ, t)` uniformly, push
//! forward through `Ψ`, bin by distance from the center and compare with
//! ring averages of the closed-form `α`.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded by
//! `seed_from_u64(seed)`. Sample `j` consumes the two 64-bit outputs at word
//! position `4j` of the stream and turns each into a double in `[0, 1)` as
//! `(x >> 11)·2⁻⁵³`; the first gives `θ`, the second `t`. Workers therefore
//! own disjoint counter ranges and the histogram does not depend on how the
//! sample range is split.

use std::f64::consts::TAU;
use std::io::Write;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::MagneticConfig;
use crate::hyperbolic::{hyp_dist, HPoint};
use crate::io::fmt_f64;
use crate::numerics::log_log_slope;
use crate::torus::ZonalTorus;

pub const DEFAULT_RINGS: usize = 256;

/// Minimum sample count accepted by [`sample_pushforward`].
pub const MIN_SAMPLES: u64 = 10_000;

const CHUNK: u64 = 1 << 16;

/// Distances this far past `R_E` still count as on the disk.
const DISK_SLACK: f64 = 1e-9;

/// Uniform doubles from a seeded ChaCha20 stream.
pub struct UniformStream(ChaCha20Rng);

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Positions the stream at the start of sample `index` (two doubles per sample).
    pub fn at_sample(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_word_pos(4 * index as u128);
        UniformStream(rng)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Counts of `d(i, Ψ(θ, t))` in equal-width rings over `[0, R_E]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardHistogram {
    pub b: f64,
    pub e: f64,
    pub radius: f64,
    pub counts: Vec<u64>,
    /// Samples beyond `R_E + 10⁻⁹`; zero unless the flow is wrong.
    pub out_of_disk: u64,
    pub n: u64,
    /// Mass of one sample in `alpha_raw` units: `2π T_E / n`.
    pub sample_mass: f64,
}

impl PushforwardHistogram {
    fn empty(torus: &ZonalTorus, rings: usize, n: u64) -> Self {
        PushforwardHistogram {
            b: torus.cfg().b(),
            e: torus.cfg().e(),
            radius: torus.radius(),
            counts: vec![0; rings],
            out_of_disk: 0,
            n,
            sample_mass: torus.total_mass() / n as f64,
        }
    }

    pub fn ring_width(&self) -> f64 {
        self.radius / self.counts.len() as f64
    }

    pub fn ring_bounds(&self, j: usize) -> (f64, f64) {
        let w = self.ring_width();
        (j as f64 * w, (j + 1) as f64 * w)
    }

    /// Hyperbolic area `2π(cosh r₂ − cosh r₁)` of ring `j`.
    pub fn ring_area(&self, j: usize) -> f64 {
        let (lo, hi) = self.ring_bounds(j);
        // cosh a − cosh b = 2 sinh((a+b)/2) sinh((a−b)/2), without cancellation.
        TAU * 2.0 * (0.5 * (hi + lo)).sinh() * (0.5 * (hi - lo)).sinh()
    }

    /// Count divided by `n` and ring area, times `2π T_E`.
    pub fn density(&self, j: usize) -> f64 {
        self.counts[j] as f64 * self.sample_mass / self.ring_area(j)
    }

    fn add(&mut self, d: f64) {
        let rings = self.counts.len();
        if d > self.radius + DISK_SLACK {
            self.out_of_disk += 1;
            return;
        }
        let j = ((d / self.ring_width()) as usize).min(rings - 1);
        self.counts[j] += 1;
    }

    fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.out_of_disk += other.out_of_disk;
        self
    }
}

/// Uniform random sampling of the torus, `n` points from stream `seed`.
pub fn sample_pushforward(cfg: &MagneticConfig, n: u64, seed: u64) -> Result<PushforwardHistogram> {
    sample_pushforward_rings(cfg, n, seed, DEFAULT_RINGS)
}

pub fn sample_pushforward_rings(
    cfg: &MagneticConfig,
    n: u64,
    seed: u64,
    rings: usize,
) -> Result<PushforwardHistogram> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let torus = ZonalTorus::new(cfg)?;
    let period = torus.period();
    let center = HPoint::i();
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<PushforwardHistogram> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut stream = UniformStream::at_sample(seed, start);
            let mut h = PushforwardHistogram::empty(&torus, rings, n);
            for _ in start..end {
                let theta = TAU * stream.next_f64();
                let t = period * stream.next_f64();
                h.add(hyp_dist(&center, &torus.psi(theta, t)));
            }
            h
        })
        .collect();
    let empty = PushforwardHistogram::empty(&torus, rings, n);
    Ok(partial.iter().fold(empty, PushforwardHistogram::merge))
}

/// Deterministic counterpart of [`sample_pushforward`]: `t` runs over the
/// midpoints `(j + ½)T_E/n` — the inverse CDF of its uniform marginal at
/// equally spaced levels — and `θ` over a golden-ratio sequence.
pub fn stratified_pushforward(cfg: &MagneticConfig, n: u64) -> Result<PushforwardHistogram> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let torus = ZonalTorus::new(cfg)?;
    let period = torus.period();
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let center = HPoint::i();
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<PushforwardHistogram> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut h = PushforwardHistogram::empty(&torus, DEFAULT_RINGS, n);
            for j in start..end {
                let t = (j as f64 + 0.5) * period / n as f64;
                let theta = TAU * (j as f64 * golden).fract();
                h.add(hyp_dist(&center, &torus.psi(theta, t)));
            }
            h
        })
        .collect();
    let empty = PushforwardHistogram::empty(&torus, DEFAULT_RINGS, n);
    Ok(partial.iter().fold(empty, PushforwardHistogram::merge))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingComparison {
    pub r_lo: f64,
    pub r_hi: f64,
    pub count: u64,
    pub est_density: f64,
    pub exact_ring_avg: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub b: f64,
    pub e: f64,
    pub n: u64,
    pub out_of_disk: u64,
    pub rings: Vec<RingComparison>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// Largest `rel_err` over rings inside `[0.1, 0.9]·R_E`.
    pub max_rel_err_window: f64,
    /// Log–log slope of the ring densities against distance, innermost rings.
    pub center_slope: f64,
    /// Same against distance to the caustic, rings just inside it.
    pub boundary_slope: f64,
    /// Empirical raw mass, `Σ count · 2πT_E/n`.
    pub raw_mass: f64,
}

/// Innermost rings used for the center exponent fit.
const CENTER_FIT: std::ops::Range<usize> = 0..8;

/// Rings counted inward from the caustic used for the boundary fit; the
/// outermost ring is skipped.
const BOUNDARY_FIT: std::ops::Range<usize> = 1..11;

pub fn compare_to_closed_form(
    hist: &PushforwardHistogram,
    cfg: &MagneticConfig,
) -> Result<ComparisonReport> {
    if hist.b != cfg.b() || hist.e != cfg.e() {
        return Err(Error::ConfigMismatch);
    }
    let torus = ZonalTorus::new(cfg)?;
    let r = torus.radius();
    let n_rings = hist.counts.len();
    let exact: Vec<f64> = (0..n_rings)
        .into_par_iter()
        .map(|j| {
            let (lo, hi) = hist.ring_bounds(j);
            torus.ring_integral(lo, hi, 64)
        })
        .collect();

    let mut rings = Vec::with_capacity(n_rings);
    let mut chi_square = 0.0;
    let mut dof = 0;
    let mut max_window = 0.0f64;
    for (j, &ring_mass) in exact.iter().enumerate() {
        let (r_lo, r_hi) = hist.ring_bounds(j);
        let area = hist.ring_area(j);
        let est = hist.density(j);
        let exact_avg = ring_mass / area;
        let rel_err = if exact_avg > 0.0 {
            (est - exact_avg).abs() / exact_avg
        } else {
            f64::INFINITY
        };
        let expected = ring_mass / hist.sample_mass;
        if expected > 0.0 {
            let diff = hist.counts[j] as f64 - expected;
            chi_square += diff * diff / expected;
            dof += 1;
        }
        if r_lo >= 0.1 * r && r_hi <= 0.9 * r {
            max_window = max_window.max(rel_err);
        }
        rings.push(RingComparison {
            r_lo,
            r_hi,
            count: hist.counts[j],
            est_density: est,
            exact_ring_avg: exact_avg,
            rel_err,
        });
    }

    // For a pure 1/d law the area-weighted ring average equals the value at
    // the ring midpoint; for a pure 1/√τ law it equals the value at
    // τ = ((√τ₁ + √τ₂)/2)². Fit against those abscissae.
    let (cx, cy): (Vec<f64>, Vec<f64>) = CENTER_FIT
        .map(|j| {
            let (lo, hi) = hist.ring_bounds(j);
            (0.5 * (lo + hi), hist.density(j))
        })
        .unzip();
    let (bx, by): (Vec<f64>, Vec<f64>) = BOUNDARY_FIT
        .map(|k| {
            let j = n_rings - 1 - k;
            let (lo, hi) = hist.ring_bounds(j);
            let (t_near, t_far) = ((r - hi).max(0.0), r - lo);
            let s = 0.5 * (t_near.sqrt() + t_far.sqrt());
            (s * s, hist.density(j))
        })
        .unzip();

    let total: u64 = hist.counts.iter().sum();
    Ok(ComparisonReport {
        b: hist.b,
        e: hist.e,
        n: hist.n,
        out_of_disk: hist.out_of_disk,
        rings,
        chi_square,
        degrees_of_freedom: dof,
        max_rel_err_window: max_window,
        center_slope: log_log_slope(&cx, &cy),
        boundary_slope: log_log_slope(&bx, &by),
        raw_mass: total as f64 * hist.sample_mass,
    })
}

/// CSV with columns `r_lo, r_hi, count, est_density, exact_ring_avg, rel_err`.
pub fn write_comparison_csv<W: Write>(out: W, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r_lo", "r_hi", "count", "est_density", "exact_ring_avg", "rel_err"])?;
    for r in &report.rings {
        w.write_record([
            fmt_f64(r.r_lo),
            fmt_f64(r.r_hi),
            r.count.to_string(),
            fmt_f64(r.est_density),
            fmt_f64(r.exact_ring_avg),
            fmt_f64(r.rel_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_positions_are_independent_of_chunking() {
        let mut whole = UniformStream::new(7);
        let first: Vec<f64> = (0..10).map(|_| whole.next_f64()).collect();
        let mut later = UniformStream::at_sample(7, 3);
        assert_eq!(later.next_f64(), first[6]);
        assert_eq!(later.next_f64(), first[7]);
        assert!(first.iter().all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn histogram_invariants() {
        let cfg = MagneticConfig::new(1.0, 0.25).unwrap();
        let h = sample_pushforward(&cfg, 100_000, 1).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>() + h.out_of_disk, h.n);
        assert_eq!(h.out_of_disk, 0);
        assert_eq!(h, sample_pushforward(&cfg, 100_000, 1).unwrap());
        assert_ne!(h, sample_pushforward(&cfg, 100_000, 2).unwrap());
        assert!(sample_pushforward(&cfg, 9_999, 1).is_err());
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let cfg = MagneticConfig::new(1.0, 0.25).unwrap();
        let h = sample_pushforward(&cfg, 20_000, 1).unwrap();
        let other = MagneticConfig::new(1.0, 0.2).unwrap();
        assert_eq!(compare_to_closed_form(&h, &other), Err(Error::ConfigMismatch));
    }
}
