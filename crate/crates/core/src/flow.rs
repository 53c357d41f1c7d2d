//! Magnetic geodesic flow at energy `E` under a constant field `B`.
//!
//! On the unit tangent bundle `PSL(2,R)` the flow is right multiplication by
//! `exp(t F_λ)` with `F_λ = [[λ/2, −B/2], [B/2, −λ/2]]` and `λ = √(2E)`.
//! In this clock a trajectory moves its base point at hyperbolic speed `λ`,
//! so tangent vectors on the energy shell carry length `λ` and every
//! subcritical orbit closes after `T_E = 2π/√(B² − 2E)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{frame_of, mobius_apply, Complex, HTangent, MoebiusElement};

/// Width of the band around `B² = 2E` classified as critical.
pub const REGIME_TOLERANCE: f64 = 1e-12;

/// Tolerance on `|speed − λ|` for a state to count as on the energy shell.
pub const SHELL_TOLERANCE: f64 = 1e-8;

/// Below this `|B² − 2E|` the sine-type kernels switch to their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Field strength and energy, with the derived speed and regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticConfig {
    b: f64,
    e: f64,
    lambda: f64,
    regime: Regime,
}

impl MagneticConfig {
    pub fn new(b: f64, e: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidConfig(format!("B must be positive, got {b}")));
        }
        if !(e >= 0.0) || !e.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "E must be nonnegative, got {e}"
            )));
        }
        let kappa = b * b - 2.0 * e;
        let regime = if kappa.abs() <= REGIME_TOLERANCE {
            Regime::Critical
        } else if kappa > 0.0 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        };
        Ok(MagneticConfig {
            b,
            e,
            lambda: (2.0 * e).sqrt(),
            regime,
        })
    }

    /// Configuration sitting exactly at the critical energy `B²/2`.
    pub fn critical(b: f64) -> Result<Self> {
        Self::new(b, 0.5 * b * b)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    /// Speed on the energy shell, `√(2E)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn critical_energy(&self) -> f64 {
        0.5 * self.b * self.b
    }

    /// Signed `B² − 2E`.
    pub fn kappa(&self) -> f64 {
        self.b * self.b - 2.0 * self.e
    }

    /// `√|B² − 2E|`.
    pub fn gamma(&self) -> f64 {
        self.kappa().abs().sqrt()
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }
}

/// `sin(√κ t)/√κ`, continued to `t` at `κ = 0` and `sinh(√−κ t)/√−κ` below.
pub(crate) fn sin_kernel(kappa: f64, t: f64) -> f64 {
    let x = kappa * t * t;
    if kappa == 0.0 || (kappa.abs() < SERIES_THRESHOLD && x.abs() < 1e-2) {
        return t * (1.0 - x / 6.0 * (1.0 - x / 20.0 * (1.0 - x / 42.0)));
    }
    if kappa > 0.0 {
        let g = kappa.sqrt();
        (g * t).sin() / g
    } else {
        let g = (-kappa).sqrt();
        (g * t).sinh() / g
    }
}

/// `∫₀ᵗ sin_kernel(κ, s) ds = (1 − cos(√κ t))/κ`.
pub(crate) fn int_sin_kernel(kappa: f64, t: f64) -> f64 {
    let x = kappa * t * t;
    if kappa == 0.0 || (kappa.abs() < SERIES_THRESHOLD && x.abs() < 1e-2) {
        return 0.5 * t * t * (1.0 - x / 12.0 * (1.0 - x / 30.0 * (1.0 - x / 56.0)));
    }
    if kappa > 0.0 {
        let h = 0.5 * kappa.sqrt() * t;
        2.0 * h.sin().powi(2) / kappa
    } else {
        let h = 0.5 * (-kappa).sqrt() * t;
        -2.0 * h.sinh().powi(2) / kappa
    }
}

fn cos_kernel(kappa: f64, t: f64) -> f64 {
    if kappa > 0.0 {
        (kappa.sqrt() * t).cos()
    } else if kappa < 0.0 {
        ((-kappa).sqrt() * t).cosh()
    } else {
        1.0
    }
}

/// The trace-free generator `F_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowGenerator {
    pub m: [[f64; 2]; 2],
    /// `B² − λ²`, kept exactly rather than recomputed from the entries.
    kappa: f64,
}

impl FlowGenerator {
    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Closed-form `exp(tF)`. Since `F² = −(κ/4)·I`, this is
    /// `cos(√κ t/2)·I + (2/√κ) sin(√κ t/2)·F` with the usual continuations.
    pub fn exp(&self, t: f64) -> MoebiusElement {
        let [c, s] = self.exp_coefficients(t);
        let m = &self.m;
        MoebiusElement::new(
            c + s * m[0][0],
            s * m[0][1],
            s * m[1][0],
            c + s * m[1][1],
        )
        .expect("exp of a trace-free matrix is unimodular")
    }

    /// Raw `exp(tF)` entries without projective normalization.
    pub fn exp_matrix(&self, t: f64) -> [[f64; 2]; 2] {
        let [c, s] = self.exp_coefficients(t);
        let m = &self.m;
        [
            [c + s * m[0][0], s * m[0][1]],
            [s * m[1][0], c + s * m[1][1]],
        ]
    }

    fn exp_coefficients(&self, t: f64) -> [f64; 2] {
        let quarter = 0.25 * self.kappa;
        [cos_kernel(quarter, t), sin_kernel(quarter, t)]
    }
}

pub fn generator(cfg: &MagneticConfig) -> FlowGenerator {
    let (b, l) = (cfg.b, cfg.lambda);
    FlowGenerator {
        m: [[0.5 * l, -0.5 * b], [0.5 * b, -0.5 * l]],
        kappa: cfg.kappa(),
    }
}

fn unit_frame(cfg: &MagneticConfig, p: &HTangent) -> Result<Option<MoebiusElement>> {
    let speed = p.norm();
    if !((speed - cfg.lambda).abs() <= SHELL_TOLERANCE) {
        return Err(Error::OffEnergyShell {
            speed,
            expected: cfg.lambda,
        });
    }
    if cfg.lambda == 0.0 {
        return Ok(None);
    }
    frame_of(&p.scaled(speed.recip())).map(Some)
}

/// Flows a state on the energy shell (speed `λ`) for time `t` in closed form.
///
/// At `E = 0` the shell is the zero section and the state is returned unchanged.
pub fn flow_exact(cfg: &MagneticConfig, p: &HTangent, t: f64) -> Result<HTangent> {
    let Some(frame) = unit_frame(cfg, p)? else {
        return Ok(*p);
    };
    let g = frame * generator(cfg).exp(t);
    Ok(mobius_apply(&g, &HTangent::reference()).scaled(cfg.lambda))
}

/// Flows a unit frame: `g ↦ g·exp(tF)`.
pub fn flow_frame(cfg: &MagneticConfig, g: &MoebiusElement, t: f64) -> MoebiusElement {
    *g * generator(cfg).exp(t)
}

/// Which way the almost complex structure `j` turns tangent vectors in the
/// numerical integrator. `Standard` is multiplication by `+i`, the choice
/// that reproduces [`flow_exact`]; `Flipped` exists to check that the
/// comparison between the two flows detects an orientation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JOrientation {
    #[default]
    Standard,
    Flipped,
}

impl JOrientation {
    fn sign(self) -> f64 {
        match self {
            JOrientation::Standard => 1.0,
            JOrientation::Flipped => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericFlow {
    pub state: HTangent,
    pub steps: usize,
    /// Set when `dt > T_E/100` in the subcritical regime.
    pub coarse_step: bool,
}

/// Integrates `∇_ż ż = −B j ż` with classical fixed-step RK4.
///
/// In half-plane coordinates the equation reads
/// `z̈ = −i ż²/Im z − i B ż`: the first term is the Levi-Civita correction
/// of the hyperbolic metric, the second the magnetic forcing.
pub fn flow_numeric(cfg: &MagneticConfig, p: &HTangent, t: f64, dt: f64) -> Result<NumericFlow> {
    flow_numeric_oriented(cfg, p, t, dt, JOrientation::Standard)
}

pub fn flow_numeric_oriented(
    cfg: &MagneticConfig,
    p: &HTangent,
    t: f64,
    dt: f64,
    orientation: JOrientation,
) -> Result<NumericFlow> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    unit_frame(cfg, p)?;
    let coarse_step = match period(cfg) {
        Ok(period) => dt > period / 100.0,
        Err(_) => false,
    };
    let steps = (t.abs() / dt).ceil() as usize;
    if steps == 0 {
        return Ok(NumericFlow {
            state: *p,
            steps,
            coarse_step,
        });
    }
    let h = t / steps as f64;
    let forcing = Complex::new(0.0, -orientation.sign() * cfg.b);
    let rhs = |z: Complex, v: Complex| -> (Complex, Complex) {
        let acc = Complex::new(0.0, -1.0) * v * v / z.im + forcing * v;
        (v, acc)
    };
    let (mut z, mut v) = (p.base.z, p.v);
    for _ in 0..steps {
        let (k1z, k1v) = rhs(z, v);
        let (k2z, k2v) = rhs(z + k1z * (0.5 * h), v + k1v * (0.5 * h));
        let (k3z, k3v) = rhs(z + k2z * (0.5 * h), v + k2v * (0.5 * h));
        let (k4z, k4v) = rhs(z + k3z * h, v + k3v * h);
        z += (k1z + (k2z + k3z) * 2.0 + k4z) * (h / 6.0);
        v += (k1v + (k2v + k3v) * 2.0 + k4v) * (h / 6.0);
    }
    Ok(NumericFlow {
        state: HTangent::new(crate::hyperbolic::HPoint::new(z)?, v),
        steps,
        coarse_step,
    })
}

/// `T_E = 2π (B² − 2E)^{−1/2}`.
pub fn period(cfg: &MagneticConfig) -> Result<f64> {
    match cfg.regime {
        Regime::Subcritical => Ok(2.0 * PI / cfg.gamma()),
        _ => Err(Error::NoPeriod),
    }
}

pub fn regime(cfg: &MagneticConfig) -> Regime {
    cfg.regime
}

/// Top Lyapunov exponent of the cocycle `t ↦ exp(tF)`, by repeated
/// multiply-and-renormalize with unit time steps up to `t_max`.
///
/// The estimate is clamped at zero; for a unimodular cocycle the top
/// exponent is never negative.
pub fn lyapunov_exponent(cfg: &MagneticConfig, t_max: f64) -> Result<f64> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    let gen = generator(cfg);
    let full = t_max.floor() as u64;
    let rest = t_max - full as f64;
    let step = gen.exp_matrix(1.0);
    let mut vec = [1.0f64, 0.0];
    let mut log_growth = 0.0;
    let mut advance = |m: &[[f64; 2]; 2]| {
        let x = m[0][0] * vec[0] + m[0][1] * vec[1];
        let y = m[1][0] * vec[0] + m[1][1] * vec[1];
        let n = x.hypot(y);
        log_growth += n.ln();
        vec = [x / n, y / n];
    };
    for _ in 0..full {
        advance(&step);
    }
    if rest > 0.0 {
        advance(&gen.exp_matrix(rest));
    }
    Ok((log_growth / t_max).max(0.0))
}

/// Coefficients of `∂_θ` of the flowed state in the frame `(X, X_⊥, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationCoeffs {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `b(t) = sin(γt)/γ`, `a(t) = −B∫b`, `c(t) = 1 + 2E∫b`, continued across `E_c`.
pub fn variation_coeffs(cfg: &MagneticConfig, t: f64) -> VariationCoeffs {
    let kappa = cfg.kappa();
    let integral = int_sin_kernel(kappa, t);
    VariationCoeffs {
        t,
        a: -cfg.b * integral,
        b: sin_kernel(kappa, t),
        c: 1.0 + 2.0 * cfg.e * integral,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: HTangent,
}

/// Exact trajectory sampled every `stride` time units on `[0, t_end]`.
pub fn trajectory_exact(
    cfg: &MagneticConfig,
    p: &HTangent,
    t_end: f64,
    stride: f64,
) -> Result<Vec<TrajectorySample>> {
    sample_times(t_end, stride)?
        .into_iter()
        .map(|t| Ok(TrajectorySample { t, state: flow_exact(cfg, p, t)? }))
        .collect()
}

/// RK4 trajectory on the same time grid as [`trajectory_exact`]; the
/// integrator is restarted from the previous sample at each stride.
pub fn trajectory_numeric(
    cfg: &MagneticConfig,
    p: &HTangent,
    t_end: f64,
    stride: f64,
    dt: f64,
) -> Result<Vec<TrajectorySample>> {
    let times = sample_times(t_end, stride)?;
    let mut out = Vec::with_capacity(times.len());
    let mut state = *p;
    let mut prev = 0.0;
    for t in times {
        if t > prev {
            state = flow_numeric(cfg, &state, t - prev, dt)?.state;
        }
        out.push(TrajectorySample { t, state });
        prev = t;
    }
    Ok(out)
}

fn sample_times(t_end: f64, stride: f64) -> Result<Vec<f64>> {
    if !(stride > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need stride > 0 and t_end >= 0, got stride {stride}, t_end {t_end}"
        )));
    }
    let n = (t_end / stride + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * stride).collect())
}

/// CSV with columns `t, re_z, im_z, re_v, im_v`.
pub fn write_trajectory_csv<W: Write>(out: W, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "re_z", "im_z", "re_v", "im_v"])?;
    for s in samples {
        w.write_record([
            crate::io::fmt_f64(s.t),
            crate::io::fmt_f64(s.state.base.z.re),
            crate::io::fmt_f64(s.state.base.z.im),
            crate::io::fmt_f64(s.state.v.re),
            crate::io::fmt_f64(s.state.v.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}
