//! Geometry of the upper half-plane model of the hyperbolic plane.
//!
//! Points are complex numbers with positive imaginary part, tangent vectors
//! are complex numbers attached to a base point, and PSL(2,R) acts by
//! Möbius transformations. The unit tangent bundle is identified with
//! PSL(2,R) through the orbit map `g ↦ g·(i, i)`.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Tolerance on the hyperbolic norm accepted by [`frame_of`].
pub const UNIT_TOLERANCE: f64 = 1e-10;

/// Products are rescaled to determinant one only while `|ad| + |bc|` stays
/// below this bound.
pub const RENORMALIZE_LIMIT: f64 = 1e6;

/// An element of PSL(2,R), stored as a unimodular real matrix `[[a, b], [c, d]]`.
///
/// Matrices are renormalized to determinant one on construction and after
/// every product while the determinant is well-conditioned, and stored with
/// `a > 0` (or `a = 0, b > 0`). Equality is only meaningful up to sign, see
/// [`MoebiusElement::approx_eq`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MoebiusElement {
    pub const IDENTITY: MoebiusElement = MoebiusElement {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds an element from raw entries, rescaling by `1/√det`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::NotUnimodular(det));
        }
        Ok(Self::normalized(a, b, c, d))
    }

    fn normalized(a: f64, b: f64, c: f64, d: f64) -> Self {
        // Once |ad| + |bc| is large the computed determinant is mostly
        // rounding error, and dividing by it would only add noise (or
        // produce NaN when cancellation makes it nonpositive).
        let det = a * d - b * c;
        let s = if (a * d).abs() + (b * c).abs() <= RENORMALIZE_LIMIT && det > 0.0 {
            det.sqrt().recip()
        } else {
            1.0
        };
        let sign = if a > 0.0 || (a == 0.0 && b > 0.0) { s } else { -s };
        MoebiusElement {
            a: a * sign,
            b: b * sign,
            c: c * sign,
            d: d * sign,
        }
    }

    /// Rotation about `i` acting on `T_iℍ²` by multiplication with `e^{iθ}`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::normalized(c, s, -s, c)
    }

    /// `z ↦ λ z`, a hyperbolic translation along the imaginary axis by `ln λ`.
    pub fn scaling(factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scaling factor must be positive, got {factor}"
            )));
        }
        let r = factor.sqrt();
        Ok(Self::normalized(r, 0.0, 0.0, r.recip()))
    }

    /// `z ↦ z + x`.
    pub fn horizontal(x: f64) -> Self {
        Self::normalized(1.0, x, 0.0, 1.0)
    }

    /// Translation by hyperbolic distance `length` along the geodesic through
    /// `i` leaving in direction `e^{iθ}·i`.
    pub fn translation(length: f64, angle: f64) -> Self {
        let axis = Self::rotation(angle);
        let half = 0.5 * length;
        let along = Self::normalized(half.exp(), 0.0, 0.0, (-half).exp());
        axis * along * axis.inverse()
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        Self::normalized(self.d, -self.b, -self.c, self.a)
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Largest entrywise deviation from `other`, minimized over the sign.
    pub fn distance_up_to_sign(&self, other: &Self) -> f64 {
        let plus = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let minus = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x + y).abs())
            .fold(0.0, f64::max);
        plus.min(minus)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.distance_up_to_sign(other) <= tol
    }

    /// Möbius action on a point.
    pub fn apply(&self, p: HPoint) -> HPoint {
        let z = p.z;
        let num = z * self.a + self.b;
        let den = z * self.c + self.d;
        HPoint { z: num / den }
    }
}

impl Mul for MoebiusElement {
    type Output = MoebiusElement;

    fn mul(self, rhs: MoebiusElement) -> MoebiusElement {
        MoebiusElement::normalized(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }
}

impl fmt::Display for MoebiusElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub z: Complex,
}

impl HPoint {
    pub fn new(z: Complex) -> Result<Self> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NotInHalfPlane(z.im));
        }
        Ok(HPoint { z })
    }

    pub fn from_parts(x: f64, y: f64) -> Result<Self> {
        Self::new(Complex::new(x, y))
    }

    /// The base point `i`.
    pub fn i() -> Self {
        HPoint { z: Complex::i() }
    }

    /// Image in the Poincaré disk under `z ↦ (z − i)/(z + i)`, which sends `i` to 0.
    pub fn to_disk(&self) -> Complex {
        (self.z - Complex::i()) / (self.z + Complex::i())
    }

    /// Inverse of [`HPoint::to_disk`]. Requires `|w| < 1`.
    pub fn from_disk(w: Complex) -> Result<Self> {
        if !(w.norm_sqr() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "disk coordinate {w} is outside the unit disk"
            )));
        }
        Self::new(Complex::i() * (Complex::new(1.0, 0.0) + w) / (Complex::new(1.0, 0.0) - w))
    }

    /// Point at hyperbolic distance `r` from `i`, in direction `e^{iφ}·i`.
    ///
    /// The polar angle matches the rotation convention of
    /// [`MoebiusElement::rotation`]: rotating by `θ` adds `θ` to `φ`.
    pub fn from_polar(r: f64, angle: f64) -> Self {
        let w = Complex::from_polar((0.5 * r).tanh(), angle);
        HPoint {
            z: Complex::i() * (Complex::new(1.0, 0.0) + w) / (Complex::new(1.0, 0.0) - w),
        }
    }

    /// Polar angle about `i` in the convention of [`HPoint::from_polar`], in `(−π, π]`.
    pub fn polar_angle(&self) -> f64 {
        let w = self.to_disk();
        w.im.atan2(w.re)
    }
}

/// A tangent vector `v` (in half-plane coordinates) at `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HTangent {
    pub base: HPoint,
    pub v: Complex,
}

impl HTangent {
    pub fn new(base: HPoint, v: Complex) -> Self {
        HTangent { base, v }
    }

    /// The unit vector `i` at the point `i`.
    pub fn reference() -> Self {
        HTangent {
            base: HPoint::i(),
            v: Complex::i(),
        }
    }

    /// Hyperbolic length `|v| / Im z`.
    pub fn norm(&self) -> f64 {
        self.v.norm() / self.base.z.im
    }

    pub fn scaled(&self, factor: f64) -> Self {
        HTangent {
            base: self.base,
            v: self.v * factor,
        }
    }
}

/// `g·(z, v) = ((az+b)/(cz+d), v/(cz+d)²)`.
pub fn mobius_apply(g: &MoebiusElement, p: &HTangent) -> HTangent {
    let den = p.base.z * g.c + g.d;
    debug_assert!(den.norm_sqr() > 0.0, "cz + d vanished for Im z > 0");
    HTangent {
        base: HPoint {
            z: (p.base.z * g.a + g.b) / den,
        },
        v: p.v / (den * den),
    }
}

/// Hyperbolic distance, `arccosh(1 + |z−w|²/(2 Im z Im w))`.
///
/// Evaluated as `2 asinh(|z−w| / (2√(Im z Im w)))`, which is the same
/// quantity without the loss of precision of `arccosh` near 1.
pub fn hyp_dist(z: &HPoint, w: &HPoint) -> f64 {
    let chord = (z.z - w.z).norm();
    2.0 * (chord / (2.0 * (z.z.im * w.z.im).sqrt())).asinh()
}

/// Rotates the tangent vector by `angle` using the conformal structure.
pub fn rotate_fiber(p: &HTangent, angle: f64) -> HTangent {
    HTangent {
        base: p.base,
        v: p.v * Complex::from_polar(1.0, angle),
    }
}

/// The unique (up to sign) `g` with `g·(i, i) = p`, for a unit tangent `p`.
pub fn frame_of(p: &HTangent) -> Result<MoebiusElement> {
    let norm = p.norm();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::NonUnitTangent(norm));
    }
    let x = p.base.z.re;
    let y = p.base.z.im;
    // g = (z ↦ z + x)·(z ↦ y z)·rotation(θ), whose derivative at i is y e^{iθ}.
    let turn = p.v / (Complex::i() * y);
    let angle = turn.im.atan2(turn.re);
    let r = y.sqrt();
    let scale = MoebiusElement::normalized(r, 0.0, 0.0, r.recip());
    Ok(MoebiusElement::horizontal(x) * scale * MoebiusElement::rotation(angle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI, SQRT_2};

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn identity_fixes_reference() {
        let p = HTangent::reference();
        let q = mobius_apply(&MoebiusElement::IDENTITY, &p);
        assert_eq!(q, p);
    }

    #[test]
    fn diagonal_acts_by_scaling() {
        let g = MoebiusElement::new(SQRT_2, 0.0, 0.0, 1.0 / SQRT_2).unwrap();
        let q = g.apply(HPoint::i());
        assert!((q.z - c(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn construction_renormalizes_and_fixes_sign() {
        let g = MoebiusElement::new(-2.0, -1.0, -2.0, -2.0).unwrap();
        assert!((g.det() - 1.0).abs() < 1e-15);
        assert!(g.a > 0.0);
        assert!(MoebiusElement::new(1.0, 2.0, 3.0, 4.0).is_err());
        let h = MoebiusElement::new(0.0, -1.0, 1.0, 0.0).unwrap();
        assert!(h.b > 0.0);
    }

    #[test]
    fn distances() {
        let i = HPoint::i();
        assert_eq!(hyp_dist(&i, &i), 0.0);
        let two_i = HPoint::from_parts(0.0, 2.0).unwrap();
        assert!((hyp_dist(&i, &two_i) - LN_2).abs() < 1e-15);
        assert!((hyp_dist(&i, &two_i) - 1.25f64.acosh()).abs() < 1e-15);

        // Farthest point of the magnetic circle through i for B = 1, λ² = 1/2.
        let (b, lam) = (1.0, 0.5f64.sqrt());
        let z = c(2.0 * lam * b, b * b - lam * lam) / (lam * lam + b * b);
        let d = hyp_dist(&i, &HPoint::new(z).unwrap());
        assert!((d - 3.0f64.acosh()).abs() < 1e-14);
        assert!((d - 1.762747174039086).abs() < 1e-12);
    }

    #[test]
    fn fiber_rotation() {
        let p = HTangent::reference();
        assert_eq!(rotate_fiber(&p, 0.0), p);
        let full = rotate_fiber(&p, 2.0 * PI);
        assert!((full.v - p.v).norm() < 1e-12);
        let quarter = rotate_fiber(&p, PI / 2.0);
        assert!((quarter.v - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(quarter.base, p.base);
    }

    #[test]
    fn frames() {
        let g = frame_of(&HTangent::reference()).unwrap();
        assert!(g.approx_eq(&MoebiusElement::IDENTITY, 1e-15));

        let p = HTangent::new(HPoint::from_parts(0.0, 2.0).unwrap(), c(0.0, 2.0));
        let g = frame_of(&p).unwrap();
        let expected = MoebiusElement::new(SQRT_2, 0.0, 0.0, 1.0 / SQRT_2).unwrap();
        assert!(g.approx_eq(&expected, 1e-15));

        let err = frame_of(&HTangent::new(HPoint::i(), c(0.0, 2.0))).unwrap_err();
        assert_eq!(err, Error::NonUnitTangent(2.0));
    }

    #[test]
    fn rotation_matches_polar_angle() {
        let p = HPoint::from_polar(0.7, 0.0);
        assert!((p.z - c(0.0, 0.7f64.exp())).norm() < 1e-14);
        let q = MoebiusElement::rotation(1.1).apply(p);
        assert!((q.polar_angle() - 1.1).abs() < 1e-14);
        assert!((hyp_dist(&HPoint::i(), &q) - 0.7).abs() < 1e-14);
        let r = HPoint::from_polar(0.4, -2.0);
        assert!((r.polar_angle() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn translation_moves_center_along_ray() {
        let g = MoebiusElement::translation(1.3, 0.4);
        let p = g.apply(HPoint::i());
        assert!((hyp_dist(&HPoint::i(), &p) - 1.3).abs() < 1e-14);
        assert!((p.polar_angle() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn disk_round_trip() {
        let p = HPoint::from_parts(0.3, 1.7).unwrap();
        let back = HPoint::from_disk(p.to_disk()).unwrap();
        assert!((back.z - p.z).norm() < 1e-14);
        assert!(HPoint::from_disk(c(1.0, 0.0)).is_err());
        assert!(HPoint::new(c(0.0, -1.0)).is_err());
    }
}
