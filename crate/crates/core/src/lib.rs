//! Classical magnetic geodesic flow on the hyperbolic plane and on the Bolza
//! surface: exact flows, the zonal Lagrangian torus and its projected density,
//! Landau levels, and a Monte Carlo oracle for the density.

// Negated comparisons are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod hyperbolic;
pub mod io;
pub mod numerics;
pub mod oracle;
pub mod spectrum;
pub mod surface;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
pub use flow::{MagneticConfig, Regime};
pub use hyperbolic::{Complex, HPoint, HTangent, MoebiusElement};
