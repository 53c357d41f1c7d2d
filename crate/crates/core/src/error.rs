use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is not in the upper half-plane (Im z = {0})")]
    NotInHalfPlane(f64),
    #[error("matrix is not in SL(2,R) up to scale (det = {0})")]
    NotUnimodular(f64),
    #[error("non-unit tangent (hyperbolic norm {0})")]
    NonUnitTangent(f64),
    #[error("off energy shell: speed {speed}, expected {expected}")]
    OffEnergyShell { speed: f64, expected: f64 },
    #[error("invalid magnetic configuration: {0}")]
    InvalidConfig(String),
    #[error("no period at or above critical energy")]
    NoPeriod,
    #[error("torus undefined at this energy (need 0 < E < E_c)")]
    TorusUndefined,
    #[error("degenerate center: full circle fiber")]
    DegenerateCenter,
    #[error("resolution too coarse: {0} radial nodes (minimum 64)")]
    ResolutionTooCoarse(usize),
    #[error("reduction failed after {0} steps")]
    ReductionFailed(usize),
    #[error("disk too large for exact enumeration (R = {0})")]
    DiskTooLarge(f64),
    #[error("equidistribution test requires critical energy")]
    NotCritical,
    #[error("Chern constraint violated: 2B(g-1) = {0} is not an integer")]
    ChernConstraint(f64),
    #[error("ladder does not reach energy {energy} (critical energy {critical})")]
    AboveLadder { energy: f64, critical: f64 },
    #[error("histogram was produced for a different configuration")]
    ConfigMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}
