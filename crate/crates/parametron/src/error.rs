//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Fock dimension {dim}: at least 2 levels are required")]
    InvalidDimension { dim: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not Hermitian: relative deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("odd cat state is undefined for alpha = 0 (zero vector)")]
    DegenerateOddCat,

    #[error("invalid schedule: {reason}")]
    InvalidSchedule { reason: String },

    #[error("invalid time grid: {reason}")]
    InvalidTimeGrid { reason: String },

    #[error("propagation diverged (NaN/Inf) at t = {t_ns} ns")]
    Divergence { t_ns: f64 },

    #[error(
        "norm drifted to {norm} at t = {t_ns} ns (tolerance {tolerance:.1e}); decrease the time step"
    )]
    NormDrift { t_ns: f64, norm: f64, tolerance: f64 },

    #[error(
        "trace drifted to {trace} at t = {t_ns} ns (tolerance {tolerance:.1e}); decrease the time step"
    )]
    TraceDrift { t_ns: f64, trace: f64, tolerance: f64 },

    #[error("levels {m} and {n} are degenerate (gap {gap:.3e} rad/ns); resolve by parity sector")]
    DegenerateLevels { m: usize, n: usize, gap: f64 },

    #[error("negative radicand (2*beta + delta)/chi = {radicand}: outside the parametron regime")]
    InvalidRegime { radicand: f64 },

    #[error("empty statistics window ({from_ns}, {to_ns}] contains no samples")]
    EmptyWindow { from_ns: f64, to_ns: f64 },

    #[error("calibration failed: {reason}")]
    CalibrationFailure { reason: String },

    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },
}
