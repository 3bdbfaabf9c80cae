use thiserror::Error;

use crate::ring::{Monomial, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("truncation window too small: product reaches λ^{power} below λ_min = {lambda_min}")]
    LambdaUnderflow { power: i32, lambda_min: i32 },
    #[error("truncation window too small: product reaches L^{power} below L_min = {log_min}")]
    LogUnderflow { power: i32, log_min: i32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("unsupported divisor: {0}")]
    UnsupportedDivisor(String),
    #[error("unsupported exponent: {0}")]
    UnsupportedExponent(String),
    #[error("{monomial} lies outside window {window:?}")]
    OutOfWindow { monomial: Monomial, window: Window },
    #[error("coefficient of λ^{lambda} is not exact (exact only below λ^{exact_below}); enlarge lambda_max")]
    Truncated { lambda: i32, exact_below: i64 },
    #[error("series failed to terminate after {steps} terms")]
    SeriesDidNotTerminate { steps: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("the oracle requires κ ≠ 0 (use the closed-form series near 0)")]
    ZeroKappa,
    #[error("u = {0} is outside (0, 1)")]
    InvalidU(f64),
    #[error("amplifier term with log power {0} (allowed: 0, 1, 2)")]
    InvalidTerm(u32),
    #[error("degenerate shifts: x + y vanishes identically")]
    DegenerateShift,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("u = {0} is outside (0, 1]")]
    InvalidU(f64),
    #[error("transcription error: coefficient {label} has nonzero κ^{power} term {poly}")]
    Cancellation { label: char, power: i32, poly: String },
    #[error("cannot parse coefficient polynomial {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no κ in the scan range satisfies the inequality at u = {u}, v = {v}")]
    Infeasible { u: f64, v: f64 },
}
