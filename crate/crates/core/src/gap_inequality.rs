//! The inequality `A_κ > Φ(u, v, κ)` and its boundary in κ.

use std::f64::consts::PI;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::closed_forms::{self, eval, rational_from_f64, rational_to_f64, CoefficientLabel};
use crate::error::GapError;

pub const U_MAX: f64 = 1.0 / 11.0;
pub const U_MAX_EXTENDED: f64 = 1.0;
pub const SCAN_START: f64 = 0.5;
pub const SCAN_END: f64 = 20.0;
pub const SCAN_STEP: f64 = 0.25;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Taylor degree used by [`check_exact`]; the remainder bound is reported.
const EXACT_TAYLOR_TERMS: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub u: f64,
    pub v: f64,
    pub kappa: f64,
    pub extended_u: bool,
}

impl GapParams {
    /// Validated constructor.
    pub fn new(u: f64, v: f64, kappa: f64, extended_u: bool) -> Result<Self, GapError> {
        let p = GapParams { u, v, kappa, extended_u };
        p.validate()?;
        Ok(p)
    }

    pub fn u_max(&self) -> f64 {
        if self.extended_u {
            U_MAX_EXTENDED
        } else {
            U_MAX
        }
    }

    pub fn validate(&self) -> Result<(), GapError> {
        let bad = |m: String| Err(GapError::InvalidParams(m));
        if !(self.u > 0.0 && self.u < self.u_max()) {
            let hint = if self.extended_u { "" } else { " (pass extended_u for u up to 1)" };
            return bad(format!("u = {} must lie in (0, {}){hint}", self.u, self.u_max()));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("v = {} must be positive", self.v));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa = {} must be positive", self.kappa));
        }
        Ok(())
    }

    fn with_kappa(&self, kappa: f64) -> GapParams {
        GapParams { kappa, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapVerdict {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub gap_multiplier: f64,
}

/// Weights of `A … J` inside the braces of `Φ`.
pub fn weights(u: f64, v: f64) -> [f64; 10] {
    let h = v / 2.0 - u;
    let w = v - 2.0 * u;
    [h * h, w, 1.0, w, w, 1.0, 1.0, 2.0, 2.0, 2.0]
}

/// The braced combination `(v/2−u)²A + (v−2u)(B + D + E) + C + F + G + 2(H + I + J)`.
pub fn bracket(params: &GapParams) -> Result<f64, GapError> {
    params.validate()?;
    let w = weights(params.u, params.v);
    let mut s = 0.0;
    for (label, weight) in CoefficientLabel::ALL.iter().zip(w) {
        s += weight * eval(*label, params.kappa, params.u)?;
    }
    Ok(s)
}

/// `Φ(u, v, κ) = (κ/π)² · bracket`.
pub fn phi(params: &GapParams) -> Result<f64, GapError> {
    let r = params.kappa / PI;
    Ok(r * r * bracket(params)?)
}

pub fn check(params: &GapParams) -> Result<GapVerdict, GapError> {
    let lhs = eval(CoefficientLabel::A, params.kappa, params.u)?;
    let rhs = phi(params)?;
    let margin = lhs - rhs;
    Ok(GapVerdict { holds: margin > 0.0, lhs, rhs, margin, gap_multiplier: params.kappa / PI })
}

/// Sign of the margin decided in exact rational arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactVerdict {
    pub holds: bool,
    /// Rational margin rounded to `f64`.
    pub margin: f64,
    /// Bound on the neglected Taylor remainders, including the `π` bracket.
    pub error_bound: f64,
}

/// Re-decides [`check`] with the inputs taken as exact rationals. `π²` is
/// bracketed by rationals, so `holds` is certified whenever
/// `|margin| > error_bound`.
pub fn check_exact(params: &GapParams) -> Result<ExactVerdict, GapError> {
    params.validate()?;
    let u = rational_from_f64(params.u);
    let v = rational_from_f64(params.v);
    let kappa = rational_from_f64(params.kappa);
    let two = BigRational::from_integer(2.into());
    let h = &v / &two - &u;
    let w = &v - &two * &u;
    let one = BigRational::from_integer(1.into());
    let weights = [&h * &h, w.clone(), one.clone(), w.clone(), w, one.clone(), one, two.clone(), two.clone(), two];
    let mut bracket = BigRational::zero();
    let mut bound = 0.0;
    let mut lhs = BigRational::zero();
    let mut a_err = 0.0;
    for (label, weight) in CoefficientLabel::ALL.iter().zip(weights.iter()) {
        let (value, err) = closed_forms::eval_exact(*label, &kappa, &u, EXACT_TAYLOR_TERMS)?;
        bound += rational_to_f64(weight).abs() * err;
        if *label == CoefficientLabel::A {
            lhs = value.clone();
            a_err = err;
        }
        bracket += weight * value;
    }
    // margin = A − κ²·bracket/π² at both rational endpoints of π²
    let k2 = &kappa * &kappa;
    let pi2_lo = BigRational::new(98_696_044_010i64.into(), 10_000_000_000i64.into());
    let pi2_hi = BigRational::new(98_696_044_011i64.into(), 10_000_000_000i64.into());
    let at = |pi2: &BigRational| &lhs - &k2 * &bracket / pi2;
    let (m_lo, m_hi) = (at(&pi2_lo), at(&pi2_hi));
    let spread = rational_to_f64(&(&m_lo - &m_hi).abs());
    let k2f = rational_to_f64(&k2) / (PI * PI);
    let error_bound = a_err + k2f * bound + spread;
    let worst = if m_lo < m_hi { m_lo } else { m_hi };
    let margin = rational_to_f64(&worst);
    Ok(ExactVerdict { holds: margin > error_bound, margin, error_bound })
}

fn holds_at(base: &GapParams, kappa: f64) -> Result<bool, GapError> {
    Ok(check(&base.with_kappa(kappa))?.holds)
}

/// Largest κ (to `tol`) with the inequality holding just to its left: scans
/// `[0.5, 20]` in steps of `0.25`, then bisects the first sign change after
/// the last holding scan point.
pub fn sup_kappa(u: f64, v: f64, extended_u: bool, tol: f64) -> Result<f64, GapError> {
    let base = GapParams::new(u, v, SCAN_START, extended_u)?;
    if !(tol > 0.0) {
        return Err(GapError::InvalidParams(format!("tol = {tol} must be positive")));
    }
    let steps = ((SCAN_END - SCAN_START) / SCAN_STEP).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| SCAN_START + i as f64 * SCAN_STEP).collect();
    let mut last_hold = None;
    for (i, &k) in grid.iter().enumerate() {
        if holds_at(&base, k)? {
            last_hold = Some(i);
        }
    }
    let i = last_hold.ok_or(GapError::Infeasible { u, v })?;
    if i + 1 == grid.len() {
        return Ok(grid[i]);
    }
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds_at(&base, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
