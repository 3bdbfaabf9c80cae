//! Truncated series algebra in a Laurent variable `λ`, a Laurent variable
//! `L` (standing for `log T`) and two square-zero generators `ε₁`, `ε₂`.
//!
//! Every element carries the window it lives in together with a precision
//! marker: the λ-order up to which its coefficients are exact. Products and
//! series that run past `lambda_max` are truncated, and the marker records
//! how far down that truncation can reach once poles are multiplied in.
//! Reading a coefficient at or above the marker is an error rather than a
//! silently wrong number.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::RingError;
use crate::scalar::Scalar;

pub type Complex = Complex64;

/// Sentinel precision for elements that are exact polynomials.
const EXACT: i64 = 1 << 40;

/// Which nilpotent generators a monomial carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EpsMask(u8);

impl EpsMask {
    pub const ONE: EpsMask = EpsMask(0);
    pub const E1: EpsMask = EpsMask(1);
    pub const E2: EpsMask = EpsMask(2);
    pub const E12: EpsMask = EpsMask(3);

    pub const ALL: [EpsMask; 4] = [Self::ONE, Self::E1, Self::E2, Self::E12];

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Option<EpsMask> {
        (bits < 4).then_some(EpsMask(bits))
    }

    pub fn is_one(self) -> bool {
        self.0 == 0
    }

    /// Product of two masks, `None` when a generator would be squared.
    pub fn combine(self, other: EpsMask) -> Option<EpsMask> {
        (self.0 & other.0 == 0).then_some(EpsMask(self.0 | other.0))
    }

    pub fn generator_count(self) -> u32 {
        self.0.count_ones()
    }
}

impl fmt::Display for EpsMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "1"),
            1 => write!(f, "ε₁"),
            2 => write!(f, "ε₂"),
            _ => write!(f, "ε₁ε₂"),
        }
    }
}

/// Inclusive exponent ranges kept by the algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lambda_min: i32,
    pub lambda_max: i32,
    pub log_min: i32,
    pub log_max: i32,
}

impl Default for Window {
    fn default() -> Self {
        Window { lambda_min: -16, lambda_max: 16, log_min: -2, log_max: 14 }
    }
}

impl Window {
    pub fn new(lambda_min: i32, lambda_max: i32, log_min: i32, log_max: i32) -> Self {
        assert!(lambda_min <= 0 && lambda_max >= 0, "λ window must contain 0");
        assert!(log_min <= 0 && log_max >= 0, "L window must contain 0");
        Window { lambda_min, lambda_max, log_min, log_max }
    }

    /// Same window pushed `extra` steps further in both λ directions.
    pub fn deepened(self, extra: i32) -> Self {
        Window {
            lambda_min: self.lambda_min - extra,
            lambda_max: self.lambda_max + extra,
            ..self
        }
    }

    pub fn intersect(self, other: Window) -> Window {
        Window {
            lambda_min: self.lambda_min.max(other.lambda_min),
            lambda_max: self.lambda_max.min(other.lambda_max),
            log_min: self.log_min.max(other.log_min),
            log_max: self.log_max.min(other.log_max),
        }
    }

    pub fn contains(&self, m: Monomial) -> bool {
        (self.lambda_min..=self.lambda_max).contains(&m.lambda)
            && (self.log_min..=self.log_max).contains(&m.log)
    }

    fn lambda_len(&self) -> usize {
        (self.lambda_max - self.lambda_min + 1) as usize
    }

    fn log_len(&self) -> usize {
        (self.log_max - self.log_min + 1) as usize
    }

    fn slot(&self, m: Monomial) -> usize {
        let l = (m.lambda - self.lambda_min) as usize;
        let g = (m.log - self.log_min) as usize;
        (l * self.log_len() + g) * 4 + m.eps.bits() as usize
    }

    fn monomial_at(&self, slot: usize) -> Monomial {
        let eps = EpsMask((slot % 4) as u8);
        let rest = slot / 4;
        let g = (rest % self.log_len()) as i32;
        let l = (rest / self.log_len()) as i32;
        Monomial { lambda: l + self.lambda_min, log: g + self.log_min, eps }
    }
}

/// `λ^lambda · L^log · eps`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial {
    pub lambda: i32,
    pub log: i32,
    pub eps: EpsMask,
}

impl Monomial {
    pub const fn new(lambda: i32, log: i32, eps: EpsMask) -> Self {
        Monomial { lambda, log, eps }
    }

    pub const fn unit() -> Self {
        Monomial { lambda: 0, log: 0, eps: EpsMask::ONE }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "λ^{} L^{} {}", self.lambda, self.log, self.eps)
    }
}

/// Element of the truncated algebra. Immutable once built.
#[derive(Clone, Debug)]
pub struct JetElement<S: Scalar = Complex> {
    window: Window,
    /// Sorted by monomial, no exact zeros.
    terms: Vec<(Monomial, S)>,
    /// Coefficients with λ-power strictly below this are exact.
    known_to: i64,
}

impl<S: Scalar> JetElement<S> {
    pub fn zero(window: Window) -> Self {
        JetElement { window, terms: Vec::new(), known_to: EXACT }
    }

    pub fn one(window: Window) -> Self {
        Self::constant(window, S::ONE)
    }

    pub fn constant(window: Window, c: S) -> Self {
        let mut terms = Vec::new();
        if !c.is_zero() {
            terms.push((Monomial::unit(), c));
        }
        JetElement { window, terms, known_to: EXACT }
    }

    pub fn real(window: Window, x: f64) -> Self {
        Self::constant(window, S::from_f64(x))
    }

    pub fn monomial(window: Window, m: Monomial, c: S) -> Result<Self, RingError> {
        if !window.contains(m) {
            return Err(RingError::OutOfWindow { monomial: m, window });
        }
        Ok(Self::from_terms(window, [(m, c)]))
    }

    /// Builds an exact element; monomials outside the window are dropped.
    pub fn from_terms(window: Window, terms: impl IntoIterator<Item = (Monomial, S)>) -> Self {
        let mut acc = vec![S::ZERO; window.lambda_len() * window.log_len() * 4];
        for (m, c) in terms {
            if window.contains(m) {
                acc[window.slot(m)] += c;
            }
        }
        Self::collect(window, &acc, EXACT)
    }

    fn collect(window: Window, dense: &[S], known_to: i64) -> Self {
        let terms = dense
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(slot, c)| (window.monomial_at(slot), *c))
            .collect();
        JetElement { window, terms, known_to }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn terms(&self) -> &[(Monomial, S)] {
        &self.terms
    }

    /// Exclusive upper bound of the λ-powers whose coefficients are exact.
    pub fn exact_below(&self) -> i64 {
        self.known_to.min(self.window.lambda_max as i64 + 1)
    }

    /// True iff no nonzero coefficient is stored.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest stored λ-power (`None` for zero).
    pub fn lambda_order(&self) -> Option<i32> {
        self.terms.iter().map(|(m, _)| m.lambda).min()
    }

    pub fn coeff(&self, m: Monomial) -> S {
        self.terms
            .binary_search_by(|(k, _)| k.cmp(&m))
            .map(|i| self.terms[i].1)
            .unwrap_or(S::ZERO)
    }

    /// Coefficient at `λ^lambda L^log eps`, refusing indices outside the
    /// window or above the exact range.
    pub fn extract(&self, lambda: i32, log: i32, eps: EpsMask) -> Result<S, RingError> {
        let m = Monomial::new(lambda, log, eps);
        if !self.window.contains(m) {
            return Err(RingError::OutOfWindow { monomial: m, window: self.window });
        }
        if lambda as i64 >= self.exact_below() {
            return Err(RingError::Truncated { lambda, exact_below: self.exact_below() });
        }
        Ok(self.coeff(m))
    }

    pub fn scale(&self, c: S) -> Self {
        if c.is_zero() {
            return JetElement { window: self.window, terms: Vec::new(), known_to: self.known_to };
        }
        JetElement {
            window: self.window,
            terms: self.terms.iter().map(|(m, v)| (*m, *v * c)).collect(),
            known_to: self.known_to,
        }
    }

    /// The part carrying no nilpotent generator.
    pub fn eps_free(&self) -> Self {
        JetElement {
            window: self.window,
            terms: self.terms.iter().filter(|(m, _)| m.eps.is_one()).cloned().collect(),
            known_to: self.known_to,
        }
    }

    /// Coefficients summed against a concrete value of `L`, grouped by
    /// `(λ-power, mask)`.
    pub fn at_log(&self, log_value: f64) -> Vec<(i32, EpsMask, Complex)> {
        let mut out: Vec<(i32, EpsMask, Complex)> = Vec::new();
        for (m, c) in &self.terms {
            let v = c.to_complex() * log_value.powi(m.log);
            match out.iter_mut().find(|(l, e, _)| *l == m.lambda && *e == m.eps) {
                Some(slot) => slot.2 += v,
                None => out.push((m.lambda, m.eps, v)),
            }
        }
        out
    }

    fn combine_add(&self, other: &JetElement<S>, negate: bool) -> JetElement<S> {
        let window = self.window.intersect(other.window);
        let mut dense = vec![S::ZERO; window.lambda_len() * window.log_len() * 4];
        for (m, c) in &self.terms {
            if window.contains(*m) {
                dense[window.slot(*m)] += *c;
            }
        }
        for (m, c) in &other.terms {
            if window.contains(*m) {
                dense[window.slot(*m)] += if negate { -*c } else { *c };
            }
        }
        Self::collect(window, &dense, self.known_to.min(other.known_to))
    }

    /// Product with ε-nilpotency; terms above the window are dropped, terms
    /// below it are an error.
    pub fn checked_mul(&self, other: &JetElement<S>) -> Result<JetElement<S>, RingError> {
        let window = self.window.intersect(other.window);
        let mut dense = vec![S::ZERO; window.lambda_len() * window.log_len() * 4];
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let Some(eps) = ma.eps.combine(mb.eps) else { continue };
                let lambda = ma.lambda + mb.lambda;
                let log = ma.log + mb.log;
                if lambda > window.lambda_max || log > window.log_max {
                    continue;
                }
                if lambda < window.lambda_min {
                    return Err(RingError::LambdaUnderflow { power: lambda, lambda_min: window.lambda_min });
                }
                if log < window.log_min {
                    return Err(RingError::LogUnderflow { power: log, log_min: window.log_min });
                }
                dense[window.slot(Monomial { lambda, log, eps })] += *ca * *cb;
            }
        }
        let ord_a = self.lambda_order().map_or(EXACT, i64::from);
        let ord_b = other.lambda_order().map_or(EXACT, i64::from);
        let known_to = (self.known_to.saturating_add(ord_b))
            .min(other.known_to.saturating_add(ord_a))
            .min(self.known_to.saturating_add(other.known_to))
            .min(window.lambda_max as i64 + 1)
            .min(EXACT);
        Ok(Self::collect(window, &dense, known_to))
    }

    /// Multiplicative inverse. The ε-free part must have a single monomial at
    /// its lowest λ-order; the remainder is expanded as a geometric series.
    pub fn inv(&self) -> Result<JetElement<S>, RingError> {
        if self.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        let free: Vec<&(Monomial, S)> = self.terms.iter().filter(|(m, _)| m.eps.is_one()).collect();
        let Some(low) = free.iter().map(|(m, _)| m.lambda).min() else {
            return Err(RingError::UnsupportedDivisor("divisor is nilpotent".into()));
        };
        let leading: Vec<_> = free.iter().filter(|(m, _)| m.lambda == low).collect();
        if leading.len() != 1 {
            return Err(RingError::UnsupportedDivisor(format!(
                "{} L-monomials share the leading λ^{low}",
                leading.len()
            )));
        }
        let (lead, c) = **leading[0];
        let inv_lead = JetElement::monomial(
            self.window,
            Monomial::new(-lead.lambda, -lead.log, EpsMask::ONE),
            c.recip(),
        )
        .map_err(|_| RingError::LambdaUnderflow { power: -lead.lambda, lambda_min: self.window.lambda_min })?;
        // a = lead·(1 + r); the leading monomial is removed exactly, so r
        // has no constant term even when c·c⁻¹ rounds away from 1
        let lead_term = JetElement::monomial(self.window, lead, c)?;
        let r = (self - &lead_term).checked_mul(&inv_lead)?;
        let minus_r = -r;
        let series = geometric_like(&minus_r, |_| S::ONE)?;
        series.checked_mul(&inv_lead)
    }

    /// `exp` of an element whose ε-free part is a constant plus positive
    /// λ-orders with no `L`; nilpotent parts may carry any `L`-power.
    pub fn exp(&self) -> Result<JetElement<S>, RingError> {
        let c0 = self.coeff(Monomial::unit());
        for (m, _) in &self.terms {
            if !m.eps.is_one() || *m == Monomial::unit() {
                continue;
            }
            if m.log != 0 {
                return Err(RingError::UnsupportedExponent(format!("residual L-power in {m}")));
            }
            if m.lambda < 1 {
                return Err(RingError::UnsupportedExponent(format!("non-positive λ-order in {m}")));
            }
        }
        let rest = self - &JetElement::constant(self.window, c0);
        let series = geometric_like(&rest, |n| S::from_f64(n as f64).recip())?;
        Ok(series.scale(c0.exp()))
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    /// Coefficient-wise comparison on the shared window, relative to the
    /// larger of the two magnitudes.
    pub fn approx_eq(&self, other: &JetElement<S>, rel_tol: f64) -> bool {
        let diff = self - other;
        let scale = self.max_abs().max(other.max_abs()).max(f64::MIN_POSITIVE);
        diff.max_abs() <= rel_tol * scale
    }
}

/// `Σ_n x^n · Π_{k≤n} w(k)`: the geometric series when `w ≡ 1`, `exp` when
/// `w(k) = 1/k`. Stops once a term is truncated to zero.
fn geometric_like<S: Scalar>(x: &JetElement<S>, weight: impl Fn(usize) -> S) -> Result<JetElement<S>, RingError> {
    let window = x.window;
    let cap = (window.lambda_max - window.lambda_min) as usize + 8;
    let mut sum = JetElement::one(window);
    let mut term = JetElement::one(window);
    for n in 1..=cap {
        term = term.checked_mul(x)?.scale(weight(n));
        if term.is_zero() {
            sum.known_to = sum.known_to.min(term.known_to);
            return Ok(sum);
        }
        sum = &sum + &term;
    }
    Err(RingError::SeriesDidNotTerminate { steps: cap })
}

impl<S: Scalar> PartialEq for JetElement<S> {
    /// Exact coefficient-wise equality on the shared window.
    fn eq(&self, other: &Self) -> bool {
        (self - other).is_zero()
    }
}

impl<S: Scalar> Add for &JetElement<S> {
    type Output = JetElement<S>;
    fn add(self, rhs: &JetElement<S>) -> JetElement<S> {
        self.combine_add(rhs, false)
    }
}

impl<S: Scalar> Sub for &JetElement<S> {
    type Output = JetElement<S>;
    fn sub(self, rhs: &JetElement<S>) -> JetElement<S> {
        self.combine_add(rhs, true)
    }
}

impl<S: Scalar> Add for JetElement<S> {
    type Output = JetElement<S>;
    fn add(self, rhs: JetElement<S>) -> JetElement<S> {
        &self + &rhs
    }
}

impl<S: Scalar> Sub for JetElement<S> {
    type Output = JetElement<S>;
    fn sub(self, rhs: JetElement<S>) -> JetElement<S> {
        &self - &rhs
    }
}

impl<S: Scalar> Neg for JetElement<S> {
    type Output = JetElement<S>;
    fn neg(self) -> JetElement<S> {
        self.scale(-S::ONE)
    }
}

impl<S: Scalar> Neg for &JetElement<S> {
    type Output = JetElement<S>;
    fn neg(self) -> JetElement<S> {
        self.scale(-S::ONE)
    }
}

impl<S: Scalar> Mul<S> for &JetElement<S> {
    type Output = JetElement<S>;
    fn mul(self, rhs: S) -> JetElement<S> {
        self.scale(rhs)
    }
}

impl<S: Scalar> fmt::Display for JetElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·{m}")?;
        }
        Ok(())
    }
}
