//! Explicit leading coefficients `A_κ … J_κ`.
//!
//! All ten formulas live in one term table: each term is
//! `poly(u) · trig(κ·arg) / κ^p` with `trig ∈ {1, sin, cos}` and
//! `arg ∈ {u, 1, 1 − u}`. The same table drives
//!
//! - the direct floating-point evaluation used away from `κ = 0`,
//! - the exact κ-Taylor expansion, whose negative powers must cancel to the
//!   zero polynomial (a transcription tripwire),
//! - an exact rational evaluation at rational `(κ, u)` used as the
//!   extended-precision reference.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::ClosedFormError;
use crate::scalar::Dd;

/// Truncation order of the cached κ-series used by [`eval`].
pub const SERIES_ORDER: usize = 120;
/// [`eval`] falls back to exact arithmetic when neither floating-point
/// branch is estimated to reach this relative accuracy.
pub const FALLBACK_REL_ERR: f64 = 1e-11;
/// Rounding-error estimate per accumulated magnitude.
const ROUNDING: f64 = 4.0 * f64::EPSILON;
/// The same for double-double sums.
const ROUNDING_DD: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoefficientLabel {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
}

impl CoefficientLabel {
    pub const ALL: [CoefficientLabel; 10] = [
        Self::A,
        Self::B,
        Self::C,
        Self::D,
        Self::E,
        Self::F,
        Self::G,
        Self::H,
        Self::I,
        Self::J,
    ];

    pub fn as_char(self) -> char {
        match self {
            Self::A => 'A',
            Self::B => 'B',
            Self::C => 'C',
            Self::D => 'D',
            Self::E => 'E',
            Self::F => 'F',
            Self::G => 'G',
            Self::H => 'H',
            Self::I => 'I',
            Self::J => 'J',
        }
    }

    /// D and E are both `−A/2`.
    pub fn delegate(self) -> Option<(CoefficientLabel, f64)> {
        match self {
            Self::D | Self::E => Some((Self::A, -0.5)),
            _ => None,
        }
    }
}

impl fmt::Display for CoefficientLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for CoefficientLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next().map(|c| c.to_ascii_uppercase()), chars.next()) {
            (Some(c), None) => Self::ALL
                .into_iter()
                .find(|l| l.as_char() == c)
                .ok_or_else(|| format!("unknown coefficient {s:?} (expected A..J)")),
            _ => Err(format!("unknown coefficient {s:?} (expected A..J)")),
        }
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact rational polynomial in `u`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UPoly {
    /// Index = power of `u`; no trailing zeros.
    coeffs: Vec<BigRational>,
}

impl UPoly {
    pub fn zero() -> Self {
        UPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        UPoly::from_coeffs(vec![c])
    }

    pub fn from_coeffs(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UPoly { coeffs }
    }

    /// `u^k`.
    pub fn monomial(k: usize, c: BigRational) -> Self {
        let mut coeffs = vec![BigRational::zero(); k + 1];
        coeffs[k] = c;
        UPoly::from_coeffs(coeffs)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn add_assign_scaled(&mut self, other: &UPoly, scale: &BigRational) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), BigRational::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * scale;
        }
        let trimmed = std::mem::take(&mut self.coeffs);
        *self = UPoly::from_coeffs(trimmed);
    }

    pub fn mul(&self, other: &UPoly) -> UPoly {
        if self.is_zero() || other.is_zero() {
            return UPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UPoly::from_coeffs(out)
    }

    pub fn eval_rational(&self, u: &BigRational) -> BigRational {
        self.coeffs.iter().rev().fold(BigRational::zero(), |acc, c| acc * u + c)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + to_f64(c))
    }

    /// `Σ |c_k|`, a bound on `|p(u)|` for `|u| ≤ 1`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| to_f64(&c.abs())).sum()
    }
}

impl fmt::Display for UPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}*u")?,
                _ => write!(f, "{a}*u^{k}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for UPoly {
    type Err = ClosedFormError;

    /// Parses sums like `-11/3 + 8u - 8u^2 + 4u^3/3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ClosedFormError::Parse(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        let mut pieces: Vec<(bool, String)> = Vec::new();
        for ch in compact.chars() {
            match ch {
                '+' | '-' => pieces.push((ch == '-', String::new())),
                _ => {
                    if pieces.is_empty() {
                        pieces.push((false, String::new()));
                    }
                    pieces.last_mut().unwrap().1.push(ch);
                }
            }
        }
        let mut poly = UPoly::zero();
        for (negative, body) in pieces {
            let (head, den) = match body.split_once('/') {
                Some((h, d)) => (h, d.parse::<i64>().map_err(|_| err())?),
                None => (body.as_str(), 1),
            };
            let (num, power) = match head.find('u') {
                None => (head.parse::<i64>().map_err(|_| err())?, 0usize),
                Some(pos) => {
                    let num = if pos == 0 { 1 } else { head[..pos].parse::<i64>().map_err(|_| err())? };
                    let tail = &head[pos + 1..];
                    let power = if tail.is_empty() {
                        1
                    } else {
                        tail.strip_prefix('^').ok_or_else(err)?.parse::<usize>().map_err(|_| err())?
                    };
                    (num, power)
                }
            };
            let value = rat(if negative { -num } else { num }, den);
            poly.add_assign_scaled(&UPoly::monomial(power, value), &BigRational::one());
        }
        Ok(poly)
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for a direct conversion
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Argument multiplying κ inside a trigonometric factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrigArg {
    /// `κu`
    U,
    /// `κ`
    One,
    /// `κ(1 − u)`
    OneMinusU,
}

impl TrigArg {
    fn value(self, u: f64) -> f64 {
        match self {
            TrigArg::U => u,
            TrigArg::One => 1.0,
            TrigArg::OneMinusU => 1.0 - u,
        }
    }


    fn rational(self, u: &BigRational) -> BigRational {
        match self {
            TrigArg::U => u.clone(),
            TrigArg::One => BigRational::one(),
            TrigArg::OneMinusU => BigRational::one() - u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Trig {
    One,
    Sin(TrigArg),
    Cos(TrigArg),
}

/// `poly(u) · trig / κ^kappa_pow`.
#[derive(Clone, Debug)]
pub struct Term {
    pub kappa_pow: u32,
    pub trig: Trig,
    pub poly: UPoly,
}

impl Term {
    fn eval(&self, kappa: f64, u: f64) -> f64 {
        let t = match self.trig {
            Trig::One => 1.0,
            Trig::Sin(a) => (kappa * a.value(u)).sin(),
            Trig::Cos(a) => (kappa * a.value(u)).cos(),
        };
        self.poly.eval(u) * t / kappa.powi(self.kappa_pow as i32)
    }
}

use Trig::{Cos, Sin};
use TrigArg::{One as K1, OneMinusU as KC, U as KU};

type RawTerm = (u32, Trig, &'static str);

const TABLE_A: &[RawTerm] = &[
    (8, Trig::One, "-10"),
    (6, Trig::One, "2u - 2u^2 + u^3/3"),
    (4, Trig::One, "u^3/3 - u^4/4"),
    (9, Sin(KU), "8"),
    (8, Cos(KU), "10 - 8u"),
    (7, Sin(KU), "-4 + 10u - 4u^2"),
    (6, Cos(KU), "2u - 3u^2 + u^3"),
    (9, Sin(K1), "-8"),
    (6, Cos(K1), "-u^3/3"),
    (9, Sin(KC), "8"),
    (8, Cos(KC), "8u"),
    (7, Sin(KC), "-4u^2"),
    (6, Cos(KC), "-u^3"),
];

const TABLE_B: &[RawTerm] = &[
    (8, Trig::One, "1 - 2u"),
    (6, Trig::One, "-u^3/3 + u^4/6"),
    (4, Trig::One, "u^4/8 - u^5/12"),
    (8, Cos(KU), "-1 + 2u"),
    (7, Sin(KU), "-u + 2u^2 - u^3/3"),
    (6, Cos(KU), "u^2/2 - 2u^3/3 + u^4/6"),
    (7, Sin(K1), "u^3/3"),
    (6, Cos(K1), "-u^4/6"),
    (7, Sin(KC), "-u^3/3"),
    (6, Cos(KC), "-u^4/6"),
];

const TABLE_C: &[RawTerm] = &[
    (10, Trig::One, "-20"),
    (8, Trig::One, "2u - 2u^2"),
    (6, Trig::One, "-u^4/6 + u^5/15"),
    (4, Trig::One, "u^5/20 - u^6/36"),
    (11, Sin(KU), "12"),
    (10, Cos(KU), "20 - 12u"),
    (9, Sin(KU), "-6 + 20u - 6u^2"),
    (8, Cos(KU), "4u - 8u^2 + 2u^3"),
    (7, Sin(KU), "u^2 - 4u^3/3 + u^4/3"),
    (11, Sin(K1), "-12"),
    (7, Sin(K1), "u^4/6"),
    (6, Cos(K1), "-u^5/15"),
    (11, Sin(KC), "12"),
    (10, Cos(KC), "12u"),
    (9, Sin(KC), "-6u^2"),
    (8, Cos(KC), "-2u^3"),
    (7, Sin(KC), "u^4/3"),
];

const TABLE_F: &[RawTerm] = &[
    (10, Trig::One, "-66"),
    (8, Trig::One, "-11/3 + 8u - 8u^2 + 4u^3/3"),
    (6, Trig::One, "2u/3 - 2u^2/3 + 5u^3/6 - 2u^4/3 - u^5/60"),
    (4, Trig::One, "u^3/9 - u^4/8 + u^5/20 - u^6/72"),
    (11, Sin(KU), "84"),
    (10, Cos(KU), "66 - 84u"),
    (9, Sin(KU), "-16 + 66u - 42u^2"),
    (8, Cos(KU), "11/3 + 8u - 25u^2 + 38u^3/3"),
    (7, Sin(KU), "-4/3 + 11u/3 - 11u^3/3 + 11u^4/6"),
    (6, Cos(KU), "2u/3 - 7u^2/6 + u^3/2 + u^4/12 - u^5/12"),
    (11, Sin(K1), "-84"),
    (10, Cos(K1), "26"),
    (8, Cos(K1), "-4u^3/3"),
    (7, Sin(K1), "-2u^3/3 + u^4/3"),
    (6, Cos(K1), "-u^4/12 + u^5/60"),
    (11, Sin(KC), "84"),
    (10, Cos(KC), "-26 + 84u"),
    (9, Sin(KC), "26u - 42u^2"),
    (8, Cos(KC), "13u^2 - 38u^3/3"),
    (7, Sin(KC), "-11u^3/3 + 11u^4/6"),
    (6, Cos(KC), "-u^4/3 + u^5/12"),
];

const TABLE_G: &[RawTerm] = &[
    (10, Trig::One, "-148"),
    (8, Trig::One, "-14/3 + 18u - 18u^2 + 3u^3"),
    (6, Trig::One, "2u/3 - u^2 + 11u^3/6 - 7u^4/6"),
    (4, Trig::One, "u^3/9 - u^4/12"),
    (11, Sin(KU), "152"),
    (10, Cos(KU), "148 - 152u"),
    (9, Sin(KU), "-40 + 148u - 76u^2"),
    (8, Cos(KU), "14/3 + 22u - 56u^2 + 67u^3/3"),
    (7, Sin(KU), "-4/3 + 14u/3 + 2u^2 - 26u^3/3 + 10u^4/3"),
    (6, Cos(KU), "2u/3 - 4u^2/3 + u^3/2 + u^4/3 - u^5/6"),
    (11, Sin(K1), "-152"),
    (10, Cos(K1), "36"),
    (8, Cos(K1), "-3u^3"),
    (7, Sin(K1), "-u^3"),
    (11, Sin(KC), "152"),
    (10, Cos(KC), "-36 + 152u"),
    (9, Sin(KC), "36u - 76u^2"),
    (8, Cos(KC), "18u^2 - 67u^3/3"),
    (7, Sin(KC), "-5u^3 + 10u^4/3"),
    (6, Cos(KC), "-u^4/2 + u^5/6"),
];

const TABLE_H: &[RawTerm] = &[
    (10, Trig::One, "117"),
    (8, Trig::One, "-5/2 - 14u + 14u^2 - 7u^3/3"),
    (6, Trig::One, "u/2 - u^2/2 - 7u^3/6 + 25u^4/24"),
    (4, Trig::One, "u^3/12 - u^4/16"),
    (11, Sin(KU), "-130"),
    (10, Cos(KU), "-117 + 130u"),
    (9, Sin(KU), "38 - 117u + 65u^2"),
    (8, Cos(KU), "5/2 - 24u + 89u^2/2 - 58u^3/3"),
    (7, Sin(KU), "-1 + 5u/2 - 5u^2 + 7u^3 - 17u^4/6"),
    (6, Cos(KU), "u/2 - 3u^2/4 + u^3/2 - 5u^4/12 + u^5/6"),
    (11, Sin(K1), "130"),
    (10, Cos(K1), "-31"),
    (9, Sin(K1), "-4"),
    (8, Cos(K1), "7u^3/3"),
    (7, Sin(K1), "5u^3/6 - u^4/4"),
    (6, Cos(K1), "-u^3/6 + u^4/24"),
    (11, Sin(KC), "-130"),
    (10, Cos(KC), "31 - 130u"),
    (9, Sin(KC), "4 - 31u + 65u^2"),
    (8, Cos(KC), "4u - 31u^2/2 + 58u^3/3"),
    (7, Sin(KC), "-2u^2 + 13u^3/3 - 17u^4/6"),
    (6, Cos(KC), "-u^3/2 + 5u^4/12 - u^5/6"),
];

const TABLE_I: &[RawTerm] = &[
    (10, Trig::One, "-35"),
    (8, Trig::One, "-1/2 + 5u - 4u^2 + 2u^3/3"),
    (6, Trig::One, "5u^3/12 - u^4/4 + u^5/40"),
    (4, Trig::One, "-u^4/16 + u^5/20 - u^6/144"),
    (11, Sin(KU), "32"),
    (10, Cos(KU), "35 - 32u"),
    (9, Sin(KU), "-11 + 35u - 16u^2"),
    (8, Cos(KU), "1/2 + 6u - 27u^2/2 + 14u^3/3"),
    (7, Sin(KU), "u/2 + u^2/2 - 13u^3/6 + 3u^4/4"),
    (6, Cos(KU), "-u^2/4 + u^3/4 + u^4/24 - u^5/24"),
    (11, Sin(K1), "-32"),
    (10, Cos(K1), "5"),
    (8, Cos(K1), "-2u^3/3"),
    (7, Sin(K1), "-u^3/3 - u^4/12"),
    (6, Cos(K1), "u^4/8 - u^5/40"),
    (11, Sin(KC), "32"),
    (10, Cos(KC), "-5 + 32u"),
    (9, Sin(KC), "5u - 16u^2"),
    (8, Cos(KC), "5u^2/2 - 14u^3/3"),
    (7, Sin(KC), "-u^3/2 + 3u^4/4"),
    (6, Cos(KC), "u^5/24"),
];

const TABLE_J: &[RawTerm] = &[
    (10, Trig::One, "63"),
    (8, Trig::One, "-1/2 - 6u + 7u^2 - 7u^3/6"),
    (6, Trig::One, "-u^3/4 + u^4/8"),
    (4, Trig::One, "-u^4/16 + u^5/24"),
    (11, Sin(KU), "-50"),
    (10, Cos(KU), "-63 + 50u"),
    (9, Sin(KU), "20 - 63u + 25u^2"),
    (8, Cos(KU), "1/2 - 14u + 49u^2/2 - 43u^3/6"),
    (7, Sin(KU), "u/2 - 4u^2 + 14u^3/3 - 7u^4/6"),
    (6, Cos(KU), "-u^2/4 + 7u^3/12 - 5u^4/12 + u^5/12"),
    (11, Sin(K1), "50"),
    (10, Cos(K1), "-5"),
    (8, Cos(K1), "7u^3/6"),
    (7, Sin(K1), "u^4/4"),
    (6, Cos(K1), "u^4/24"),
    (11, Sin(KC), "-50"),
    (10, Cos(KC), "5 - 50u"),
    (9, Sin(KC), "-5u + 25u^2"),
    (8, Cos(KC), "-5u^2/2 + 43u^3/6"),
    (7, Sin(KC), "5u^3/6 - 7u^4/6"),
    (6, Cos(KC), "u^4/6 - u^5/12"),
];

fn raw_table(label: CoefficientLabel) -> &'static [RawTerm] {
    use CoefficientLabel::*;
    match label {
        A | D | E => TABLE_A,
        B => TABLE_B,
        C => TABLE_C,
        F => TABLE_F,
        G => TABLE_G,
        H => TABLE_H,
        I => TABLE_I,
        J => TABLE_J,
    }
}

/// The parsed term table of a label (D and E share A's table).
pub fn terms(label: CoefficientLabel) -> &'static [Term] {
    static TABLES: OnceLock<Vec<Vec<Term>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        CoefficientLabel::ALL
            .iter()
            .map(|&l| {
                raw_table(l)
                    .iter()
                    .map(|&(kappa_pow, trig, src)| Term {
                        kappa_pow,
                        trig,
                        poly: src.parse().expect("term table entry parses"),
                    })
                    .collect()
            })
            .collect()
    });
    &tables[label as usize]
}

fn check_u(u: f64) -> Result<(), ClosedFormError> {
    if u > 0.0 && u <= 1.0 {
        Ok(())
    } else {
        Err(ClosedFormError::InvalidU(u))
    }
}

/// Term-by-term evaluation of the displayed formula. Loses accuracy to
/// cancellation as κ → 0.
pub fn eval_direct(label: CoefficientLabel, kappa: f64, u: f64) -> Result<f64, ClosedFormError> {
    check_u(u)?;
    if let Some((base, factor)) = label.delegate() {
        return Ok(factor * eval_direct(base, kappa, u)?);
    }
    Ok(terms(label).iter().map(|t| t.eval(kappa, u)).sum())
}

/// Per-term magnitudes `|term(κ, u)|`, in table order.
pub fn term_magnitudes(label: CoefficientLabel, kappa: f64, u: f64) -> Vec<f64> {
    terms(label).iter().map(|t| t.eval(kappa, u).abs()).collect()
}

/// Value of a floating-point branch with an estimate of its absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

impl Estimate {
    pub fn rel_error(&self) -> f64 {
        self.abs_error / self.value.abs().max(f64::MIN_POSITIVE)
    }
}

/// How [`eval`] obtained a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Direct,
    Series,
    Exact,
}

/// Direct branch with a rounding estimate from the term magnitudes.
pub fn estimate_direct(label: CoefficientLabel, kappa: f64, u: f64) -> Result<Estimate, ClosedFormError> {
    check_u(u)?;
    let (base, factor) = label.delegate().unwrap_or((label, 1.0));
    let mut value = 0.0;
    let mut mag = 0.0;
    for t in terms(base) {
        let v = t.eval(kappa, u);
        value += v;
        mag += v.abs();
    }
    Ok(Estimate { value: factor * value, abs_error: factor.abs() * ROUNDING * mag })
}

/// Stops a series once two consecutive orders fall below this fraction of
/// the accumulated rounding level.
const TAIL_CUTOFF: f64 = 1e-3;

/// Cached κ-series in `f64`, with a rounding estimate and a truncation
/// estimate from the last orders summed.
pub fn estimate_series(label: CoefficientLabel, kappa: f64, u: f64) -> Result<Estimate, ClosedFormError> {
    check_u(u)?;
    let (base, factor) = label.delegate().unwrap_or((label, 1.0));
    let series = float_series(base);
    let (mut value, mut mag, mut kn) = (0.0, 0.0, 1.0);
    let mut small = 0;
    let mut last = 0.0;
    for coeffs in series {
        let (mut c, mut cm) = (0.0, 0.0);
        for a in coeffs.iter().rev() {
            c = c * u + a.hi;
            cm = cm * u + a.hi.abs();
        }
        value += c * kn;
        let m = cm * kn.abs();
        mag += m;
        last = m;
        small = if m < TAIL_CUTOFF * ROUNDING * mag { small + 1 } else { 0 };
        if small == 2 {
            break;
        }
        kn *= kappa;
    }
    let tail = if small == 2 { 0.0 } else { last };
    Ok(Estimate { value: factor * value, abs_error: factor.abs() * (ROUNDING * mag + tail) })
}

/// The same series summed in double-double arithmetic.
pub fn estimate_series_dd(label: CoefficientLabel, kappa: f64, u: f64) -> Result<Estimate, ClosedFormError> {
    check_u(u)?;
    let (base, factor) = label.delegate().unwrap_or((label, 1.0));
    let series = float_series(base);
    let (ud, kd) = (Dd::new(u), Dd::new(kappa));
    let (mut value, mut mag, mut kn) = (Dd::ZERO, 0.0, Dd::ONE);
    let (mut small, mut last) = (0, 0.0);
    for coeffs in series {
        let (mut c, mut cm) = (Dd::ZERO, 0.0);
        for a in coeffs.iter().rev() {
            c = c * ud + *a;
            cm = cm * u + a.hi.abs();
        }
        value = value + c * kn;
        let m = cm * kn.to_f64().abs();
        mag += m;
        last = m;
        small = if m < TAIL_CUTOFF * ROUNDING_DD * mag { small + 1 } else { 0 };
        if small == 2 {
            break;
        }
        kn = kn * kd;
    }
    let tail = if small == 2 { 0.0 } else { last };
    Ok(Estimate { value: factor * value.to_f64(), abs_error: factor.abs() * (ROUNDING_DD * mag + tail) })
}

/// Evaluates the cached κ-series.
pub fn eval_series(label: CoefficientLabel, kappa: f64, u: f64) -> Result<f64, ClosedFormError> {
    Ok(estimate_series(label, kappa, u)?.value)
}

/// `A_κ … J_κ` at `(κ, u)` together with the branch that produced it: the
/// first of direct `f64`, series `f64`, series double-double whose error
/// estimate is within [`FALLBACK_REL_ERR`], else exact rational evaluation.
pub fn eval_with_branch(label: CoefficientLabel, kappa: f64, u: f64) -> Result<(f64, Branch), ClosedFormError> {
    if kappa != 0.0 {
        let d = estimate_direct(label, kappa, u)?;
        if d.rel_error() <= FALLBACK_REL_ERR {
            return Ok((d.value, Branch::Direct));
        }
    }
    let s = estimate_series(label, kappa, u)?;
    if s.rel_error() <= FALLBACK_REL_ERR {
        return Ok((s.value, Branch::Series));
    }
    let s = estimate_series_dd(label, kappa, u)?;
    if s.rel_error() <= FALLBACK_REL_ERR {
        return Ok((s.value, Branch::Series));
    }
    Ok((eval_exact_f64(label, kappa, u)?, Branch::Exact))
}

/// `A_κ … J_κ` at `(κ, u)`; see [`eval_with_branch`].
pub fn eval(label: CoefficientLabel, kappa: f64, u: f64) -> Result<f64, ClosedFormError> {
    Ok(eval_with_branch(label, kappa, u)?.0)
}

/// Exact rational evaluation at the binary values of `(κ, u)`, with Taylor
/// degree raised until the remainder bound is below `1e-16` relative.
pub fn eval_exact_f64(label: CoefficientLabel, kappa: f64, u: f64) -> Result<f64, ClosedFormError> {
    check_u(u)?;
    let k = rational_from_f64(kappa);
    let ur = rational_from_f64(u);
    let mut n = (2.0 * kappa.abs()).ceil() as usize + 40;
    loop {
        let (v, bound) = eval_exact(label, &k, &ur, n)?;
        let v = to_f64(&v);
        if bound <= 1e-16 * v.abs() || bound == 0.0 || n > 600 {
            return Ok(v);
        }
        n += 40;
    }
}

fn float_series(label: CoefficientLabel) -> &'static [Vec<Dd>] {
    static CACHE: [OnceLock<Vec<Vec<Dd>>>; 10] = [const { OnceLock::new() }; 10];
    CACHE[label as usize].get_or_init(|| {
        let s = kappa_taylor(label, SERIES_ORDER).expect("term table passes the cancellation check");
        s.coefficients().iter().map(|p| p.coeffs().iter().map(rational_to_dd).collect()).collect()
    })
}

/// Nearest double-double.
fn rational_to_dd(r: &BigRational) -> Dd {
    let hi = to_f64(r);
    let lo = to_f64(&(r - rational_from_f64(hi)));
    Dd { hi, lo }
}

/// Exact Taylor series in κ with u-polynomial coefficients, starting at κ⁰.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaSeries {
    pub label: CoefficientLabel,
    /// Index = power of κ.
    coefficients: Vec<UPoly>,
}

impl KappaSeries {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[UPoly] {
        &self.coefficients
    }

    pub fn coefficient(&self, power: usize) -> Option<&UPoly> {
        self.coefficients.get(power)
    }

    /// Coefficients evaluated at a rational `u`.
    pub fn at_u(&self, u: &BigRational) -> Vec<BigRational> {
        self.coefficients.iter().map(|p| p.eval_rational(u)).collect()
    }
}

/// `n!` as a rational.
fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Integer coefficients of `arg(u)^n`, built incrementally.
fn arg_power(arg: TrigArg, powers: &mut Vec<Vec<BigInt>>, n: usize) -> &[BigInt] {
    while powers.len() <= n {
        let prev = powers.last().cloned().unwrap_or_else(|| vec![BigInt::one()]);
        let next = if powers.is_empty() {
            prev
        } else {
            match arg {
                TrigArg::One => prev,
                TrigArg::U => std::iter::once(BigInt::zero()).chain(prev).collect(),
                TrigArg::OneMinusU => {
                    let mut out = prev.clone();
                    out.push(BigInt::zero());
                    for (k, c) in prev.iter().enumerate() {
                        out[k + 1] -= c;
                    }
                    out
                }
            }
        };
        powers.push(next);
    }
    &powers[n]
}

/// `±1` for the κ^n Taylor coefficient of `trig`, `None` when it vanishes.
fn trig_sign(trig: Trig, n: usize) -> Option<i32> {
    let alternating = if (n / 2) % 2 == 0 { 1 } else { -1 };
    match trig {
        Trig::One => (n == 0).then_some(1),
        Trig::Sin(_) => (n % 2 == 1).then_some(alternating),
        Trig::Cos(_) => (n % 2 == 0).then_some(alternating),
    }
}

/// Highest negative κ-power appearing in the term table of `label`; all of
/// `κ^-1 … κ^-pole_order` cancel in [`kappa_taylor`].
pub fn pole_order(label: CoefficientLabel) -> usize {
    let base = label.delegate().map_or(label, |(b, _)| b);
    terms(base).iter().map(|t| t.kappa_pow as usize).max().unwrap_or(0)
}

/// Expands every term of `label` exactly and sums. Fails if any negative κ-power
/// survives, which can only mean a mistranscribed coefficient.
pub fn kappa_taylor(label: CoefficientLabel, order: usize) -> Result<KappaSeries, ClosedFormError> {
    let (base, factor) = label.delegate().unwrap_or((label, 1.0));
    let mut series = taylor_from_terms(label.as_char(), terms(base), order)?;
    if factor != 1.0 {
        let half = rat(-1, 2);
        for c in &mut series {
            let mut scaled = UPoly::zero();
            scaled.add_assign_scaled(c, &half);
            *c = scaled;
        }
    }
    Ok(KappaSeries { label, coefficients: series })
}

/// κ-Taylor coefficients of `Σ poly·trig/κ^p` from κ⁰ to κ^order.
///
/// Index `i = m + max_pole` collects κ^m over the common denominator
/// `i! · lcd`, so every contribution is an integer polynomial.
fn taylor_from_terms(tag: char, table: &[Term], order: usize) -> Result<Vec<UPoly>, ClosedFormError> {
    let max_pole = table.iter().map(|t| t.kappa_pow as usize).max().unwrap_or(0);
    let len = order + max_pole + 1;
    let lcd = table
        .iter()
        .flat_map(|t| t.poly.coeffs().iter().map(|c| c.denom().clone()))
        .fold(BigInt::one(), |acc, d| num_integer::Integer::lcm(&acc, &d));
    let mut acc: Vec<Vec<BigInt>> = vec![Vec::new(); len];
    let mut powers: [Vec<Vec<BigInt>>; 3] = Default::default();
    for term in table {
        let p = term.kappa_pow as usize;
        let arg = match term.trig {
            Trig::One => TrigArg::One,
            Trig::Sin(a) | Trig::Cos(a) => a,
        };
        let scaled: Vec<BigInt> = term.poly.coeffs().iter().map(|c| c.numer() * (&lcd / c.denom())).collect();
        // n = κ-degree of trig; κ-power m = n − p, index i = n − p + max_pole ≥ n
        for n in 0..=(order + p) {
            let Some(sign) = trig_sign(term.trig, n) else { continue };
            let i = n + max_pole - p;
            let ratio: BigInt = ((n + 1)..=i).fold(BigInt::from(sign), |a, k| a * BigInt::from(k));
            let ap = arg_power(arg, &mut powers[arg as usize], n);
            let slot = &mut acc[i];
            if slot.len() < scaled.len() + ap.len() - 1 {
                slot.resize(scaled.len() + ap.len() - 1, BigInt::zero());
            }
            for (a, ca) in scaled.iter().enumerate() {
                let ca = ca * &ratio;
                for (b, cb) in ap.iter().enumerate() {
                    if !cb.is_zero() {
                        slot[a + b] += &ca * cb;
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(len);
    for (i, nums) in acc.into_iter().enumerate() {
        let den = factorial(i) * &lcd;
        let poly = UPoly::from_coeffs(nums.into_iter().map(|c| BigRational::new(c, den.clone())).collect());
        if i < max_pole && !poly.is_zero() {
            return Err(ClosedFormError::Cancellation { label: tag, power: i as i32 - max_pole as i32, poly: poly.to_string() });
        }
        if i >= max_pole {
            out.push(poly);
        }
    }
    Ok(out)
}

/// Exact value of the formula at rational `(κ, u)` with sin/cos replaced by
/// their Taylor polynomials of degree `< taylor_terms`. Returns the value and
/// a rigorous bound on the neglected remainder.
pub fn eval_exact(
    label: CoefficientLabel,
    kappa: &BigRational,
    u: &BigRational,
    taylor_terms: usize,
) -> Result<(BigRational, f64), ClosedFormError> {
    let uf = to_f64(u);
    check_u(uf)?;
    if kappa.is_zero() {
        let s = kappa_taylor(label, 0)?;
        return Ok((s.coefficients()[0].eval_rational(u), 0.0));
    }
    let (base, factor) = label.delegate().unwrap_or((label, 1.0));
    let kf = to_f64(kappa).abs();
    let mut total = BigRational::zero();
    let mut bound = 0.0;
    let mut cache: std::collections::HashMap<Trig, (BigRational, f64)> = Default::default();
    for term in terms(base) {
        let trig = match term.trig {
            Trig::One => BigRational::one(),
            t @ (Trig::Sin(a) | Trig::Cos(a)) => {
                let (sum, rem) = cache
                    .entry(t)
                    .or_insert_with(|| {
                        let x = kappa * a.rational(u);
                        taylor_trig(&x, matches!(t, Trig::Sin(_)), taylor_terms)
                    })
                    .clone();
                bound += term.poly.eval(uf).abs() * rem / kf.powi(term.kappa_pow as i32);
                sum
            }
        };
        let pole = kappa.pow(term.kappa_pow as i32);
        total += term.poly.eval_rational(u) * trig / pole;
    }
    if factor != 1.0 {
        total *= rat(-1, 2);
        bound *= 0.5;
    }
    Ok((total, bound))
}

/// Taylor polynomial of `sin x` or `cos x` with degrees `< terms`, summed over
/// the common denominator `q^N · N!`, and its Lagrange remainder bound.
fn taylor_trig(x: &BigRational, sine: bool, terms: usize) -> (BigRational, f64) {
    if x.is_zero() {
        return (if sine { BigRational::zero() } else { BigRational::one() }, 0.0);
    }
    let start = usize::from(sine);
    let degrees: Vec<usize> = (start..terms.max(start + 1)).step_by(2).collect();
    let top = *degrees.last().expect("at least one degree");
    let (p, q) = (x.numer(), x.denom());
    // term n = ±p^n q^(top−n) · top!/n!  over  q^top · top!
    let mut numer = BigInt::zero();
    let mut ratio = BigInt::one(); // top!/n!, built downward from n = top
    let mut pn = p.pow(top as u32);
    let mut qn = BigInt::one();
    let q2 = q * q;
    let p2 = p * p;
    for (i, &n) in degrees.iter().enumerate().rev() {
        let t = &pn * &qn * &ratio;
        if i % 2 == 0 {
            numer += t;
        } else {
            numer -= t;
        }
        if n >= 2 {
            ratio *= BigInt::from(n) * BigInt::from(n - 1);
            pn /= &p2;
            qn *= &q2;
        }
    }
    let denom = q.pow(top as u32) * factorial(top);
    let n = top + 2;
    let xf = to_f64(x).abs();
    let rem = if xf == 0.0 { 0.0 } else { (n as f64 * xf.ln() - ln_factorial(n)).exp() };
    (BigRational::new(numer, denom), rem)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Exact conversion of a finite `f64` to a rational.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    to_f64(x)
}

/// Partial Euler product for `a₃ = Π_p (1 + 4/p + 1/p²)(1 − 1/p)⁴`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerProduct {
    pub prime_limit: u64,
    pub primes_used: usize,
    /// Product over `p ≤ prime_limit`.
    pub value: f64,
    /// `0 ≤ value − a₃ ≤ tail_bound`.
    pub tail_bound: f64,
}

/// `(1 + 4/p + 1/p²)(1 − 1/p)⁴ − 1 = −9/p² + 16/p³ − 9/p⁴ + 1/p⁶`.
pub fn a3_factor(p: u64) -> f64 {
    let x = 1.0 / p as f64;
    let x2 = x * x;
    1.0 + x2 * (-9.0 + x * (16.0 + x * (-9.0 + x * x)))
}

/// Primes `≤ limit` by the sieve of Eratosthenes.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

/// Partial product over primes up to `prime_limit` with a tail bound.
///
/// Every factor lies in `(0, 1)`, so partial products decrease. For
/// `p > P ≥ 5` each factor is `≥ 1 − 9/p²`, so the log of the tail is at
/// least `−Σ_{p>P} 9/(p² − 9)`. Using `π(x) < 1.25506·x/ln x` and partial
/// summation, `Σ_{p>P} 1/p² < 2.51012/(P ln P)`.
pub fn a3(prime_limit: u64) -> EulerProduct {
    let limit = prime_limit.max(2);
    let primes = primes_up_to(limit);
    // every factor lies in (0, 1); rounding error is about primes.len()·ε relative
    let value: f64 = primes.iter().map(|&p| a3_factor(p)).product();
    let p = limit as f64;
    let tail_log = if limit >= 5 {
        9.0 / (1.0 - 9.0 / (p * p)) * 2.51012 / (p * p.ln())
    } else {
        // crude: Σ_{n>P} 9/(n² − 9) ≤ 9/(P − 3) is useless below 5; use the
        // first few primes explicitly and bound the rest from p = 5
        let explicit: f64 = [3.0f64, 5.0]
            .iter()
            .filter(|&&q| q > p)
            .map(|&q| -(a3_factor(q as u64) - 1.0).ln_1p())
            .sum();
        explicit + 9.0 / (1.0 - 9.0 / 25.0) * 2.51012 / (5.0 * 5f64.ln())
    };
    EulerProduct {
        prime_limit: limit,
        primes_used: primes.len(),
        value,
        tail_bound: value * (-(-tail_log).exp_m1()),
    }
}

/// `42/9!`, the κ → 0 limit of `A_κ` at `u = 1`.
pub fn sixth_moment_constant() -> BigRational {
    BigRational::new(BigInt::from(42), factorial(9))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_handles_table_syntax() {
        let p: UPoly = "-11/3 + 8u - 8u^2 + 4u^3/3".parse().unwrap();
        assert_eq!(p.coeffs(), &[rat(-11, 3), rat(8, 1), rat(-8, 1), rat(4, 3)]);
        let q: UPoly = "u^3/9".parse().unwrap();
        assert_eq!(q.degree(), Some(3));
        assert_eq!(q.coeffs()[3], rat(1, 9));
        let r: UPoly = "2u/3 - u".parse().unwrap();
        assert_eq!(r.coeffs(), &[rat(0, 1), rat(-1, 3)]);
        assert!("u^".parse::<UPoly>().is_err());
        assert!("".parse::<UPoly>().is_err());
    }

    #[test]
    fn displayed_polynomials_have_degree_at_most_six() {
        for label in CoefficientLabel::ALL {
            for t in terms(label) {
                assert!(t.poly.degree().unwrap() <= 6, "{label}: {}", t.poly);
            }
        }
    }

    #[test]
    fn d_and_e_are_minus_half_a() {
        for &(k, u) in &[(0.1, 0.5), (3.0, 0.0909), (8.69, 0.0909), (-2.5, 1.0)] {
            let a = eval(CoefficientLabel::A, k, u).unwrap();
            assert_eq!(eval(CoefficientLabel::D, k, u).unwrap(), -a / 2.0);
            assert_eq!(eval(CoefficientLabel::E, k, u).unwrap(), -a / 2.0);
        }
    }

    #[test]
    fn u_outside_range_is_rejected() {
        assert!(eval(CoefficientLabel::A, 1.0, 0.0).is_err());
        assert!(eval(CoefficientLabel::A, 1.0, 1.5).is_err());
        assert!(eval(CoefficientLabel::A, 1.0, f64::NAN).is_err());
        assert!(eval(CoefficientLabel::A, 1.0, 1.0).is_ok());
    }

    #[test]
    fn a_at_zero_with_full_amplifier_is_sixth_moment_constant() {
        let s = kappa_taylor(CoefficientLabel::A, 4).unwrap();
        assert_eq!(s.coefficients()[0].eval_rational(&BigRational::one()), rat(42, 362880));
        let v = eval(CoefficientLabel::A, 1e-9, 1.0).unwrap();
        assert!((v - 42.0 / 362880.0).abs() < 1e-15);
    }

    #[test]
    fn half_amplifier_is_not_half_the_sixth_moment() {
        let s = kappa_taylor(CoefficientLabel::A, 0).unwrap();
        let half = s.coefficients()[0].eval_rational(&rat(1, 2));
        assert_ne!(half, rat(21, 362880));
        assert!(half > BigRational::zero());
    }

    #[test]
    fn cancellation_tripwire_fires_on_a_bad_table() {
        // A's table with one coefficient altered: 8 sin(κu)/κ⁹ → 9 sin(κu)/κ⁹
        let mut bad: Vec<Term> = terms(CoefficientLabel::A).to_vec();
        let row = bad.iter_mut().find(|t| t.kappa_pow == 9 && t.trig == Trig::Sin(TrigArg::U)).unwrap();
        row.poly = "9".parse().unwrap();
        match taylor_from_terms('A', &bad, 4) {
            Err(ClosedFormError::Cancellation { label: 'A', power, .. }) => assert!(power < 0),
            other => panic!("tripwire did not fire: {other:?}"),
        }
        assert!(taylor_from_terms('A', terms(CoefficientLabel::A), 4).is_ok());
    }

    #[test]
    fn sine_of_u_expands_to_rational_taylor_coefficients() {
        // sin(κu)/κ = u − u³κ²/6 + u⁵κ⁴/120 − …
        let t = [Term { kappa_pow: 1, trig: Trig::Sin(TrigArg::U), poly: UPoly::constant(BigRational::one()) }];
        let s = taylor_from_terms('x', &t, 4).unwrap();
        assert_eq!(s[0], "u".parse().unwrap());
        assert!(s[1].is_zero());
        assert_eq!(s[2], "-u^3/6".parse().unwrap());
        assert_eq!(s[4], "u^5/120".parse().unwrap());
        // cos(κ(1−u)) = 1 − (1−u)²κ²/2 + …
        let t = [Term { kappa_pow: 0, trig: Trig::Cos(TrigArg::OneMinusU), poly: UPoly::constant(BigRational::one()) }];
        let s = taylor_from_terms('x', &t, 2).unwrap();
        assert_eq!(s[2], "-1/2 + u - u^2/2".parse().unwrap());
    }

    #[test]
    fn a3_first_factor() {
        assert_eq!(a3_factor(2), 13.0 / 64.0);
        let e = a3(2);
        assert_eq!(e.primes_used, 1);
        assert!((e.value - 0.203125).abs() < 1e-15);
        assert!(e.tail_bound > 0.0);
    }

    #[test]
    fn a3_factors_are_below_one() {
        for p in primes_up_to(1000) {
            let f = a3_factor(p);
            assert!(f > 0.0 && f < 1.0, "p={p}: {f}");
        }
    }

    #[test]
    fn label_parsing() {
        assert_eq!("c".parse::<CoefficientLabel>().unwrap(), CoefficientLabel::C);
        assert!("K".parse::<CoefficientLabel>().is_err());
        assert!("AB".parse::<CoefficientLabel>().is_err());
    }
}
