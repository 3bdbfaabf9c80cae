//! Coefficient scalars for the series algebra: `Complex64`, and a
//! double-double complex type with about 32 significant digits.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

/// Field operations the series algebra needs from its coefficients.
pub trait Scalar:
    Copy
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    /// Name reported in output records.
    const PRECISION: &'static str;

    fn from_complex(c: Complex64) -> Self;
    /// Nearest `Complex64`.
    fn to_complex(self) -> Complex64;
    fn recip(self) -> Self;
    fn exp(self) -> Self;
    fn norm(self) -> f64;

    fn from_f64(x: f64) -> Self {
        Self::from_complex(Complex64::new(x, 0.0))
    }

    fn is_zero(self) -> bool {
        self == Self::ZERO
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    const PRECISION: &'static str = "f64";

    fn from_complex(c: Complex64) -> Self {
        c
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn recip(self) -> Self {
        self.inv()
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    /// `self · 2^k`, exact.
    pub fn ldexp(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}{:+e}", self.hi, self.lo)
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ComplexDd {
    pub re: Dd,
    pub im: Dd,
}

impl ComplexDd {
    pub const fn new(re: Dd, im: Dd) -> Self {
        ComplexDd { re, im }
    }

    fn norm_sqr_dd(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    fn ldexp(self, k: i32) -> Self {
        ComplexDd { re: self.re.ldexp(k), im: self.im.ldexp(k) }
    }
}

impl Add for ComplexDd {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        ComplexDd { re: self.re + b.re, im: self.im + b.im }
    }
}

impl AddAssign for ComplexDd {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl Sub for ComplexDd {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        ComplexDd { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Neg for ComplexDd {
    type Output = Self;
    fn neg(self) -> Self {
        ComplexDd { re: -self.re, im: -self.im }
    }
}

impl Mul for ComplexDd {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        ComplexDd { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}

impl fmt::Display for ComplexDd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_complex())
    }
}

impl Scalar for ComplexDd {
    const ZERO: Self = ComplexDd { re: Dd::ZERO, im: Dd::ZERO };
    const ONE: Self = ComplexDd { re: Dd::ONE, im: Dd::ZERO };
    const PRECISION: &'static str = "double-double";

    fn from_complex(c: Complex64) -> Self {
        ComplexDd { re: Dd::new(c.re), im: Dd::new(c.im) }
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    fn recip(self) -> Self {
        let d = self.norm_sqr_dd();
        ComplexDd { re: self.re / d, im: -(self.im / d) }
    }

    /// Taylor series of `exp(z / 2^k)` followed by `k` squarings.
    fn exp(self) -> Self {
        let mag = self.norm();
        let k = if mag > 0.0 { (mag.log2().ceil() as i32 + 10).max(0) } else { 0 };
        let z = self.ldexp(-k);
        let mut sum = Self::ONE;
        let mut term = Self::ONE;
        for n in 1..=16 {
            term = (term * z).scaled_recip(n as f64);
            sum += term;
        }
        for _ in 0..k {
            sum = sum * sum;
        }
        sum
    }

    fn norm(self) -> f64 {
        self.to_complex().norm()
    }
}

impl ComplexDd {
    /// `self / x` for a real `x`.
    fn scaled_recip(self, x: f64) -> Self {
        let d = Dd::new(x);
        ComplexDd { re: self.re / d, im: self.im / d }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_is_double_double_accurate() {
        let third = Dd::ONE / Dd::new(3.0);
        let back = third * Dd::new(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31, "{back:?}");
        assert!(third.lo != 0.0);
    }

    #[test]
    fn complex_recip() {
        let z = ComplexDd::from_complex(Complex64::new(1.5, -2.25));
        let one = z * z.recip() - ComplexDd::ONE;
        assert!(one.re.to_f64().abs() < 1e-31 && one.im.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_matches_f64_and_is_a_homomorphism() {
        let a = Complex64::new(0.3, 4.1);
        let b = Complex64::new(-1.2, -7.7);
        let (da, db) = (ComplexDd::from_complex(a), ComplexDd::from_complex(b));
        assert!((da.exp().to_complex() - a.exp()).norm() < 1e-15 * a.exp().norm());
        let lhs = (da + db).exp();
        let rhs = da.exp() * db.exp();
        let diff = (lhs - rhs).to_complex().norm() / lhs.norm();
        assert!(diff < 1e-26, "{diff}");
    }

    #[test]
    fn exp_of_i_pi_is_minus_one() {
        let pi = Dd { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 };
        let e = ComplexDd::new(Dd::ZERO, pi).exp() + ComplexDd::ONE;
        assert!(e.re.to_f64().abs() < 1e-30 && e.im.to_f64().abs() < 1e-30, "{e:?}");
    }
}
