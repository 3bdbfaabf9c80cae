//! Shrinking property tests for the jet algebra.

use proptest::prelude::*;
use zerogap::scalar::{ComplexDd, Scalar};
use zerogap::{Complex, EpsMask, JetElement, Monomial, Window};

const W: Window = Window { lambda_min: -6, lambda_max: 6, log_min: -2, log_max: 16 };

fn coeff() -> impl Strategy<Value = Complex> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex::new(re, im))
}

fn eps() -> impl Strategy<Value = EpsMask> {
    (0u8..4).prop_map(|b| EpsMask::from_bits(b).unwrap())
}

/// Nonnegative λ and L powers, so products never underflow the window.
fn jet() -> impl Strategy<Value = JetElement> {
    prop::collection::vec(((0i32..3, 0i32..3, eps()).prop_map(|(l, g, e)| Monomial::new(l, g, e)), coeff()), 1..6)
        .prop_map(|terms| JetElement::from_terms(W, terms))
}

/// An ε-free leading `c·λ^k` with `|c| ≥ 1`, every other term strictly later.
fn invertible() -> impl Strategy<Value = JetElement> {
    let rest = prop::collection::vec((1i32..3, 0i32..3, eps(), coeff()), 0..5);
    (-1i32..2, coeff(), rest).prop_map(|(k, c, rest)| {
        let lead = (Monomial::new(k, 0, EpsMask::ONE), c + Complex::new(2.0, 0.0));
        let tail = rest.into_iter().map(|(d, g, e, c)| (Monomial::new(k + d, g, e), c));
        JetElement::from_terms(W, std::iter::once(lead).chain(tail))
    })
}

fn agree(a: &JetElement, b: &JetElement) -> bool {
    let cut = a.exact_below().min(b.exact_below());
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    a.terms()
        .iter()
        .chain(b.terms())
        .filter(|(m, _)| (m.lambda as i64) < cut)
        .all(|(m, _)| (a.coeff(*m) - b.coeff(*m)).norm() <= 1e-12 * scale)
}

proptest! {
    #[test]
    fn multiplication_commutes(a in jet(), b in jet()) {
        prop_assert!(agree(&a.checked_mul(&b).unwrap(), &b.checked_mul(&a).unwrap()));
    }

    #[test]
    fn multiplication_distributes(a in jet(), b in jet(), c in jet()) {
        let lhs = a.checked_mul(&(&b + &c)).unwrap();
        let rhs = &a.checked_mul(&b).unwrap() + &a.checked_mul(&c).unwrap();
        prop_assert!(agree(&lhs, &rhs));
    }

    #[test]
    fn inverse_is_two_sided(x in invertible()) {
        let inv = x.inv().unwrap();
        prop_assert!(agree(&x.checked_mul(&inv).unwrap(), &JetElement::one(W)));
        prop_assert!(agree(&inv.checked_mul(&x).unwrap(), &JetElement::one(W)));
    }

    #[test]
    fn monomial_inverse_is_a_monomial(k in -3i32..4, re in -1e3f64..1e3, im in -1e3f64..1e3) {
        prop_assume!(re.hypot(im) > 1e-3);
        let c = Complex::new(re, im);
        let x = JetElement::monomial(W, Monomial::new(k, 0, EpsMask::ONE), c).unwrap();
        let inv = x.inv().unwrap();
        prop_assert_eq!(inv.terms().len(), 1);
        prop_assert_eq!(inv.terms()[0].0.lambda, -k);
    }

    #[test]
    fn epsilon_squares_vanish(c in coeff(), l in 0i32..3, bit in 1u8..3) {
        let e = EpsMask::from_bits(bit).unwrap();
        let x = JetElement::monomial(W, Monomial::new(l, 0, e), c).unwrap();
        prop_assert!(x.checked_mul(&x).unwrap().is_zero());
    }

    #[test]
    fn double_double_inverse(re in 1.0f64..3.0, im in -1.0f64..1.0, t in -1.0f64..1.0) {
        let c = ComplexDd::from_complex(Complex::new(re, im));
        let x = JetElement::<ComplexDd>::from_terms(
            W,
            [(Monomial::unit(), c), (Monomial::new(1, 1, EpsMask::E1), ComplexDd::from_f64(t))],
        );
        let one = x.checked_mul(&x.inv().unwrap()).unwrap();
        prop_assert!(one.approx_eq(&JetElement::one(W), 1e-30));
    }
}
