//! First-principles evaluation of the leading coefficients.
//!
//! The main term of an amplified, shifted fourth moment is
//! `T^{−(α+β+γ+δ)/2} Σ_{m ≤ T^u} m⁻¹ 𝒬_{A,B}(T, T^u/m, F₁, F₂)` with
//! `A = {α, β}`, `B = {γ, δ}`. Here every quantity is an element of the jet
//! algebra: `L = log T` is a formal variable, the shifts are
//! `(i/L)·{κ + λ, −λ, −λ, −κ + λ}`, and derivatives in a shift come from
//! adding a nilpotent `ε` to it. The sum over `m` is replaced by the closed
//! forms `S₀, S₁, S₂`. The coefficient of `λ⁰ L^k ε…` of the result is the
//! leading constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::closed_forms::CoefficientLabel;
use crate::error::OracleError;
use crate::ring::{Complex, EpsMask, JetElement, Monomial, Window};
use crate::scalar::{ComplexDd, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Amplifier {
    /// `f`, from `M(s) = Σ_{h ≤ T^u} h^{−s}`.
    F,
    /// `g`, from the log-weighted `N(s)`.
    G,
}

/// Which amplifier expansion is bound to the `X` (first) and `Y` (second)
/// side of each swap term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmplifierPair {
    FF,
    GF,
    /// Only arises as the conjugate of `GF`.
    FG,
    GG,
}

impl AmplifierPair {
    pub fn sides(self) -> (Amplifier, Amplifier) {
        match self {
            AmplifierPair::FF => (Amplifier::F, Amplifier::F),
            AmplifierPair::GF => (Amplifier::G, Amplifier::F),
            AmplifierPair::FG => (Amplifier::F, Amplifier::G),
            AmplifierPair::GG => (Amplifier::G, Amplifier::G),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShiftSlot {
    Alpha = 0,
    Beta = 1,
    Gamma = 2,
    Delta = 3,
}

/// Descriptor of one of the ten integrals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub label: CoefficientLabel,
    pub pair: AmplifierPair,
    /// Shifts differentiated once each; the first gets `ε₁`, the second `ε₂`.
    pub derivative_slots: Vec<ShiftSlot>,
    pub target_log_power: i32,
}

impl MomentSpec {
    pub fn for_label(label: CoefficientLabel) -> MomentSpec {
        use AmplifierPair::*;
        use CoefficientLabel as L;
        use ShiftSlot::*;
        let (pair, slots, power): (AmplifierPair, &[ShiftSlot], i32) = match label {
            L::A => (FF, &[], 9),
            L::B => (GF, &[], 10),
            L::C => (GG, &[], 11),
            L::D => (FF, &[Beta], 10),
            L::E => (FF, &[Alpha], 10),
            L::F => (FF, &[Beta, Gamma], 11),
            L::G => (FF, &[Alpha, Delta], 11),
            L::H => (FF, &[Beta, Delta], 11),
            L::I => (GF, &[Beta], 11),
            L::J => (GF, &[Alpha], 11),
        };
        MomentSpec { label, pair, derivative_slots: slots.to_vec(), target_log_power: power }
    }

    pub fn table() -> Vec<MomentSpec> {
        CoefficientLabel::ALL.iter().map(|&l| Self::for_label(l)).collect()
    }

    /// The integral with complex-conjugated integrand: `α ↔ δ`, `β ↔ γ`
    /// (with `λ → −λ`, invisible at `λ⁰`) and the two amplifiers swapped.
    /// Its oracle value is the complex conjugate of this one's.
    pub fn conjugate(&self) -> MomentSpec {
        use ShiftSlot::*;
        let flip = |s: &ShiftSlot| match s {
            Alpha => Delta,
            Beta => Gamma,
            Gamma => Beta,
            Delta => Alpha,
        };
        let pair = match self.pair {
            AmplifierPair::GF => AmplifierPair::FG,
            AmplifierPair::FG => AmplifierPair::GF,
            p => p,
        };
        MomentSpec {
            label: self.label,
            pair,
            derivative_slots: self.derivative_slots.iter().map(flip).collect(),
            target_log_power: self.target_log_power,
        }
    }

    pub fn eps_mask(&self) -> EpsMask {
        match self.derivative_slots.len() {
            0 => EpsMask::ONE,
            1 => EpsMask::E1,
            _ => EpsMask::E12,
        }
    }
}

/// An integer combination of the four shifts together with its value.
///
/// The combination is what decides whether an exponent vanishes: that test
/// never looks at floating-point coefficients.
#[derive(Clone, Debug)]
pub struct FormalShift<S: Scalar = Complex> {
    combo: [i32; 4],
    value: JetElement<S>,
}

impl<S: Scalar> FormalShift<S> {
    pub fn new(combo: [i32; 4], value: JetElement<S>) -> Self {
        FormalShift { combo, value }
    }

    pub fn zero(window: Window) -> Self {
        FormalShift { combo: [0; 4], value: JetElement::zero(window) }
    }

    pub fn combo(&self) -> [i32; 4] {
        self.combo
    }

    pub fn value(&self) -> &JetElement<S> {
        &self.value
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.combo == [0; 4]
    }

    pub fn add(&self, other: &FormalShift<S>) -> FormalShift<S> {
        let mut combo = self.combo;
        for (c, o) in combo.iter_mut().zip(other.combo) {
            *c += o;
        }
        if combo == [0; 4] {
            return FormalShift::zero(self.value.window().intersect(other.value.window()));
        }
        FormalShift { combo, value: &self.value + &other.value }
    }

    pub fn neg(&self) -> FormalShift<S> {
        FormalShift { combo: self.combo.map(|c| -c), value: -&self.value }
    }
}

/// The four shifts `α, β, γ, δ`.
#[derive(Clone, Debug)]
pub struct ShiftSet<S: Scalar = Complex> {
    shifts: [FormalShift<S>; 4],
}

impl<S: Scalar> ShiftSet<S> {
    /// `(i/L)·{κ + λ, −λ, −λ, −κ + λ}`, with `eps` added to the listed slots.
    pub fn specialized(kappa: f64, window: Window, eps: &[(ShiftSlot, EpsMask)]) -> Result<ShiftSet<S>, OracleError> {
        if kappa == 0.0 {
            return Err(OracleError::ZeroKappa);
        }
        let i = Complex::new(0.0, 1.0);
        let m = |lambda, log, eps, c: Complex| {
            JetElement::monomial(window, Monomial::new(lambda, log, eps), S::from_complex(c))
        };
        // (constant in units of i/L, λ coefficient in units of i/L)
        let parts = [(kappa, 1.0), (0.0, -1.0), (0.0, -1.0), (-kappa, 1.0)];
        let mut shifts = Vec::with_capacity(4);
        for (slot, (c0, c1)) in parts.into_iter().enumerate() {
            let mut v = &m(0, -1, EpsMask::ONE, i * c0)? + &m(1, -1, EpsMask::ONE, i * c1)?;
            for (s, mask) in eps {
                if *s as usize == slot {
                    v = &v + &m(0, 0, *mask, Complex::new(1.0, 0.0))?;
                }
            }
            let mut combo = [0; 4];
            combo[slot] = 1;
            shifts.push(FormalShift::new(combo, v));
        }
        Ok(ShiftSet { shifts: shifts.try_into().expect("four shifts") })
    }

    /// Arbitrary values for the four shifts.
    pub fn from_values(values: [JetElement<S>; 4]) -> ShiftSet<S> {
        let mut i = 0;
        ShiftSet {
            shifts: values.map(|v| {
                let mut combo = [0; 4];
                combo[i] = 1;
                i += 1;
                FormalShift::new(combo, v)
            }),
        }
    }

    pub fn get(&self, slot: ShiftSlot) -> &FormalShift<S> {
        &self.shifts[slot as usize]
    }

    pub fn all(&self) -> &[FormalShift<S>; 4] {
        &self.shifts
    }

    pub fn window(&self) -> Window {
        self.shifts[0].value.window()
    }
}

/// `coefficient · T₂^{exponent} · log^{log_power} T₂`.
#[derive(Clone, Debug)]
pub struct AmplifierTerm<S: Scalar = Complex> {
    pub coefficient: JetElement<S>,
    pub exponent: FormalShift<S>,
    pub log_power: u32,
}

impl<S: Scalar> AmplifierTerm<S> {
    fn times(&self, other: &AmplifierTerm<S>) -> Result<AmplifierTerm<S>, OracleError> {
        Ok(AmplifierTerm {
            coefficient: self.coefficient.checked_mul(&other.coefficient)?,
            exponent: self.exponent.add(&other.exponent),
            log_power: self.log_power + other.log_power,
        })
    }
}

/// Expands `f(x₁, x₂, T₂)` (3 terms) or `g(x₁, x₂, T₂)` (5 terms) into terms
/// `c · T₂^e · log^j T₂`.
pub fn expand_amplifier<S: Scalar>(
    kind: Amplifier,
    x1: &FormalShift<S>,
    x2: &FormalShift<S>,
) -> Result<Vec<AmplifierTerm<S>>, OracleError> {
    let w = x1.value.window();
    let a = x1.value();
    let b = x2.value();
    let inv_a = a.inv()?;
    let inv_b = b.inv()?;
    let inv_ab = inv_a.checked_mul(&inv_b)?;
    let inv_b_minus_a = (b - a).inv().map_err(|_| OracleError::DegenerateShift)?;
    let inv_a_minus_b = -&inv_b_minus_a;
    let zero = FormalShift::zero(w);
    let term = |coefficient: JetElement<S>, exponent: &FormalShift<S>, log_power| AmplifierTerm {
        coefficient,
        exponent: exponent.clone(),
        log_power,
    };
    Ok(match kind {
        Amplifier::F => vec![
            term(inv_ab.clone(), &zero, 0),
            term(-&inv_a.checked_mul(&inv_b_minus_a)?, &x1.neg(), 0),
            term(-&inv_b.checked_mul(&inv_a_minus_b)?, &x2.neg(), 0),
        ],
        Amplifier::G => {
            let inv_a2 = inv_a.checked_mul(&inv_a)?;
            let inv_b2 = inv_b.checked_mul(&inv_b)?;
            vec![
                term(inv_ab.clone(), &zero, 1),
                term(-&inv_a2.checked_mul(&inv_b)?, &zero, 0),
                term(-&inv_b2.checked_mul(&inv_a)?, &zero, 0),
                term(inv_a2.checked_mul(&inv_b_minus_a)?, &x1.neg(), 0),
                term(inv_b2.checked_mul(&inv_a_minus_b)?, &x2.neg(), 0),
            ]
        }
    })
}

/// `u·L` as an element.
fn u_log<S: Scalar>(window: Window, u: f64) -> Result<JetElement<S>, OracleError> {
    Ok(JetElement::monomial(window, Monomial::new(0, 1, EpsMask::ONE), S::from_f64(u))?)
}

/// Closed form of `Σ_{m ≤ T^u} (T^u/m)^e log^j(T^u/m) / m` for `j ∈ {0, 1, 2}`.
pub fn m_sum<S: Scalar>(exponent: &FormalShift<S>, log_power: u32, u: f64) -> Result<JetElement<S>, OracleError> {
    let w = exponent.value().window();
    let ul = u_log(w, u)?;
    if exponent.is_structurally_zero() {
        // constant Taylor coefficient at e = 0
        let ul2 = ul.checked_mul(&ul)?;
        return Ok(match log_power {
            0 => ul,
            1 => ul2.scale(S::from_f64(0.5)),
            2 => ul2.checked_mul(&ul)?.scale(S::from_f64(3.0).recip()),
            j => return Err(OracleError::InvalidTerm(j)),
        });
    }
    let e = exponent.value();
    let big = e.checked_mul(&ul)?.exp()?; // T^{eu}
    let inv = e.inv()?;
    let one = JetElement::one(w);
    Ok(match log_power {
        0 => (&big - &one).checked_mul(&inv)?,
        1 => {
            let inv2 = inv.checked_mul(&inv)?;
            let a = (&one - &big).checked_mul(&inv2)?;
            let b = big.checked_mul(&ul)?.checked_mul(&inv)?;
            &a + &b
        }
        2 => {
            let inv2 = inv.checked_mul(&inv)?;
            let inv3 = inv2.checked_mul(&inv)?;
            let two = S::from_f64(2.0);
            let a = (&big - &one).checked_mul(&inv3)?.scale(two);
            let big_ul = big.checked_mul(&ul)?;
            let b = big_ul.checked_mul(&inv2)?.scale(-two);
            let c = big_ul.checked_mul(&ul)?.checked_mul(&inv)?;
            &(&a + &b) + &c
        }
        j => return Err(OracleError::InvalidTerm(j)),
    })
}

/// Replaces the m-sum of one amplifier term by its closed form.
pub fn m_replace<S: Scalar>(term: &AmplifierTerm<S>, u: f64) -> Result<JetElement<S>, OracleError> {
    if term.log_power > 2 {
        return Err(OracleError::InvalidTerm(term.log_power));
    }
    Ok(term.coefficient.checked_mul(&m_sum(&term.exponent, term.log_power, u)?)?)
}

/// `Σ_m m⁻¹ F₁(x₁, x₂, T^u/m) F₂(x₃, x₄, T^u/m)` after replacement. Terms
/// with the same exponent and log power share one m-sum.
pub fn replaced_product<S: Scalar>(
    pair: AmplifierPair,
    x: [&FormalShift<S>; 2],
    y: [&FormalShift<S>; 2],
    u: f64,
) -> Result<JetElement<S>, OracleError> {
    let (k1, k2) = pair.sides();
    let left = expand_amplifier(k1, x[0], x[1])?;
    let right = expand_amplifier(k2, y[0], y[1])?;
    let mut groups: BTreeMap<([i32; 4], u32), AmplifierTerm<S>> = BTreeMap::new();
    for l in &left {
        for r in &right {
            let t = l.times(r)?;
            let key = (t.exponent.combo(), t.log_power);
            match groups.get_mut(&key) {
                Some(g) => g.coefficient = &g.coefficient + &t.coefficient,
                None => {
                    groups.insert(key, t);
                }
            }
        }
    }
    let w = x[0].value().window();
    let mut total = JetElement::zero(w);
    for t in groups.values() {
        total = &total + &m_replace(t, u)?;
    }
    Ok(total)
}

/// One of the six subset swaps: `X = (A∖R) ∪ (−S)`, `Y = (B∖S) ∪ (−R)`.
#[derive(Clone, Debug)]
pub struct SwapTerm<S: Scalar = Complex> {
    pub swapped_a: Vec<ShiftSlot>,
    pub swapped_b: Vec<ShiftSlot>,
    pub x: [FormalShift<S>; 2],
    pub y: [FormalShift<S>; 2],
}

/// Enumerates `R ⊆ A`, `S ⊆ B` with `|R| = |S|`.
pub fn swap_terms<S: Scalar>(shifts: &ShiftSet<S>) -> Vec<SwapTerm<S>> {
    use ShiftSlot::*;
    let a = [Alpha, Beta];
    let b = [Gamma, Delta];
    let subsets = |set: [ShiftSlot; 2]| -> Vec<Vec<ShiftSlot>> {
        vec![vec![], vec![set[0]], vec![set[1]], vec![set[0], set[1]]]
    };
    let mut out = Vec::with_capacity(6);
    for r in subsets(a) {
        for s in subsets(b) {
            if r.len() != s.len() {
                continue;
            }
            let side = |own: [ShiftSlot; 2], removed: &[ShiftSlot], flipped: &[ShiftSlot]| -> [FormalShift<S>; 2] {
                let mut v: Vec<FormalShift<S>> =
                    own.iter().filter(|q| !removed.contains(q)).map(|q| shifts.get(*q).clone()).collect();
                v.extend(flipped.iter().map(|q| shifts.get(*q).neg()));
                v.try_into().expect("two shifts per side")
            };
            let x = side(a, &r, &s);
            let y = side(b, &s, &r);
            out.push(SwapTerm { swapped_a: r.clone(), swapped_b: s.clone(), x, y });
        }
    }
    out
}

fn half_log_exp<S: Scalar>(sum: &JetElement<S>, sign: f64) -> Result<JetElement<S>, OracleError> {
    let w = sum.window();
    let half_l = JetElement::monomial(w, Monomial::new(0, 1, EpsMask::ONE), S::from_f64(0.5 * sign))?;
    Ok(sum.checked_mul(&half_l)?.exp()?)
}

/// One swap term `𝒬(X, Y, T, T^u/m, F₁, F₂)` summed over `m`.
pub fn swap_term_value<S: Scalar>(term: &SwapTerm<S>, pair: AmplifierPair, u: f64) -> Result<JetElement<S>, OracleError> {
    let delta = term.x.iter().chain(&term.y).fold(JetElement::zero(term.x[0].value().window()), |acc, s| {
        &acc + s.value()
    });
    let mut value = replaced_product(pair, [&term.x[0], &term.x[1]], [&term.y[0], &term.y[1]], u)?;
    value = value.checked_mul(&half_log_exp(&delta, 1.0)?)?;
    for x in &term.x {
        for y in &term.y {
            let s = x.add(y);
            if s.is_structurally_zero() {
                return Err(OracleError::DegenerateShift);
            }
            value = value.checked_mul(&s.value().inv()?)?;
        }
    }
    Ok(value)
}

/// `T^{−(α+β+γ+δ)/2} Σ_m m⁻¹ 𝒬_{A,B}(T, T^u/m, F₁, F₂)`.
pub fn swap_sum<S: Scalar>(shifts: &ShiftSet<S>, pair: AmplifierPair, u: f64) -> Result<JetElement<S>, OracleError> {
    let w = shifts.window();
    let mut total = JetElement::zero(w);
    for term in swap_terms(shifts) {
        total = &total + &swap_term_value(&term, pair, u)?;
    }
    let all = shifts.all().iter().fold(JetElement::zero(w), |acc, s| &acc + s.value());
    Ok(total.checked_mul(&half_log_exp(&all, -1.0)?)?)
}

fn check_inputs(kappa: f64, u: f64) -> Result<(), OracleError> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(OracleError::ZeroKappa);
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(OracleError::InvalidU(u));
    }
    Ok(())
}

/// The assembled main term for `spec` as an element of the algebra.
pub fn moment_jet<S: Scalar>(spec: &MomentSpec, kappa: f64, u: f64, window: Window) -> Result<JetElement<S>, OracleError> {
    check_inputs(kappa, u)?;
    let masks = [EpsMask::E1, EpsMask::E2];
    let eps: Vec<(ShiftSlot, EpsMask)> = spec.derivative_slots.iter().copied().zip(masks).collect();
    let shifts = ShiftSet::specialized(kappa, window, &eps)?;
    swap_sum(&shifts, spec.pair, u)
}

/// Scalar type used for the oracle's coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    #[default]
    F64,
    DoubleDouble,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F64 => Complex::PRECISION,
            Precision::DoubleDouble => ComplexDd::PRECISION,
        }
    }
}

fn extract_target<S: Scalar>(spec: &MomentSpec, kappa: f64, u: f64, window: Window) -> Result<Complex, OracleError> {
    let jet = moment_jet::<S>(spec, kappa, u, window)?;
    Ok(jet.extract(0, spec.target_log_power, spec.eps_mask())?.to_complex())
}

/// Oracle value of the integral in `window`. Its real part is the
/// coefficient; the imaginary part is that of the one-sided derivative or
/// the asymmetric `(g, f)` pairing, and is cancelled by [`MomentSpec::conjugate`].
pub fn evaluate_moment_in(
    spec: &MomentSpec,
    kappa: f64,
    u: f64,
    window: Window,
    precision: Precision,
) -> Result<Complex, OracleError> {
    match precision {
        Precision::F64 => extract_target::<Complex>(spec, kappa, u, window),
        Precision::DoubleDouble => extract_target::<ComplexDd>(spec, kappa, u, window),
    }
}

/// Oracle value in the default window at `f64` precision.
pub fn evaluate_moment(spec: &MomentSpec, kappa: f64, u: f64) -> Result<Complex, OracleError> {
    evaluate_moment_in(spec, kappa, u, Window::default(), Precision::F64)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Jet = JetElement<Complex>;

    fn w() -> Window {
        Window::default()
    }

    #[test]
    fn spec_table_is_fixed() {
        use ShiftSlot::*;
        let t = MomentSpec::table();
        let row = |l: CoefficientLabel| t.iter().find(|s| s.label == l).unwrap().clone();
        assert_eq!(row(CoefficientLabel::A).target_log_power, 9);
        assert_eq!(row(CoefficientLabel::C).pair, AmplifierPair::GG);
        assert_eq!(row(CoefficientLabel::F).derivative_slots, vec![Beta, Gamma]);
        assert_eq!(row(CoefficientLabel::G).derivative_slots, vec![Alpha, Delta]);
        assert_eq!(row(CoefficientLabel::H).derivative_slots, vec![Beta, Delta]);
        assert_eq!(row(CoefficientLabel::J).pair, AmplifierPair::GF);
        for s in &t {
            assert!(s.derivative_slots.len() <= 2);
            assert!((9..=11).contains(&s.target_log_power));
        }
    }

    #[test]
    fn specialized_shifts_at_lambda_zero() {
        let s = ShiftSet::<Complex>::specialized(3.0, w(), &[]).unwrap();
        let at0 = |slot| s.get(slot).value().coeff(Monomial::new(0, -1, EpsMask::ONE));
        assert_eq!(at0(ShiftSlot::Alpha), Complex::new(0.0, 3.0));
        assert_eq!(at0(ShiftSlot::Beta), Complex::new(0.0, 0.0));
        assert_eq!(at0(ShiftSlot::Gamma), Complex::new(0.0, 0.0));
        assert_eq!(at0(ShiftSlot::Delta), Complex::new(0.0, -3.0));
        assert!(ShiftSet::<Complex>::specialized(0.0, w(), &[]).is_err());
    }

    #[test]
    fn six_swap_terms_with_identity_first() {
        let s = ShiftSet::<Complex>::specialized(2.0, w(), &[]).unwrap();
        let terms = swap_terms(&s);
        assert_eq!(terms.len(), 6);
        let id = &terms[0];
        assert!(id.swapped_a.is_empty() && id.swapped_b.is_empty());
        assert_eq!(id.x[0].combo(), [1, 0, 0, 0]);
        assert_eq!(id.x[1].combo(), [0, 1, 0, 0]);
        assert_eq!(id.y[0].combo(), [0, 0, 1, 0]);
        assert_eq!(id.y[1].combo(), [0, 0, 0, 1]);
        // R = {α}, S = {γ}: X = {β, −γ}, Y = {δ, −α}
        let t = terms.iter().find(|t| t.swapped_a == [ShiftSlot::Alpha] && t.swapped_b == [ShiftSlot::Gamma]).unwrap();
        assert_eq!(t.x[0].combo(), [0, 1, 0, 0]);
        assert_eq!(t.x[1].combo(), [0, 0, -1, 0]);
        assert_eq!(t.y[0].combo(), [0, 0, 0, 1]);
        assert_eq!(t.y[1].combo(), [-1, 0, 0, 0]);
    }

    #[test]
    fn amplifier_term_counts() {
        let s = ShiftSet::<Complex>::specialized(1.0, w(), &[]).unwrap();
        let (a, d) = (s.get(ShiftSlot::Alpha), s.get(ShiftSlot::Delta));
        let f = expand_amplifier(Amplifier::F, a, d).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.iter().all(|t| t.log_power == 0));
        assert!(f[0].exponent.is_structurally_zero());
        assert_eq!(f[1].exponent.combo(), [-1, 0, 0, 0]);
        let g = expand_amplifier(Amplifier::G, a, d).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.iter().filter(|t| t.log_power == 1).count(), 1);
        assert_eq!(g.iter().filter(|t| t.exponent.is_structurally_zero()).count(), 3);
        // log-power-1 coefficient is 1/(x1 x2)
        let want = a.value().checked_mul(d.value()).unwrap().inv().unwrap();
        assert!(g[0].coefficient.approx_eq(&want, 1e-14));
    }

    #[test]
    fn f_expansion_matches_direct_substitution() {
        // x1 = iκ/L + iλ/L, x2 = iλ/L at κ = 1; evaluate the jet at a concrete
        // small λ and compare with the formula at T₂ = e^{uL}.
        let kappa = 1.0;
        let (u, big_l, lam): (f64, f64, f64) = (0.3, 7.0, 1e-3);
        let i = Complex::new(0.0, 1.0);
        let x1v = &Jet::monomial(w(), Monomial::new(0, -1, EpsMask::ONE), i * kappa).unwrap()
            + &Jet::monomial(w(), Monomial::new(1, -1, EpsMask::ONE), i).unwrap();
        let x2v = Jet::monomial(w(), Monomial::new(1, -1, EpsMask::ONE), i).unwrap();
        let x1 = FormalShift::new([1, 0, 0, 0], x1v);
        let x2 = FormalShift::new([0, 1, 0, 0], x2v);
        let terms = expand_amplifier(Amplifier::F, &x1, &x2).unwrap();
        let mut via_jet = Complex::new(0.0, 0.0);
        for t in &terms {
            // T₂^e = exp(e·uL)
            let factor = t.exponent.value().checked_mul(&u_log(w(), u).unwrap()).unwrap().exp().unwrap();
            let full = t.coefficient.checked_mul(&factor).unwrap();
            for (m, c) in full.terms() {
                if m.eps.is_one() {
                    via_jet += c * big_l.powi(m.log) * lam.powi(m.lambda);
                }
            }
        }
        let a = i * (kappa + lam) / big_l;
        let b = i * lam / big_l;
        let log_t2 = u * big_l;
        let direct = 1.0 / (a * b) - (-a * log_t2).exp() / (a * (b - a)) - (-b * log_t2).exp() / (b * (a - b));
        assert!((via_jet - direct).norm() < 1e-9 * direct.norm(), "{via_jet} vs {direct}");
    }

    #[test]
    fn zero_exponent_m_sums() {
        let z = FormalShift::<Complex>::zero(w());
        let u = 0.2;
        let s0 = m_sum(&z, 0, u).unwrap();
        assert_eq!(s0.extract(0, 1, EpsMask::ONE).unwrap(), Complex::new(u, 0.0));
        let s1 = m_sum(&z, 1, u).unwrap();
        assert!((s1.extract(0, 2, EpsMask::ONE).unwrap().re - u * u / 2.0).abs() < 1e-15);
        let s2 = m_sum(&z, 2, u).unwrap();
        assert!((s2.extract(0, 3, EpsMask::ONE).unwrap().re - u * u * u / 3.0).abs() < 1e-15);
        assert!(matches!(m_sum(&z, 3, u), Err(OracleError::InvalidTerm(3))));
    }

    #[test]
    fn pure_lambda_exponent_limits_match_zero_branch() {
        // e = iλ/L: the λ⁰ coefficient of S_j(e) is the e ≡ 0 value.
        let u = 0.35;
        let e = FormalShift::new(
            [0, -1, 0, 0],
            Jet::monomial(w(), Monomial::new(1, -1, EpsMask::ONE), Complex::new(0.0, 1.0)).unwrap(),
        );
        let z = FormalShift::<Complex>::zero(w());
        for j in 0..3 {
            let s = m_sum(&e, j, u).unwrap();
            assert!(s.lambda_order().unwrap() >= 0, "pole survived for j={j}");
            let want = m_sum(&z, j, u).unwrap().extract(0, j as i32 + 1, EpsMask::ONE).unwrap();
            let got = s.extract(0, j as i32 + 1, EpsMask::ONE).unwrap();
            assert!((got - want).norm() < 1e-14, "j={j}: {got} vs {want}");
        }
    }

    #[test]
    fn m_replace_rejects_high_log_power() {
        let t = AmplifierTerm { coefficient: Jet::one(w()), exponent: FormalShift::<Complex>::zero(w()), log_power: 3 };
        assert!(matches!(m_replace(&t, 0.1), Err(OracleError::InvalidTerm(3))));
    }

    #[test]
    fn oracle_rejects_zero_kappa_and_bad_u() {
        let spec = MomentSpec::for_label(CoefficientLabel::A);
        assert!(matches!(evaluate_moment(&spec, 0.0, 0.05), Err(OracleError::ZeroKappa)));
        assert!(matches!(evaluate_moment(&spec, 1.0, 0.0), Err(OracleError::InvalidU(_))));
        assert!(matches!(evaluate_moment(&spec, 1.0, 1.0), Err(OracleError::InvalidU(_))));
    }

    #[test]
    fn conjugate_spec_is_an_involution() {
        for spec in MomentSpec::table() {
            assert_eq!(spec.conjugate().conjugate(), spec);
        }
        let f = MomentSpec::for_label(CoefficientLabel::F);
        assert_eq!(f.conjugate().derivative_slots, vec![ShiftSlot::Gamma, ShiftSlot::Beta]);
        assert_eq!(MomentSpec::for_label(CoefficientLabel::J).conjugate().pair, AmplifierPair::FG);
    }

    #[test]
    fn conjugate_integral_is_complex_conjugate() {
        for label in [CoefficientLabel::B, CoefficientLabel::H, CoefficientLabel::J] {
            let spec = MomentSpec::for_label(label);
            let a = evaluate_moment_in(&spec, 3.0, 0.06, w(), Precision::DoubleDouble).unwrap();
            let b = evaluate_moment_in(&spec.conjugate(), 3.0, 0.06, w(), Precision::DoubleDouble).unwrap();
            assert!(a.im.abs() > 1e-6 * a.norm(), "{label}: expected a genuinely complex value");
            assert!((a - b.conj()).norm() < 1e-14 * a.norm(), "{label}: {a} vs {b}");
        }
    }

    #[test]
    fn main_term_has_no_lambda_poles() {
        let jet: JetElement<ComplexDd> =
            moment_jet(&MomentSpec::for_label(CoefficientLabel::A), 2.0, 0.05, w()).unwrap();
        let scale = jet.extract(0, 9, EpsMask::ONE).unwrap().norm();
        for (m, c) in jet.terms() {
            if m.lambda < 0 {
                assert!(c.norm() < 1e-20 * scale * 10f64.powi(m.log.max(0)), "{m}: {c}");
            }
        }
    }

    #[test]
    fn derivative_slot_matches_finite_difference() {
        // [L^10 ε₁] with ε₁ on β equals d/dh [L^9] with β → β + h/L.
        let (kappa, u, h) = (2.5, 0.07, 1e-4);
        let spec = MomentSpec::for_label(CoefficientLabel::D);
        let exact = evaluate_moment_in(&spec, kappa, u, w(), Precision::DoubleDouble).unwrap();
        let at = |shift: f64| {
            let base = ShiftSet::<ComplexDd>::specialized(kappa, w(), &[]).unwrap();
            let mut values = base.all().clone().map(|s| s.value().clone());
            let bump = JetElement::monomial(w(), Monomial::new(0, -1, EpsMask::ONE), ComplexDd::from_f64(shift));
            values[1] = &values[1] + &bump.unwrap();
            let jet = swap_sum(&ShiftSet::from_values(values), AmplifierPair::FF, u).unwrap();
            jet.extract(0, 9, EpsMask::ONE).unwrap().to_complex()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert!((fd - exact).norm() < 1e-7 * exact.norm(), "{fd} vs {exact}");
    }

    #[test]
    fn d_and_e_are_minus_half_a() {
        let a = evaluate_moment_in(&MomentSpec::for_label(CoefficientLabel::A), 1.0, 0.05, w(), Precision::DoubleDouble)
            .unwrap()
            .re;
        for label in [CoefficientLabel::D, CoefficientLabel::E] {
            let d = evaluate_moment_in(&MomentSpec::for_label(label), 1.0, 0.05, w(), Precision::DoubleDouble).unwrap();
            assert!((d.re / a + 0.5).abs() < 1e-12, "{label}: {}", d.re / a);
        }
    }
}
