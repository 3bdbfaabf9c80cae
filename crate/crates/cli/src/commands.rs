use num_rational::BigRational;
use rayon::prelude::*;
use serde_json::Value;
use zerogap::closed_forms::{self, kappa_taylor, pole_order, sixth_moment_constant};
use zerogap::gap_inequality::{check, check_exact, sup_kappa, GapParams};
use zerogap::moment_oracle::{evaluate_moment_in, Precision};
use zerogap::{
    optimize, ClosedFormError, CoefficientLabel, GapError, MomentSpec, OracleError, RingError, SearchConfig,
    Window,
};

use crate::report::{num, ReportRecord};

/// Exit status contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Fails = 1,
    Invalid = 2,
    Internal = 3,
}

/// A failure that still has to reach the user.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure { status: Status::Invalid, message: message.into() }
    }
}

impl From<GapError> for Failure {
    fn from(e: GapError) -> Self {
        let status = match &e {
            GapError::InvalidParams(_) | GapError::ClosedForm(ClosedFormError::InvalidU(_)) => Status::Invalid,
            GapError::Infeasible { .. } => Status::Fails,
            GapError::ClosedForm(_) => Status::Internal,
        };
        Failure { status, message: e.to_string() }
    }
}

impl From<ClosedFormError> for Failure {
    fn from(e: ClosedFormError) -> Self {
        GapError::from(e).into()
    }
}

/// Window problems are bad input and come with a window that would do.
fn oracle_failure(e: OracleError, window: i32) -> Failure {
    let hint = match &e {
        OracleError::Ring(RingError::LambdaUnderflow { power, .. }) => Some((2 * window).max(power.abs() + 1)),
        OracleError::Ring(RingError::Truncated { lambda, exact_below }) => {
            Some(window + (*lambda as i64 - exact_below + 1).max(1) as i32)
        }
        _ => None,
    };
    match (hint, e) {
        (Some(w), e) => Failure::invalid(format!("{e}; try --window {w}")),
        (None, e @ (OracleError::ZeroKappa | OracleError::InvalidU(_))) => Failure::invalid(e.to_string()),
        (None, e) => Failure { status: Status::Internal, message: e.to_string() },
    }
}

pub type Outcome = Result<(ReportRecord, Status), Failure>;

pub fn cmd_check(mut r: ReportRecord, u: f64, v: f64, kappa: f64, extended_u: bool, exact: bool) -> Outcome {
    r.input("u", num(u));
    r.input("v", num(v));
    r.input("kappa", num(kappa));
    r.input("extended_u", extended_u);
    let params = GapParams::new(u, v, kappa, extended_u)?;
    let verdict = check(&params)?;
    r.output("holds", verdict.holds);
    r.output("lhs_a", num(verdict.lhs));
    r.output("rhs_phi", num(verdict.rhs));
    r.output("margin", num(verdict.margin));
    r.output("relative_margin", num(verdict.margin / verdict.lhs.abs()));
    r.output("gap_multiplier", num(verdict.gap_multiplier));
    let mut status = if verdict.holds { Status::Ok } else { Status::Fails };
    if exact {
        r.precision = format!("{} + exact rational", r.precision);
        let e = check_exact(&params)?;
        let certified = e.margin.abs() > e.error_bound;
        r.output("exact_margin", num(e.margin));
        r.output("exact_error_bound", num(e.error_bound));
        r.output("exact_certified", certified);
        r.output("exact_holds", e.holds);
        if certified && e.holds != verdict.holds {
            status = Status::Internal;
        }
    }
    Ok((r, status))
}

pub struct OracleArgs {
    pub kappas: Vec<f64>,
    pub us: Vec<f64>,
    pub labels: Vec<CoefficientLabel>,
    pub tol: f64,
    pub imag_tol: f64,
    pub window: i32,
    pub precision: Precision,
}

struct OracleRow {
    label: CoefficientLabel,
    kappa: f64,
    u: f64,
    oracle: f64,
    closed: f64,
    scaled_err: f64,
    rel_err: f64,
    imag_rel: f64,
    ratio_to_a: f64,
}

fn oracle_point(a: &OracleArgs, kappa: f64, u: f64) -> Result<Vec<OracleRow>, Failure> {
    let window = Window { lambda_min: -a.window, lambda_max: a.window, ..Window::default() };
    let eval = |spec: &MomentSpec| {
        evaluate_moment_in(spec, kappa, u, window, a.precision).map_err(|e| oracle_failure(e, a.window))
    };
    let oracle_a = eval(&MomentSpec::for_label(CoefficientLabel::A))?.re;
    let mut rows = Vec::new();
    for &label in &a.labels {
        let spec = MomentSpec::for_label(label);
        let raw = eval(&spec)?;
        // imaginary part of the conjugate-symmetrized integral
        let sym = if spec.conjugate() == spec { raw } else { (raw + eval(&spec.conjugate())?) * 0.5 };
        let closed = closed_forms::eval(label, kappa, u)?;
        let diff = (raw.re - closed).abs();
        rows.push(OracleRow {
            label,
            kappa,
            u,
            oracle: raw.re,
            closed,
            scaled_err: diff / closed.abs().max(1.0),
            rel_err: diff / closed.abs(),
            imag_rel: sym.im.abs() / sym.re.abs(),
            ratio_to_a: raw.re / oracle_a,
        });
    }
    Ok(rows)
}

pub fn cmd_verify_oracle(mut r: ReportRecord, a: OracleArgs) -> Outcome {
    r.input("kappa_list", a.kappas.iter().map(|&k| num(k)).collect::<Vec<_>>());
    r.input("u_list", a.us.iter().map(|&u| num(u)).collect::<Vec<_>>());
    r.input("labels", a.labels.iter().map(|l| l.to_string()).collect::<Vec<_>>());
    r.input("tol", num(a.tol));
    r.input("imag_tol", num(a.imag_tol));
    r.input("window", a.window);
    if let Some(k) = a.kappas.iter().find(|k| !(k.is_finite() && **k != 0.0)) {
        return Err(Failure::invalid(format!("kappa = {k}: the oracle requires a finite κ ≠ 0")));
    }
    if let Some(u) = a.us.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
        return Err(Failure::invalid(format!("u = {u} must lie in (0, 1)")));
    }
    if a.window < 1 {
        return Err(Failure::invalid("--window must be at least 1"));
    }
    if a.labels.is_empty() {
        return Err(Failure::invalid("no labels selected"));
    }
    let points: Vec<(f64, f64)> = a.kappas.iter().flat_map(|&k| a.us.iter().map(move |&u| (k, u))).collect();
    let per_point: Vec<Vec<OracleRow>> =
        points.par_iter().map(|&(k, u)| oracle_point(&a, k, u)).collect::<Result<_, _>>()?;
    r.table(&["label", "kappa", "u", "oracle", "closed_form", "err", "rel_err", "imag_rel", "ratio_to_a", "pass"]);
    let (mut worst, mut worst_imag, mut failures) = (0.0f64, 0.0f64, 0usize);
    for row in per_point.into_iter().flatten() {
        let pass = row.scaled_err <= a.tol && row.imag_rel <= a.imag_tol;
        failures += usize::from(!pass);
        worst = worst.max(row.scaled_err);
        worst_imag = worst_imag.max(row.imag_rel);
        r.row(vec![
            row.label.to_string().into(),
            num(row.kappa),
            num(row.u),
            num(row.oracle),
            num(row.closed),
            num(row.scaled_err),
            num(row.rel_err),
            num(row.imag_rel),
            num(row.ratio_to_a),
            pass.into(),
        ]);
    }
    r.output("comparisons", r.rows.len());
    r.output("failures", failures);
    r.output("max_err", num(worst));
    r.output("max_imag_rel", num(worst_imag));
    Ok((r, if failures == 0 { Status::Ok } else { Status::Internal }))
}

struct Scenario {
    name: &'static str,
    u: f64,
    v: f64,
    /// `None`: κ is the feasibility boundary.
    kappa: Option<f64>,
    extended_u: bool,
    claimed: f64,
}

const SCENARIOS: [Scenario; 5] = [
    Scenario { name: "main", u: 0.0909, v: 2.13, kappa: Some(8.69), extended_u: false, claimed: 2.766 },
    Scenario { name: "hall", u: 1e-6, v: 2.0, kappa: Some(8.264), extended_u: false, claimed: 2.63 },
    Scenario { name: "ext-0.4999", u: 0.4999, v: 2.68, kappa: Some(10.23), extended_u: true, claimed: 3.25 },
    Scenario { name: "ext-0.55", u: 0.55, v: 2.74, kappa: None, extended_u: true, claimed: 3.26 },
    Scenario { name: "ext-0.9999", u: 0.9999, v: 3.0, kappa: None, extended_u: true, claimed: 3.05 },
];

pub fn cmd_table(mut r: ReportRecord, tol: f64) -> Outcome {
    r.input("tol", num(tol));
    r.table(&["scenario", "u", "v", "kappa", "kappa_source", "gap_multiplier", "claimed_multiplier", "holds"]);
    let mut all = true;
    for s in &SCENARIOS {
        let (kappa, source) = match s.kappa {
            Some(k) => (k, "given"),
            None => (sup_kappa(s.u, s.v, s.extended_u, tol)?, "sup_kappa"),
        };
        let verdict = check(&GapParams::new(s.u, s.v, kappa, s.extended_u)?)?;
        // claims are stated to the digits shown, so compare after rounding
        let digits = if s.name == "main" { 1e3 } else { 1e2 };
        let reaches = (verdict.gap_multiplier * digits).round() >= (s.claimed * digits).round();
        all &= verdict.holds && reaches;
        r.row(vec![
            s.name.into(),
            num(s.u),
            num(s.v),
            num(kappa),
            source.into(),
            num(verdict.gap_multiplier),
            num(s.claimed),
            verdict.holds.into(),
        ]);
    }
    r.output("all_hold", all);
    Ok((r, if all { Status::Ok } else { Status::Fails }))
}

pub fn cmd_kappa_series(
    mut r: ReportRecord,
    labels: Vec<CoefficientLabel>,
    order: usize,
    u: Option<BigRational>,
) -> Outcome {
    r.input("coeff", labels.iter().map(|l| l.to_string()).collect::<Vec<_>>());
    r.input("order", order);
    r.input("u_rational", u.as_ref().map_or(Value::Null, |u| u.to_string().into()));
    if let Some(u) = &u {
        if u <= &BigRational::from_integer(0.into()) || u > &BigRational::from_integer(1.into()) {
            return Err(Failure::invalid(format!("u = {u} must lie in (0, 1]")));
        }
    }
    r.table(&["coeff", "power", "coefficient"]);
    let mut cancelled = Vec::new();
    for &label in &labels {
        let series = kappa_taylor(label, order).map_err(|e| Failure { status: Status::Internal, message: e.to_string() })?;
        cancelled.push(Value::from(format!("{label}: κ^-{}..κ^-1 cancel", pole_order(label))));
        for (k, poly) in series.coefficients().iter().enumerate() {
            let text = match &u {
                Some(u) => poly.eval_rational(u).to_string(),
                None => poly.to_string(),
            };
            r.row(vec![label.to_string().into(), k.into(), text.into()]);
        }
        if label == CoefficientLabel::A && u.as_ref().is_some_and(|u| u == &BigRational::from_integer(1.into())) {
            let at_one = series.coefficients()[0].eval_rational(u.as_ref().expect("checked"));
            r.output("a_kappa0_at_u1_equals_42_over_9_factorial", at_one == sixth_moment_constant());
        }
    }
    r.output("negative_powers", "0 (exact)");
    r.output("cancelled", cancelled);
    Ok((r, Status::Ok))
}

pub fn cmd_optimize(mut r: ReportRecord, config: SearchConfig) -> Outcome {
    r.input("u_range", vec![num(config.u_range.0), num(config.u_range.1)]);
    r.input("v_range", vec![num(config.v_range.0), num(config.v_range.1)]);
    r.input("grid", vec![config.grid.0, config.grid.1]);
    r.input("refine_iters", config.refine_iters);
    r.input("extended_u", config.extended_u);
    r.input("seed_points", config.seed_points.iter().map(|p| Value::from(vec![num(p.u), num(p.v)])).collect::<Vec<_>>());
    r.input("tol", num(config.tol));
    let result = optimize(&config)?;
    r.output("best_u", num(result.best.u));
    r.output("best_v", num(result.best.v));
    r.output("best_kappa", num(result.best.kappa));
    r.output("gap_multiplier", num(result.gap_multiplier));
    r.output("evaluations", result.trace.len());
    r.table(&["u", "v", "kappa", "gap_multiplier", "incumbent"]);
    for t in &result.trace {
        let opt = |x: Option<f64>| x.map_or(Value::Null, num);
        r.row(vec![num(t.u), num(t.v), opt(t.kappa), opt(t.gap_multiplier), opt(t.incumbent)]);
    }
    Ok((r, Status::Ok))
}

pub fn cmd_a3(mut r: ReportRecord, prime_limit: u64) -> Outcome {
    r.input("prime_limit", prime_limit);
    if prime_limit < 2 {
        return Err(Failure::invalid("--prime-limit must be at least 2"));
    }
    let e = closed_forms::a3(prime_limit);
    let c = sixth_moment_constant();
    let cf = closed_forms::rational_to_f64(&c);
    r.output("primes_used", e.primes_used);
    r.output("partial_product", num(e.value));
    r.output("tail_bound", num(e.tail_bound));
    r.output("lower_bound", num(e.value - e.tail_bound));
    r.output("ratio_42_over_9_factorial", c.to_string());
    r.output("sixth_moment_constant", num(cf * e.value));
    Ok((r, Status::Ok))
}
