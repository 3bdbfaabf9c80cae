//! Python module `zerogap`: thin wrappers over the core crate.
//!
//! Errors map to `ValueError` for bad inputs and `RuntimeError` otherwise.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use zg::closed_forms;
use zg::moment_oracle::{evaluate_moment_in, Precision};
use zg::gap_inequality::{self, DEFAULT_TOL, SCAN_START};
use zg::{CoefficientLabel, GapError, GapParams, MomentSpec, OracleError, SearchConfig, Window};

fn label(s: &str) -> PyResult<CoefficientLabel> {
    s.parse().map_err(|e| PyValueError::new_err(format!("{e}")))
}

fn gap_err(e: GapError) -> PyErr {
    match e {
        GapError::InvalidParams(_) | GapError::ClosedForm(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn params(u: f64, v: f64, kappa: f64, extended_u: bool) -> PyResult<GapParams> {
    GapParams::new(u, v, kappa, extended_u).map_err(gap_err)
}

/// Outcome of one gap-inequality check.
#[pyclass(frozen, get_all, module = "zerogap")]
struct Verdict {
    holds: bool,
    lhs: f64,
    rhs: f64,
    margin: f64,
    gap_multiplier: f64,
}

#[pymethods]
impl Verdict {
    fn __repr__(&self) -> String {
        format!(
            "Verdict(holds={}, lhs={:e}, rhs={:e}, margin={:e}, gap_multiplier={})",
            if self.holds { "True" } else { "False" },
            self.lhs,
            self.rhs,
            self.margin,
            self.gap_multiplier
        )
    }
}

/// Best point found by the parameter search.
#[pyclass(frozen, get_all, module = "zerogap")]
struct Optimum {
    u: f64,
    v: f64,
    kappa: f64,
    gap_multiplier: f64,
    evaluations: usize,
}

#[pymethods]
impl Optimum {
    fn __repr__(&self) -> String {
        format!("Optimum(u={}, v={}, kappa={}, gap_multiplier={})", self.u, self.v, self.kappa, self.gap_multiplier)
    }
}

#[pyfunction]
#[pyo3(signature = (u, v, kappa, extended_u = false))]
fn check(u: f64, v: f64, kappa: f64, extended_u: bool) -> PyResult<Verdict> {
    let r = gap_inequality::check(&params(u, v, kappa, extended_u)?).map_err(gap_err)?;
    Ok(Verdict { holds: r.holds, lhs: r.lhs, rhs: r.rhs, margin: r.margin, gap_multiplier: r.gap_multiplier })
}

/// `(holds, margin, error_bound)` from exact rational arithmetic.
#[pyfunction]
#[pyo3(signature = (u, v, kappa, extended_u = false))]
fn check_exact(u: f64, v: f64, kappa: f64, extended_u: bool) -> PyResult<(bool, f64, f64)> {
    let e = gap_inequality::check_exact(&params(u, v, kappa, extended_u)?).map_err(gap_err)?;
    Ok((e.holds, e.margin, e.error_bound))
}

#[pyfunction]
#[pyo3(signature = (u, v, extended_u = false, tol = DEFAULT_TOL))]
fn sup_kappa(u: f64, v: f64, extended_u: bool, tol: f64) -> PyResult<f64> {
    gap_inequality::sup_kappa(u, v, extended_u, tol).map_err(gap_err)
}

/// Closed-form coefficient `label` ∈ "A".."J" at (κ, u).
#[pyfunction]
fn coefficient(label_name: &str, kappa: f64, u: f64) -> PyResult<f64> {
    closed_forms::eval(label(label_name)?, kappa, u).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Swap-sum oracle value `(re, im)` for the moment behind `label`.
/// With `symmetrize`, averages with the conjugate moment so `im` cancels.
#[pyfunction]
#[pyo3(signature = (label_name, kappa, u, precision = "f64", symmetrize = false))]
fn evaluate_moment(py: Python<'_>, label_name: &str, kappa: f64, u: f64, precision: &str, symmetrize: bool) -> PyResult<(f64, f64)> {
    let precision = match precision {
        "f64" => Precision::F64,
        "dd" => Precision::DoubleDouble,
        other => return Err(PyValueError::new_err(format!("precision must be \"f64\" or \"dd\", got {other:?}"))),
    };
    let spec = MomentSpec::for_label(label(label_name)?);
    let run = |s: &MomentSpec| evaluate_moment_in(s, kappa, u, Window::default(), precision);
    let z = py
        .detach(|| {
            let z = run(&spec)?;
            if symmetrize && spec.conjugate() != spec {
                Ok((z + run(&spec.conjugate())?) * 0.5)
            } else {
                Ok(z)
            }
        })
        .map_err(|e: OracleError| PyValueError::new_err(e.to_string()))?;
    Ok((z.re, z.im))
}

/// κ-Taylor coefficients of `label` as polynomial strings in u.
#[pyfunction]
#[pyo3(signature = (label_name, order = 6))]
fn kappa_series(label_name: &str, order: usize) -> PyResult<Vec<String>> {
    let s = closed_forms::kappa_taylor(label(label_name)?, order).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(s.coefficients().iter().map(|p| p.to_string()).collect())
}

#[pyfunction]
#[pyo3(signature = (u_range = None, v_range = None, grid = (16, 16), refine = 30, extended_u = false, seeds = Vec::new()))]
fn optimize(
    py: Python<'_>,
    u_range: Option<(f64, f64)>,
    v_range: Option<(f64, f64)>,
    grid: (usize, usize),
    refine: usize,
    extended_u: bool,
    seeds: Vec<(f64, f64)>,
) -> PyResult<Optimum> {
    let base = SearchConfig::default();
    let (du, dv) = if extended_u { ((0.4, 0.6), (2.5, 2.9)) } else { (base.u_range, base.v_range) };
    let config = SearchConfig {
        u_range: u_range.unwrap_or(du),
        v_range: v_range.unwrap_or(dv),
        grid,
        refine_iters: refine,
        extended_u,
        seed_points: seeds.iter().map(|&(u, v)| GapParams { u, v, kappa: SCAN_START, extended_u }).collect(),
        tol: base.tol,
    };
    let r = py.detach(|| zg::optimize(&config)).map_err(gap_err)?;
    Ok(Optimum {
        u: r.best.u,
        v: r.best.v,
        kappa: r.best.kappa,
        gap_multiplier: r.gap_multiplier,
        evaluations: r.trace.len(),
    })
}

/// `(partial_product, tail_bound, primes_used)` of the Euler product for a₃.
#[pyfunction]
#[pyo3(signature = (prime_limit = 1_000_000))]
fn a3(py: Python<'_>, prime_limit: u64) -> PyResult<(f64, f64, usize)> {
    if prime_limit < 2 {
        return Err(PyValueError::new_err("prime_limit must be at least 2"));
    }
    let e = py.detach(|| closed_forms::a3(prime_limit));
    Ok((e.value, e.tail_bound, e.primes_used))
}

#[pymodule]
fn zerogap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Verdict>()?;
    m.add_class::<Optimum>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(check_exact, m)?)?;
    m.add_function(wrap_pyfunction!(sup_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_moment, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_series, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(a3, m)?)?;
    m.add("LABELS", CoefficientLabel::ALL.iter().map(|l| l.to_string()).collect::<Vec<_>>())?;
    Ok(())
}
