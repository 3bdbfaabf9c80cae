//! Grid plus pattern search over `(u, v)` for the largest certified κ.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::GapError;
use crate::gap_inequality::{sup_kappa, GapParams, DEFAULT_TOL, U_MAX, U_MAX_EXTENDED};

pub const SHRINK: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub grid: (usize, usize),
    pub refine_iters: usize,
    pub extended_u: bool,
    pub seed_points: Vec<GapParams>,
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            u_range: (1e-6, 0.0909),
            v_range: (1.8, 2.6),
            grid: (16, 16),
            refine_iters: 30,
            extended_u: false,
            seed_points: Vec::new(),
            tol: DEFAULT_TOL,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), GapError> {
        let bad = |m: String| Err(GapError::InvalidParams(m));
        let u_max = if self.extended_u { U_MAX_EXTENDED } else { U_MAX };
        let (ul, uh) = self.u_range;
        let (vl, vh) = self.v_range;
        if !(ul > 0.0 && ul <= uh && uh < u_max) {
            return bad(format!("u_range ({ul}, {uh}) must lie in (0, {u_max})"));
        }
        if !(vl > 0.0 && vl <= vh && vh.is_finite()) {
            return bad(format!("v_range ({vl}, {vh}) must be positive and ordered"));
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return bad("grid must be at least 1x1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub u: f64,
    pub v: f64,
    /// `None` when no κ in the scan range works.
    pub kappa: Option<f64>,
    pub gap_multiplier: Option<f64>,
    /// Incumbent multiplier after this evaluation.
    pub incumbent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: GapParams,
    pub gap_multiplier: f64,
    pub trace: Vec<TracePoint>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    u: f64,
    v: f64,
    kappa: f64,
}

/// Larger κ wins; ties go to the lexicographically smaller `(u, v)`.
fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.kappa.total_cmp(&b.kappa) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.u, a.v).partial_cmp(&(b.u, b.v)) == Some(Ordering::Less),
    }
}

fn evaluate(u: f64, v: f64, config: &SearchConfig) -> Result<Option<f64>, GapError> {
    match sup_kappa(u, v, config.extended_u, config.tol) {
        Ok(k) => Ok(Some(k)),
        Err(GapError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect()
}

struct Search<'a> {
    config: &'a SearchConfig,
    trace: Vec<TracePoint>,
    best: Option<Candidate>,
}

impl Search<'_> {
    fn record(&mut self, u: f64, v: f64, kappa: Option<f64>) {
        if let Some(k) = kappa {
            let c = Candidate { u, v, kappa: k };
            if self.best.map_or(true, |b| better(&c, &b)) {
                self.best = Some(c);
            }
        }
        self.trace.push(TracePoint {
            u,
            v,
            kappa,
            gap_multiplier: kappa.map(|k| k / PI),
            incumbent: self.best.map(|b| b.kappa / PI),
        });
    }
}

/// Grid scan (parallel, index-ordered reduction), then `refine_iters` rounds
/// of compass steps around the incumbent; the step halves after a round
/// with no improvement.
pub fn optimize(config: &SearchConfig) -> Result<SearchResult, GapError> {
    config.validate()?;
    let mut points: Vec<(f64, f64)> = config.seed_points.iter().map(|p| (p.u, p.v)).collect();
    for u in axis(config.u_range, config.grid.0) {
        for v in axis(config.v_range, config.grid.1) {
            points.push((u, v));
        }
    }
    let values: Vec<Option<f64>> =
        points.par_iter().map(|&(u, v)| evaluate(u, v, config)).collect::<Result<_, _>>()?;
    let mut search = Search { config, trace: Vec::new(), best: None };
    for (&(u, v), k) in points.iter().zip(values) {
        search.record(u, v, k);
    }
    let Some(_) = search.best else {
        let (u, v) = (config.u_range.0, config.v_range.0);
        return Err(GapError::Infeasible { u, v });
    };
    let du0 = if config.grid.0 > 1 {
        (config.u_range.1 - config.u_range.0) / (config.grid.0 - 1) as f64
    } else {
        0.0
    };
    let dv0 = if config.grid.1 > 1 {
        (config.v_range.1 - config.v_range.0) / (config.grid.1 - 1) as f64
    } else {
        0.0
    };
    let (mut du, mut dv) = (du0 * SHRINK, dv0 * SHRINK);
    for _ in 0..config.refine_iters {
        let inc = search.best.expect("incumbent exists");
        let moves = [(du, 0.0), (-du, 0.0), (0.0, dv), (0.0, -dv)];
        let mut improved = false;
        for (mu, mv) in moves {
            if mu == 0.0 && mv == 0.0 {
                continue;
            }
            let u = (inc.u + mu).clamp(config.u_range.0, config.u_range.1);
            let v = (inc.v + mv).clamp(config.v_range.0, config.v_range.1);
            if u == inc.u && v == inc.v {
                continue;
            }
            let before = search.best;
            let k = evaluate(u, v, search.config)?;
            search.record(u, v, k);
            if search.best.map(|b| (b.u, b.v)) != before.map(|b| (b.u, b.v)) {
                improved = true;
            }
        }
        if !improved {
            du *= SHRINK;
            dv *= SHRINK;
        }
    }
    let best = search.best.expect("incumbent exists");
    Ok(SearchResult {
        best: GapParams { u: best.u, v: best.v, kappa: best.kappa, extended_u: config.extended_u },
        gap_multiplier: best.kappa / PI,
        trace: search.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap_inequality::check;

    fn small() -> SearchConfig {
        SearchConfig { grid: (3, 3), refine_iters: 4, ..SearchConfig::default() }
    }

    #[test]
    fn single_point_is_sup_kappa() {
        let c = SearchConfig {
            u_range: (0.0909, 0.0909),
            v_range: (2.13, 2.13),
            grid: (1, 1),
            refine_iters: 0,
            ..SearchConfig::default()
        };
        let r = optimize(&c).unwrap();
        assert_eq!(r.best.kappa, sup_kappa(0.0909, 2.13, false, DEFAULT_TOL).unwrap());
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn incumbent_is_monotone_and_best_holds() {
        let r = optimize(&small()).unwrap();
        let inc: Vec<f64> = r.trace.iter().filter_map(|t| t.incumbent).collect();
        assert!(inc.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*inc.last().unwrap(), r.gap_multiplier);
        let max = r.trace.iter().filter_map(|t| t.gap_multiplier).fold(f64::MIN, f64::max);
        assert_eq!(max, r.gap_multiplier);
        let just_inside = GapParams { kappa: r.best.kappa - 1e-3, ..r.best };
        assert!(check(&just_inside).unwrap().holds);
    }

    #[test]
    fn deterministic() {
        assert_eq!(optimize(&small()).unwrap(), optimize(&small()).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = small();
        c.grid = (0, 3);
        assert!(optimize(&c).is_err());
        let mut c = small();
        c.u_range = (0.05, 0.2);
        assert!(optimize(&c).is_err());
    }

    #[test]
    fn ties_prefer_smaller_u_then_v() {
        let a = Candidate { u: 0.01, v: 2.0, kappa: 5.0 };
        let b = Candidate { u: 0.02, v: 1.0, kappa: 5.0 };
        assert!(better(&a, &b));
        assert!(!better(&b, &a));
    }
}
