//! Derivative-free minimizers: Nelder–Mead, exhaustive grid scan and
//! uniform random search. Every objective call is recorded in an
//! [`OptimizerTrace`]; non-finite objective values are recorded as `+inf`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NelderMead,
    GridScan,
    RandomSearch,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nelder_mead" | "nm" => Ok(Method::NelderMead),
            "grid_scan" | "grid" => Ok(Method::GridScan),
            "random_search" | "random" => Ok(Method::RandomSearch),
            other => Err(Error::Parameter(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Objective calls, not iterations.
    pub max_evaluations: usize,
    /// Nelder–Mead stops once `f_worst − f_best` over the simplex is at most
    /// this and the simplex centroid is no better than the best vertex.
    pub tolerance: f64,
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Points per dimension when [`minimize`] builds grids for [`Method::GridScan`].
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::NelderMead,
            max_evaluations: 1000,
            tolerance: 1e-10,
            bounds: None,
            grid_points: 64,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn nelder_mead(max_evaluations: usize, tolerance: f64) -> Self {
        OptimizerConfig {
            max_evaluations,
            tolerance,
            ..Default::default()
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(Error::Parameter("max_evaluations must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if let Some(bounds) = &self.bounds {
            validate_bounds(bounds)?;
        }
        Ok(())
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Parameter(format!("bounds for dimension {d} are not ordered: ({lo}, {hi})")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub eval: usize,
    pub params: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
    /// Objective value was non-finite and replaced by `+inf`.
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OptimizerTrace {
    pub entries: Vec<TraceEntry>,
}

impl OptimizerTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.entries.iter().map(|e| e.value).fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `eval,param_0..param_{d-1},objective,best_so_far`.
    pub fn to_csv(&self) -> String {
        let dim = self.entries.first().map_or(0, |e| e.params.len());
        let mut out = String::from("eval");
        for d in 0..dim {
            let _ = write!(out, ",param_{d}");
        }
        out.push_str(",objective,best_so_far\n");
        for e in &self.entries {
            let _ = write!(out, "{}", e.eval);
            for p in &e.params {
                let _ = write!(out, ",{p}");
            }
            let _ = writeln!(out, ",{},{}", e.value, e.best_so_far);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxEvaluations,
    /// Every evaluated point was rejected.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub status: Status,
    pub trace: OptimizerTrace,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

/// Wraps an objective, counting calls and recording the trace.
struct Recorder<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    trace: OptimizerTrace,
    best_point: Vec<f64>,
    best_value: f64,
    budget: usize,
}

impl<'a> Recorder<'a> {
    fn new(objective: &'a mut dyn FnMut(&[f64]) -> f64, budget: usize) -> Self {
        Recorder {
            objective,
            trace: OptimizerTrace::default(),
            best_point: Vec::new(),
            best_value: f64::INFINITY,
            budget,
        }
    }

    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        debug_assert!(!self.exhausted());
        let raw = (self.objective)(x);
        let rejected = !raw.is_finite();
        let value = if rejected { f64::INFINITY } else { raw };
        if self.best_point.is_empty() || value < self.best_value {
            self.best_value = value;
            self.best_point = x.to_vec();
        }
        self.trace.entries.push(TraceEntry {
            eval: self.trace.len(),
            params: x.to_vec(),
            value,
            best_so_far: self.best_value,
            rejected,
        });
        value
    }

    fn finish(self, status: Status) -> OptimizationResult {
        let status = if self.best_value.is_finite() { status } else { Status::Failed };
        OptimizationResult {
            best_point: self.best_point,
            best_value: self.best_value,
            status,
            trace: self.trace,
        }
    }
}

fn clamp_into(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(bounds) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    }
}

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Nelder–Mead simplex search. The initial simplex steps 5% of the bound
/// width along each axis (0.1 when unbounded), stepping inward at an upper
/// bound; proposed vertices are clamped into the box.
pub fn nelder_mead(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let dim = initial.len();
    if dim == 0 {
        return Err(Error::Parameter("Nelder–Mead needs at least one dimension".into()));
    }
    let bounds = config.bounds.as_deref();
    if let Some(b) = bounds {
        if b.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: b.len(),
            });
        }
        if initial.iter().zip(b).any(|(&x, &(lo, hi))| !(lo..=hi).contains(&x)) {
            return Err(Error::Parameter("initial point lies outside the bounds".into()));
        }
    }

    let mut rec = Recorder::new(objective, config.max_evaluations);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = rec.eval(initial);
    simplex.push((initial.to_vec(), f0));
    for d in 0..dim {
        if rec.exhausted() {
            return Ok(rec.finish(Status::MaxEvaluations));
        }
        let mut x = initial.to_vec();
        match bounds {
            Some(b) => {
                let (lo, hi) = b[d];
                let step = 0.05 * (hi - lo);
                x[d] = if x[d] + step <= hi { x[d] + step } else { (x[d] - step).max(lo) };
            }
            None => x[d] += 0.1,
        }
        let f = rec.eval(&x);
        simplex.push((x, f));
    }

    let point = |c: &[f64], towards: &[f64], coef: f64| -> Vec<f64> {
        let mut p: Vec<f64> = c.iter().zip(towards).map(|(&ci, &ti)| ci + coef * (ti - ci)).collect();
        clamp_into(&mut p, bounds);
        p
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if best.is_infinite() && worst.is_infinite() {
            return Ok(rec.finish(Status::Failed));
        }
        if rec.exhausted() {
            let status = if worst - best <= config.tolerance { Status::Converged } else { Status::MaxEvaluations };
            return Ok(rec.finish(status));
        }
        if worst - best <= config.tolerance {
            // A flat simplex may straddle a kink; only a flat centroid confirms a plateau.
            let mut centre = vec![0.0; dim];
            for (x, _) in &simplex {
                for (c, &xi) in centre.iter_mut().zip(x) {
                    *c += xi / (dim + 1) as f64;
                }
            }
            clamp_into(&mut centre, bounds);
            let fc = rec.eval(&centre);
            if fc >= best - config.tolerance {
                return Ok(rec.finish(Status::Converged));
            }
            simplex[dim] = (centre, fc);
            continue;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let worst_point = simplex[dim].0.clone();

        let reflected = point(&centroid, &worst_point, -REFLECTION);
        let fr = rec.eval(&reflected);
        if fr < best {
            if rec.exhausted() {
                simplex[dim] = (reflected, fr);
                continue;
            }
            let expanded = point(&centroid, &reflected, EXPANSION);
            let fe = rec.eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        if rec.exhausted() {
            continue;
        }
        let shrink_needed = if fr < worst {
            let contracted = point(&centroid, &reflected, CONTRACTION);
            let fc = rec.eval(&contracted);
            if fc <= fr {
                simplex[dim] = (contracted, fc);
                false
            } else {
                true
            }
        } else {
            let contracted = point(&centroid, &worst_point, CONTRACTION);
            let fc = rec.eval(&contracted);
            if fc < worst {
                simplex[dim] = (contracted, fc);
                false
            } else {
                true
            }
        };
        if shrink_needed {
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                if rec.exhausted() {
                    break;
                }
                let x = point(&anchor, &vertex.0, SHRINK);
                let f = rec.eval(&x);
                *vertex = (x, f);
            }
        }
    }
}

/// Evaluates every point of the Cartesian product of `grids`, first
/// dimension outermost; ties keep the lexicographically first point.
pub fn grid_scan(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    grids: &[Vec<f64>],
) -> Result<OptimizationResult> {
    if grids.is_empty() || grids.iter().any(|g| g.is_empty()) {
        return Err(Error::Parameter("every grid dimension needs at least one point".into()));
    }
    let total = grids
        .iter()
        .try_fold(1usize, |acc, g| acc.checked_mul(g.len()))
        .filter(|&t| t <= 1_000_000)
        .ok_or_else(|| Error::Capacity("grid scan limited to 10^6 points".into()))?;
    let mut rec = Recorder::new(objective, total);
    let mut digits = vec![0usize; grids.len()];
    let mut x: Vec<f64> = grids.iter().map(|g| g[0]).collect();
    for _ in 0..total {
        rec.eval(&x);
        for d in (0..grids.len()).rev() {
            digits[d] += 1;
            if digits[d] < grids[d].len() {
                x[d] = grids[d][digits[d]];
                break;
            }
            digits[d] = 0;
            x[d] = grids[d][0];
        }
    }
    Ok(rec.finish(Status::Converged))
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `config.max_evaluations` uniform samples from the box; deterministic in `config.seed`.
pub fn random_search(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    validate_bounds(bounds)?;
    if bounds.is_empty() {
        return Err(Error::Parameter("random search needs at least one dimension".into()));
    }
    let mut rng = rng::seeded(config.seed);
    let mut rec = Recorder::new(objective, config.max_evaluations);
    while !rec.exhausted() {
        let x: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect();
        rec.eval(&x);
    }
    Ok(rec.finish(Status::MaxEvaluations))
}

/// Runs `config.method` from `initial` (Nelder–Mead) or over `config.bounds`.
pub fn minimize(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    match config.method {
        Method::NelderMead => nelder_mead(objective, initial, config),
        Method::GridScan | Method::RandomSearch => {
            let bounds = config
                .bounds
                .as_deref()
                .ok_or_else(|| Error::Parameter("grid and random search need bounds".into()))?;
            if config.method == Method::GridScan {
                let grids: Vec<Vec<f64>> = bounds
                    .iter()
                    .map(|&(lo, hi)| linspace(lo, hi, config.grid_points))
                    .collect();
                grid_scan(objective, &grids)
            } else {
                random_search(objective, bounds, config)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_trace_invariants(result: &OptimizationResult, budget: usize) {
        assert!(result.trace.len() <= budget);
        assert_eq!(result.best_value, result.trace.min_value());
        for w in result.trace.entries.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
        }
    }

    #[test]
    fn quadratic_three_dims() {
        let mut f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let config = OptimizerConfig::nelder_mead(500, 1e-14);
        let r = nelder_mead(&mut f, &[0.0; 3], &config).unwrap();
        assert!(r.best_value < 1e-8, "{}", r.best_value);
        check_trace_invariants(&r, 500);
    }

    #[test]
    fn constant_objective_plateau() {
        let mut f = |_: &[f64]| 4.0;
        let r = nelder_mead(&mut f, &[0.3, 0.7], &OptimizerConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.best_value, 4.0);
        assert_eq!(r.best_point, vec![0.3, 0.7]);
        // simplex vertices plus the centroid check
        assert_eq!(r.evaluations(), 4);
    }

    #[test]
    fn absolute_value_with_bounds() {
        let mut f = |x: &[f64]| x[0].abs();
        let config = OptimizerConfig::nelder_mead(500, 1e-12).with_bounds(vec![(-1.0, 1.0)]);
        let r = nelder_mead(&mut f, &[0.5], &config).unwrap();
        assert!(r.best_value < 1e-6);
        check_trace_invariants(&r, 500);
    }

    #[test]
    fn budget_is_respected() {
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)
        };
        let r = nelder_mead(&mut f, &[0.0, 0.0], &OptimizerConfig::nelder_mead(17, 1e-15)).unwrap();
        assert_eq!(r.status, Status::MaxEvaluations);
        assert_eq!(r.evaluations(), 17);
        assert_eq!(calls, 17);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut f = |x: &[f64]| if x[0] > 0.05 { f64::NAN } else { (x[0] + 0.5).powi(2) };
        let r = nelder_mead(&mut f, &[0.0], &OptimizerConfig::nelder_mead(200, 1e-12)).unwrap();
        assert!(r.trace.entries.iter().any(|e| e.rejected));
        assert!(r.best_value < 1e-8);

        let mut never = |_: &[f64]| f64::NAN;
        let r = nelder_mead(&mut never, &[0.0, 1.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(r.status, Status::Failed);
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn initial_point_outside_bounds() {
        let mut f = |x: &[f64]| x[0];
        let config = OptimizerConfig::default().with_bounds(vec![(0.0, 1.0)]);
        assert!(matches!(nelder_mead(&mut f, &[2.0], &config), Err(Error::Parameter(_))));
    }

    #[test]
    fn grid_scan_examples() {
        let mut f = |x: &[f64]| x[0] * x[0];
        let r = grid_scan(&mut f, &[vec![-1.0, 0.0, 1.0]]).unwrap();
        assert_eq!((r.best_point.clone(), r.best_value), (vec![0.0], 0.0));

        let mut g = |x: &[f64]| (x[0] - x[1]).abs();
        let r = grid_scan(&mut g, &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(r.best_point, vec![0.0, 0.0]);
        assert_eq!(r.evaluations(), 4);

        assert!(matches!(grid_scan(&mut g, &[vec![0.0], vec![]]), Err(Error::Parameter(_))));
        let big = vec![linspace(0.0, 1.0, 1001), linspace(0.0, 1.0, 1001)];
        assert!(matches!(grid_scan(&mut g, &big), Err(Error::Capacity(_))));
    }

    #[test]
    fn random_search_examples() {
        let mut constant = |_: &[f64]| 1.0;
        let config = OptimizerConfig {
            max_evaluations: 10,
            seed: 5,
            ..Default::default()
        };
        let r = random_search(&mut constant, &[(0.0, 1.0)], &config).unwrap();
        assert_eq!(r.best_point, r.trace.entries[0].params);

        // range of the quadratic over the box is 2, so the target is 0.1
        let mut quad = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let config = OptimizerConfig {
            max_evaluations: 10_000,
            seed: 1,
            ..Default::default()
        };
        let r = random_search(&mut quad, &[(-1.0, 1.0), (-1.0, 1.0)], &config).unwrap();
        assert!(r.best_value < 0.05 * 2.0);
        check_trace_invariants(&r, 10_000);

        let again = random_search(&mut quad, &[(-1.0, 1.0), (-1.0, 1.0)], &config).unwrap();
        assert_eq!(r.trace, again.trace);
    }

    #[test]
    fn trace_csv_header() {
        let mut f = |x: &[f64]| x[0] + x[1];
        let r = grid_scan(&mut f, &[vec![0.0], vec![1.0, 2.0]]).unwrap();
        let csv = r.trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("eval,param_0,param_1,objective,best_so_far"));
        assert_eq!(lines.next(), Some("0,0,1,1,1"));
        assert_eq!(lines.next(), Some("1,0,2,2,1"));
    }

    #[test]
    fn nelder_mead_is_deterministic() {
        let mut f = |x: &[f64]| (x[0] * 3.0).sin() + x[1] * x[1];
        let c = OptimizerConfig::nelder_mead(300, 1e-12);
        let a = nelder_mead(&mut f, &[0.2, 0.4], &c).unwrap();
        let b = nelder_mead(&mut f, &[0.2, 0.4], &c).unwrap();
        assert_eq!(a, b);
    }
}
