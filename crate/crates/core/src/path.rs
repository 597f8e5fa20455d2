//! Solutions over a decreasing grid of `λ` with warm starts, and the
//! constrained form `min ‖x − x̄‖ s.t. g_k(x) ≤ α` by bisection on `log λ`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::model::ReducedModel;
use crate::newton::solve_newton;
use crate::objective::{prob_from_objective, Objective, Problem};
use crate::scalar::Scalar;
use crate::solver::{fmt17, SolverConfig, SolverResult};

/// `λ` grid and solver settings for [`solve_path`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub num_points: usize,
    pub warm_start: bool,
    pub solver: SolverConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { lambda_max: 1e3, lambda_min: 1e-5, num_points: 100, warm_start: true, solver: SolverConfig::default() }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.num_points == 0 {
            return Err(Error::InvalidConfig("path needs at least one grid point".into()));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda_max {} must be positive", self.lambda_max)));
        }
        if !(self.lambda_min > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda_min {} must be positive", self.lambda_min)));
        }
        if self.num_points > 1 && !(self.lambda_min < self.lambda_max) {
            return Err(Error::InvalidConfig(format!(
                "lambda_min {} must be below lambda_max {}",
                self.lambda_min, self.lambda_max
            )));
        }
        Ok(())
    }

    /// Log-spaced, strictly decreasing from `lambda_max` to `lambda_min`.
    /// A single-point grid is just `lambda_max`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.num_points;
        if n == 1 {
            return vec![self.lambda_max];
        }
        let (hi, lo) = (self.lambda_max.log10(), self.lambda_min.log10());
        (0..n)
            .map(|i| match i {
                0 => self.lambda_max,
                i if i == n - 1 => self.lambda_min,
                i => 10f64.powf(hi + (lo - hi) * i as f64 / (n - 1) as f64),
            })
            .collect()
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry<T> {
    pub lambda: T,
    pub x_star: Vec<T>,
    pub objective: T,
    /// `p_k(x*)` from the softmax at `x*`.
    pub p_target: T,
    pub iterations: usize,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult<T> {
    pub entries: Vec<PathEntry<T>>,
    pub total_seconds: f64,
}

/// A path that stopped early; holds the entries solved before the failure.
#[derive(Debug, thiserror::Error)]
#[error("path aborted at grid point {} of {total}: {source}", partial.entries.len() + 1)]
pub struct PathFailure<T: std::fmt::Debug> {
    pub partial: PathResult<T>,
    pub total: usize,
    #[source]
    pub source: Error,
}

impl<T: std::fmt::Debug> From<PathFailure<T>> for Error {
    fn from(f: PathFailure<T>) -> Self {
        Error::PathAborted { completed: f.partial.entries.len(), total: f.total, source: Box::new(f.source) }
    }
}

/// Solves from `lambda_max` down to `lambda_min`. The first point starts at
/// `x̄`; with `warm_start` every later point starts at the previous `x*`,
/// otherwise at `x̄`. Every entry is a converged solve.
pub fn solve_path<T: Scalar>(
    reduced: &ReducedModel<T>,
    source: &[T],
    cfg: &PathConfig,
) -> Result<PathResult<T>, PathFailure<T>> {
    let start = Instant::now();
    let grid = cfg.grid();
    let total = grid.len();
    let mut entries: Vec<PathEntry<T>> = Vec::with_capacity(total);
    let fail = |entries: Vec<PathEntry<T>>, source: Error| PathFailure {
        partial: PathResult { entries, total_seconds: start.elapsed().as_secs_f64() },
        total,
        source,
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(entries, e));
    }
    for &lambda in &grid {
        let problem = Problem { source: source.to_vec(), target_class: reduced.target_class(), lambda: T::lit(lambda) };
        let x0 = match entries.last() {
            Some(prev) if cfg.warm_start => prev.x_star.clone(),
            _ => source.to_vec(),
        };
        let solved = solve_newton(reduced, &problem, &x0, &cfg.solver).and_then(SolverResult::require_converged);
        match solved {
            Ok(res) => entries.push(PathEntry {
                lambda: problem.lambda,
                p_target: res.probs[reduced.target_class()],
                objective: res.objective,
                iterations: res.iterations,
                elapsed_seconds: res.elapsed_seconds,
                x_star: res.x_star,
            }),
            Err(e) => return Err(fail(entries, e)),
        }
    }
    Ok(PathResult { entries, total_seconds: start.elapsed().as_secs_f64() })
}

impl<T: Scalar> PathResult<T> {
    /// CSV with header `lambda,E,p_target,iterations,time_s`.
    pub fn write_csv<W: Write>(&self, out: W, with_times: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "E", "p_target", "iterations", "time_s"])?;
        for e in &self.entries {
            w.write_record([
                fmt17(e.lambda.to_f64_lossy()),
                fmt17(e.objective.to_f64_lossy()),
                fmt17(e.p_target.to_f64_lossy()),
                e.iterations.to_string(),
                fmt17(if with_times { e.elapsed_seconds } else { 0.0 }),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.entries.iter().map(|e| e.iterations).sum()
    }
}

/// `p_k` recomputed from the objective value of a path entry, for
/// consistency checks against the softmax value.
pub fn entry_prob_from_objective<T: Scalar>(reduced: &ReducedModel<T>, source: &[T], entry: &PathEntry<T>) -> Result<T> {
    let problem = Problem { source: source.to_vec(), target_class: reduced.target_class(), lambda: entry.lambda };
    let obj = Objective::new(reduced, &problem)?;
    Ok(prob_from_objective(&obj, &entry.x_star, entry.objective))
}

/// Lower and upper `λ` limits of the constrained-form bisection.
pub const CONSTRAINED_LAMBDA_RANGE: (f64, f64) = (1e-12, 1e12);
/// Bisection step cap for the constrained form.
pub const CONSTRAINED_MAX_STEPS: usize = 200;

/// Solution of the constrained form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution<T> {
    pub x: Vec<T>,
    /// `λ` whose minimizer is returned; `None` when `x̄` is already feasible.
    pub lambda: Option<T>,
    /// `g_k(x)`
    pub target_neg_log_prob: T,
    pub solves: usize,
}

/// `min ‖x − x̄‖ s.t. g_k(x) ≤ alpha_target`, returning `x*(λ)` for a `λ`
/// with `g_k(x*(λ)) ∈ [alpha_target·(1 − tol), alpha_target]`.
///
/// Relies on `g_k(x*(λ))` being non-decreasing in `λ`; every new bisection
/// point is checked against its bracket and a violation is reported as
/// [`Error::NonMonotone`].
pub fn constrained_solve<T: Scalar>(
    reduced: &ReducedModel<T>,
    source: &[T],
    alpha_target: T,
    tol: T,
    solver: &SolverConfig,
) -> Result<ConstrainedSolution<T>> {
    if !(alpha_target > T::zero()) || !alpha_target.is_finite() {
        return Err(Error::InvalidProblem(format!("alpha_target must be positive, got {alpha_target}")));
    }
    if !(tol > T::zero() && tol < T::one()) {
        return Err(Error::InvalidProblem(format!("tolerance must be in (0,1), got {tol}")));
    }
    if !all_finite(source) {
        return Err(Error::NonFinite("source instance"));
    }
    let k = reduced.target_class();
    let lower = alpha_target * (T::one() - tol);
    let at_source = {
        let p = Problem { source: source.to_vec(), target_class: k, lambda: T::one() };
        Objective::new(reduced, &p)?.eval(source)?.target_neg_log_prob(k)
    };
    if at_source <= alpha_target {
        return Ok(ConstrainedSolution { x: source.to_vec(), lambda: None, target_neg_log_prob: at_source, solves: 0 });
    }
    if reduced.spec_norm_sq() == T::zero() {
        return Err(Error::Infeasible(format!(
            "target class probability cannot change (Ā_k = 0); g_k = {at_source} > {alpha_target}"
        )));
    }

    let solve_at = |log_lambda: f64, x0: &[T]| -> Result<(Vec<T>, T)> {
        let problem = Problem { source: source.to_vec(), target_class: k, lambda: T::lit(log_lambda.exp()) };
        let res = solve_newton(reduced, &problem, x0, solver)?.require_converged()?;
        let g = -res.probs[k].ln();
        // p_k may underflow only when g is huge; recompute from the log domain.
        let g = if g.is_finite() {
            g
        } else {
            let obj = Objective::new(reduced, &problem)?;
            obj.eval(&res.x_star)?.target_neg_log_prob(k)
        };
        Ok((res.x_star, g))
    };

    // Bracket in log λ: g(lo) ≤ α (feasible side), g(hi) > α.
    let (range_lo, range_hi) = (CONSTRAINED_LAMBDA_RANGE.0.ln(), CONSTRAINED_LAMBDA_RANGE.1.ln());
    let mut hi = (range_hi, at_source, source.to_vec());
    let mut lo: Option<(f64, T, Vec<T>)> = None;
    for step in 0..CONSTRAINED_MAX_STEPS {
        let left = lo.as_ref().map_or(range_lo, |l| l.0);
        let mid = 0.5 * (left + hi.0);
        if (hi.0 - left).abs() < 1e-14 * hi.0.abs().max(1.0) {
            break;
        }
        // Warm start from the bracket end closest in log λ.
        let x0 = match &lo {
            Some(l) if (mid - l.0).abs() < (hi.0 - mid).abs() => l.2.clone(),
            _ => hi.2.clone(),
        };
        let (x, g) = solve_at(mid, &x0)?;
        let solves = step + 1;
        let slack = T::lit(1e-10) * (T::one() + g.abs());
        if g > hi.1 + slack || lo.as_ref().is_some_and(|l| g + slack < l.1) {
            return Err(Error::NonMonotone(format!(
                "g_k(x*(λ)) = {g} at λ = {:e} lies outside its bracket values",
                mid.exp()
            )));
        }
        if g <= alpha_target {
            if g >= lower {
                return Ok(ConstrainedSolution { x, lambda: Some(T::lit(mid.exp())), target_neg_log_prob: g, solves });
            }
            lo = Some((mid, g, x));
        } else {
            hi = (mid, g, x);
            if lo.is_none() && (hi.0 - range_lo) < 1e-9 {
                break;
            }
        }
    }
    match lo {
        None => Err(Error::Infeasible(format!(
            "g_k(x*(λ)) stays above {alpha_target} down to λ = {:e}",
            CONSTRAINED_LAMBDA_RANGE.0
        ))),
        Some(_) => Err(Error::Infeasible(format!(
            "bisection bracket exhausted before g_k reached [{lower}, {alpha_target}]"
        ))),
    }
}
