//! Shared solver configuration, results, traces and the iteration driver
//! used by Newton's method and the first-order baselines.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line_search::{backtracking, strong_wolfe, LineSearch, WolfeParams};
use crate::linalg::{all_finite, axpy, norm, sub};
use crate::objective::{Objective, Point};
use crate::scalar::Scalar;

/// Stopping rule and line-search settings shared by every method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Backtracking factor ρ.
    pub backtrack_factor: f64,
    /// Maximum number of trial steps per backtracking search.
    pub max_backtracks: usize,
    pub line_search: LineSearch,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 1000,
            backtrack_factor: 0.8,
            max_backtracks: 100,
            line_search: LineSearch::Backtracking,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
        }
    }
}

impl SolverConfig {
    pub fn with_line_search(self, line_search: LineSearch) -> Self {
        Self { line_search, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidConfig(format!("backtrack factor {} not in (0,1)", self.backtrack_factor)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("gradient tolerance {} must be positive", self.grad_tol)));
        }
        if self.max_backtracks == 0 {
            return Err(Error::InvalidConfig("max_backtracks must be positive".into()));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        Ok(())
    }
}

/// One row of a solver trace.
///
/// `objective` is `E(x_0)` plus the sum of the exactly computed per-step
/// changes, so it decreases strictly even once the changes fall below the
/// rounding level of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    /// Trial steps evaluated by the line search (0 for the initial record).
    pub backtracks: usize,
    pub elapsed_seconds: f64,
    /// `E(x_iter) − E(x_{iter−1})` from the line restriction.
    pub decrease: f64,
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult<T> {
    pub x_star: Vec<T>,
    /// `E(x_star)` evaluated directly.
    pub objective: T,
    pub grad_norm: T,
    pub probs: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Steps that fell back to a `1/L` gradient step.
    pub fallback_steps: usize,
    pub elapsed_seconds: f64,
    /// Record 0 is the starting point; record `i` follows step `i`.
    pub trace: Vec<IterRecord>,
}

impl<T: Scalar> SolverResult<T> {
    /// Converts a non-converged result into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations, grad_norm: self.grad_norm.to_f64_lossy() })
        }
    }

    /// Line-search trial counts of every step taken.
    pub fn trial_counts(&self) -> impl Iterator<Item = usize> + '_ {
        self.trace.iter().skip(1).map(|r| r.backtracks)
    }
}

/// Writes a trace as CSV with header `iter,E,grad_norm,step,backtracks,time_s`.
pub fn write_trace_csv<W: Write>(out: W, trace: &[IterRecord], with_times: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "E", "grad_norm", "step", "backtracks", "time_s"])?;
    for r in trace {
        let t = if with_times { r.elapsed_seconds } else { 0.0 };
        w.write_record([
            r.iter.to_string(),
            fmt17(r.objective),
            fmt17(r.grad_norm),
            fmt17(r.step_size),
            r.backtracks.to_string(),
            fmt17(t),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Decimal text with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// A search direction proposed by a method.
pub(crate) enum Proposal<T> {
    /// Use with the configured line search.
    Direction(Vec<T>),
    /// A direction together with its logit image `Ā_k d`.
    Imaged(Vec<T>, Vec<T>),
    /// Take exactly `−∇E/L`; used when a method cannot produce a direction.
    GradientFallback,
}

/// Per-method direction logic driven by [`drive`].
pub(crate) trait DirectionRule<T: Scalar> {
    fn propose(&mut self, obj: &Objective<'_, T>, point: &Point<T>, grad: &[T]) -> Result<Proposal<T>>;

    /// Initial trial step for the Wolfe search.
    fn initial_step(&self, _slope0: T) -> T {
        T::one()
    }

    /// Called after an accepted step with `s = x_new − x`, `y = g_new − g`.
    fn update(&mut self, _s: &[T], _y: &[T], _grad_new: &[T], _alpha: T, _slope0: T) {}

    /// Discards accumulated curvature or conjugacy information.
    fn reset(&mut self) {}
}

pub(crate) fn drive<T: Scalar>(
    obj: &Objective<'_, T>,
    x0: &[T],
    cfg: &SolverConfig,
    rule: &mut dyn DirectionRule<T>,
) -> Result<SolverResult<T>> {
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch(format!("x0 has {} entries, expected {}", x0.len(), obj.dim())));
    }
    if !all_finite(x0) {
        return Err(Error::NonFinite("starting point"));
    }
    let start = Instant::now();
    let tol = T::lit(cfg.grad_tol);
    let rho = T::lit(cfg.backtrack_factor);
    let wolfe = WolfeParams { c1: T::lit(cfg.wolfe_c1), c2: T::lit(cfg.wolfe_c2), ..WolfeParams::default() };
    let inv_lipschitz = T::one() / obj.lipschitz_bound();

    let mut point = obj.eval(x0)?;
    let mut grad = obj.gradient_at(&point);
    let mut grad_norm = norm(&grad);
    let mut running = point.value.to_f64_lossy();
    let mut trace = vec![IterRecord {
        iter: 0,
        objective: running,
        grad_norm: grad_norm.to_f64_lossy(),
        step_size: 0.0,
        backtracks: 0,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        decrease: 0.0,
    }];
    let mut fallback_steps = 0;
    let mut iter = 0;

    while grad_norm >= tol && iter < cfg.max_iter {
        iter += 1;
        let proposal = rule.propose(obj, &point, &grad)?;
        let steepest = |point: &Point<T>, grad: &[T]| {
            let d: Vec<T> = grad.iter().map(|&g| -g).collect();
            let ray = obj.ray(point, &d);
            (d, ray)
        };
        let proposed = match proposal {
            Proposal::Direction(d) => {
                let ray = obj.ray(&point, &d);
                Some((d, ray))
            }
            Proposal::Imaged(d, w) => {
                let ray = obj.ray_with_image(&point, &d, w);
                Some((d, ray))
            }
            Proposal::GradientFallback => None,
        };
        let (direction, ray, forced_constant) = match proposed {
            Some((d, ray)) => {
                if ray.initial_slope() < T::zero() && all_finite(&d) {
                    (d, ray, false)
                } else {
                    rule.reset();
                    let (d, ray) = steepest(&point, &grad);
                    (d, ray, false)
                }
            }
            None => {
                rule.reset();
                fallback_steps += 1;
                let (d, ray) = steepest(&point, &grad);
                (d, ray, true)
            }
        };
        let slope0 = ray.initial_slope();
        let line_search = if forced_constant { LineSearch::Constant } else { cfg.line_search };
        let fail = |reason: String| Error::LineSearchFailed { iteration: iter, reason };
        let (alpha, delta, trials) = match line_search {
            LineSearch::Backtracking => {
                let s = backtracking(|a| ray.delta(a), rho, cfg.max_backtracks).map_err(fail)?;
                (s.alpha, s.delta, s.trials)
            }
            LineSearch::Wolfe => {
                let s = strong_wolfe(|a| ray.delta_and_slope(a), slope0, rule.initial_step(slope0), &wolfe)
                    .map_err(fail)?;
                (s.step.alpha, s.step.delta, s.step.trials)
            }
            LineSearch::Constant => (inv_lipschitz, ray.delta(inv_lipschitz), 1),
        };

        let mut x_new = point.x.clone();
        axpy(alpha, &direction, &mut x_new);
        let next = obj.eval(&x_new)?;
        let grad_new = obj.gradient_at(&next);
        let s = sub(&x_new, &point.x);
        let y = sub(&grad_new, &grad);
        rule.update(&s, &y, &grad_new, alpha, slope0);

        point = next;
        grad = grad_new;
        grad_norm = norm(&grad);
        running += delta.to_f64_lossy();
        trace.push(IterRecord {
            iter,
            objective: running,
            grad_norm: grad_norm.to_f64_lossy(),
            step_size: alpha.to_f64_lossy(),
            backtracks: trials,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            decrease: delta.to_f64_lossy(),
        });
    }

    Ok(SolverResult {
        converged: grad_norm < tol,
        objective: point.value,
        x_star: point.x,
        grad_norm,
        probs: point.probs,
        iterations: iter,
        fallback_steps,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        trace,
    })
}
