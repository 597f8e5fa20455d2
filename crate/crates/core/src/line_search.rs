//! Step-size rules. Each search works on a one-dimensional restriction
//! `φ(α) = E(x + αd) − E(x)` supplied as a closure, so the same code serves
//! the solvers and standalone test functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineSearch {
    /// `α ∈ {1, ρ, ρ², …}`, first value giving a strict decrease.
    Backtracking,
    /// Strong Wolfe conditions with bracketing and cubic zoom.
    Wolfe,
    /// `α = 1/L` with `L` the Lipschitz constant of `∇E`.
    Constant,
}

impl LineSearch {
    pub fn name(self) -> &'static str {
        match self {
            Self::Backtracking => "backtracking",
            Self::Wolfe => "wolfe",
            Self::Constant => "constant",
        }
    }
}

impl std::str::FromStr for LineSearch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backtracking" => Ok(Self::Backtracking),
            "wolfe" => Ok(Self::Wolfe),
            "constant" => Ok(Self::Constant),
            other => Err(Error::InvalidConfig(format!("unknown line search '{other}'"))),
        }
    }
}

impl std::fmt::Display for LineSearch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub alpha: T,
    /// `φ(α)`, the change in objective.
    pub delta: T,
    /// Number of step sizes evaluated, including the accepted one.
    pub trials: usize,
}

/// Backtracking from `α = 1` by factor `rho` until `φ(α) < 0`.
pub fn backtracking<T: Scalar>(
    mut phi: impl FnMut(T) -> T,
    rho: T,
    max_trials: usize,
) -> Result<Step<T>, String> {
    let mut alpha = T::one();
    for trials in 1..=max_trials {
        let delta = phi(alpha);
        if delta < T::zero() {
            return Ok(Step { alpha, delta, trials });
        }
        alpha = alpha * rho;
    }
    Err(format!("no decrease after {max_trials} backtracking trials"))
}

/// Strong Wolfe parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams<T> {
    pub c1: T,
    pub c2: T,
    pub alpha_max: T,
    pub max_evals: usize,
}

impl<T: Scalar> Default for WolfeParams<T> {
    fn default() -> Self {
        Self { c1: T::lit(1e-4), c2: T::lit(0.9), alpha_max: T::lit(1e10), max_evals: 60 }
    }
}

/// Wolfe search result; also carries `φ'(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeStep<T> {
    pub step: Step<T>,
    pub slope: T,
}

/// Strong Wolfe line search: bracketing phase that may grow the step beyond
/// `alpha_init`, followed by a zoom using safeguarded cubic interpolation.
///
/// `phi` returns `(φ(α), φ'(α))` and `slope0 = φ'(0) < 0`. The returned step
/// satisfies `φ(α) ≤ c1·α·φ'(0)` and `|φ'(α)| ≤ c2·|φ'(0)|`.
pub fn strong_wolfe<T: Scalar>(
    mut phi: impl FnMut(T) -> (T, T),
    slope0: T,
    alpha_init: T,
    params: &WolfeParams<T>,
) -> Result<WolfeStep<T>, String> {
    if !(slope0 < T::zero()) {
        return Err(format!("not a descent direction (slope {slope0:e})"));
    }
    let WolfeParams { c1, c2, alpha_max, max_evals } = *params;
    let curvature = c2 * slope0.abs();
    let mut evals = 0;
    let mut prev = Sample { alpha: T::zero(), delta: T::zero(), slope: slope0 };
    let mut alpha = alpha_init.min(alpha_max).max(T::epsilon());

    loop {
        if evals >= max_evals {
            return Err(format!("bracketing exceeded {max_evals} evaluations"));
        }
        let (delta, slope) = phi(alpha);
        evals += 1;
        let cur = Sample { alpha, delta, slope };
        if !delta.is_finite() || delta > c1 * alpha * slope0 || (evals > 1 && delta >= prev.delta) {
            return zoom(&mut phi, prev, cur, slope0, params, evals);
        }
        if slope.abs() <= curvature {
            return Ok(WolfeStep { step: Step { alpha, delta, trials: evals }, slope });
        }
        if slope >= T::zero() {
            return zoom(&mut phi, cur, prev, slope0, params, evals);
        }
        if alpha >= alpha_max {
            return Err("step reached alpha_max without satisfying the curvature condition".into());
        }
        prev = cur;
        alpha = (alpha * T::lit(4.0)).min(alpha_max);
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample<T> {
    alpha: T,
    delta: T,
    slope: T,
}

fn zoom<T: Scalar>(
    phi: &mut impl FnMut(T) -> (T, T),
    mut lo: Sample<T>,
    mut hi: Sample<T>,
    slope0: T,
    params: &WolfeParams<T>,
    mut evals: usize,
) -> Result<WolfeStep<T>, String> {
    let curvature = params.c2 * slope0.abs();
    loop {
        if evals >= params.max_evals {
            return Err(format!("zoom exceeded {} evaluations", params.max_evals));
        }
        let width = (hi.alpha - lo.alpha).abs();
        if width <= T::epsilon() * lo.alpha.abs().max(hi.alpha.abs()) {
            return Err("zoom interval collapsed".into());
        }
        let alpha = interpolate(&lo, &hi);
        let (delta, slope) = phi(alpha);
        evals += 1;
        if !delta.is_finite() || delta > params.c1 * alpha * slope0 || delta >= lo.delta {
            hi = Sample { alpha, delta, slope };
        } else {
            if slope.abs() <= curvature {
                return Ok(WolfeStep { step: Step { alpha, delta, trials: evals }, slope });
            }
            if slope * (hi.alpha - lo.alpha) >= T::zero() {
                hi = lo;
            }
            lo = Sample { alpha, delta, slope };
        }
    }
}

/// Minimizer of the cubic through two samples, kept at least 10% of the
/// interval away from either end; bisection when the cubic is unusable.
fn interpolate<T: Scalar>(a: &Sample<T>, b: &Sample<T>) -> T {
    let (left, right) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let width = right - left;
    let margin = T::lit(0.1) * width;
    let mid = left + T::lit(0.5) * width;
    let d1 = a.slope + b.slope - T::lit(3.0) * (a.delta - b.delta) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !disc.is_finite() || disc < T::zero() || !b.slope.is_finite() {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + T::lit(2.0) * d2;
    if denom == T::zero() {
        return mid;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    if !t.is_finite() {
        return mid;
    }
    t.max(left + margin).min(right - margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backtracking_sequence_is_geometric() {
        let mut seen = Vec::new();
        let step = backtracking(
            |a: f64| {
                seen.push(a);
                if a < 0.6 { -1.0 } else { 1.0 }
            },
            0.8,
            100,
        )
        .unwrap();
        assert_eq!(seen.len(), 4);
        for (i, a) in seen.iter().enumerate() {
            assert!((a - 0.8f64.powi(i as i32)).abs() < 1e-15);
        }
        assert_eq!(step.trials, 4);
        assert!((step.alpha - 0.512).abs() < 1e-15);
    }

    #[test]
    fn backtracking_accepts_exact_quadratic_newton_step() {
        // f(t) = ½(t − 3)², from 0 along the Newton direction d = 3.
        let phi = |a: f64| 0.5 * (3.0 * a - 3.0).powi(2) - 4.5;
        let step = backtracking(phi, 0.8, 100).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.trials, 1);
    }

    #[test]
    fn backtracking_reports_failure() {
        assert!(backtracking(|_a: f64| 1.0, 0.8, 10).is_err());
    }

    #[test]
    fn wolfe_accepts_unit_step_on_exact_minimizer() {
        // f(t) = ½t² from t = 1 along d = −1.
        let phi = |a: f64| (0.5 * (1.0 - a).powi(2) - 0.5, -(1.0 - a));
        let s = strong_wolfe(phi, -1.0, 1.0, &WolfeParams::default()).unwrap();
        assert_eq!(s.step.alpha, 1.0);
        assert_eq!(s.step.trials, 1);
    }

    #[test]
    fn wolfe_extends_steps_longer_than_one() {
        // f(t) = ½(t − 100)² from 0 along d = 1: the minimizer is at α = 100.
        let phi = |a: f64| (0.5 * (a - 100.0).powi(2) - 5000.0, a - 100.0);
        let s = strong_wolfe(phi, -100.0, 1.0, &WolfeParams::default()).unwrap();
        assert!(s.step.alpha > 1.0);
        assert!(s.slope.abs() <= 0.9 * 100.0);
    }

    #[test]
    fn wolfe_rejects_ascent_direction() {
        assert!(strong_wolfe(|a: f64| (a, 1.0), 1.0, 1.0, &WolfeParams::default()).is_err());
    }
}
