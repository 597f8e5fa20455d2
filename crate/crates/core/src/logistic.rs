//! Closed-form minimizer for binary (logistic) models.
//!
//! With class 1 as the target, `p₁(x) = 1/(1 + exp(wᵀx + w0))` and the
//! minimizer of `(λ/2)‖x − x̄‖² − ln p₁(x)` lies on the ray from `x̄` along
//! `−w`: `x* = x̄ − (1 − p₁*)w/λ` where `p₁* = φ(α, β)` is the root of the
//! scalar equation `t = 1/(1 + exp(αt + β))`.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{sigmoid, LogisticModel};
use crate::scalar::Scalar;

/// Default absolute tolerance on the residual `h(t)`.
pub const PHI_TOL: f64 = 1e-14;
/// Bracket endpoints are nudged inward by this amount for evaluation.
pub const BRACKET_EPS: f64 = 1e-300;
const PHI_MAX_ITER: usize = 200;

/// Arguments of `φ(α, β)`; requires `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiQuery<T> {
    pub alpha: T,
    pub beta: T,
}

/// Root found by [`phi_with_stats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRoot<T> {
    pub t: T,
    pub residual: T,
    pub iterations: usize,
    pub bisections: usize,
}

/// `φ(α, β)`: the unique `t ∈ (0, 1)` with `t = 1/(1 + exp(αt + β))`.
pub fn phi<T: Scalar>(q: PhiQuery<T>, tol: T) -> Result<T> {
    phi_with_stats(q, tol).map(|r| r.t)
}

/// Safeguarded Newton on `h(t) = t − 1/(1 + exp(αt + β))`, which is strictly
/// increasing with `h(0) < 0 < h(1)`. A bisection step replaces any Newton
/// step that leaves the current bracket.
pub fn phi_with_stats<T: Scalar>(q: PhiQuery<T>, tol: T) -> Result<PhiRoot<T>> {
    let PhiQuery { alpha, beta } = q;
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidProblem(format!("phi requires alpha > 0, got {alpha}")));
    }
    if !beta.is_finite() {
        return Err(Error::NonFinite("phi beta"));
    }
    let eps = T::lit(BRACKET_EPS).max(T::min_positive_value());
    let (mut lo, mut hi) = (eps, T::one() - T::epsilon());
    // s(t) = 1/(1 + exp(αt + β)), h'(t) = 1 + α s (1 − s)
    let eval = |t: T| {
        let s = sigmoid(-(alpha * t + beta));
        (t - s, T::one() + alpha * s * (T::one() - s))
    };
    // Start at the root of the linearization around the bracket midpoint.
    let mut t = sigmoid(-(T::lit(0.5) * alpha + beta)).max(lo).min(hi);
    let mut bisections = 0;
    for iterations in 1..=PHI_MAX_ITER {
        let (h, dh) = eval(t);
        if h.abs() < tol {
            return Ok(PhiRoot { t, residual: h, iterations, bisections });
        }
        if h < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - h / dh;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            bisections += 1;
            T::lit(0.5) * (lo + hi)
        };
        if next == t || hi - lo <= T::epsilon() * hi {
            let (h_next, _) = eval(next);
            return Ok(PhiRoot { t: next, residual: h_next, iterations, bisections });
        }
        t = next;
    }
    let (h, _) = eval(t);
    Ok(PhiRoot { t, residual: h, iterations: PHI_MAX_ITER, bisections })
}

/// Closed-form solution for a binary model with class 1 (probability
/// `p₁`) as the target.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSolution<T> {
    pub x_star: Vec<T>,
    /// `p₁(x*)`
    pub p_target: T,
    pub alpha: T,
    pub beta: T,
}

/// `x* = x̄ − (1 − p₁*)w/λ` with `p₁* = φ(‖w‖²/λ, wᵀx̄ + w0 − ‖w‖²/λ)`.
///
/// `O(D)`: two dot products and one vector update. When `w = 0` the
/// gradient is `λ(x − x̄)` and the solution is `x̄` itself.
pub fn solve_logistic<T: Scalar>(lm: &LogisticModel<T>, source: &[T], lambda: T) -> Result<LogisticSolution<T>> {
    if source.len() != lm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} features, model expects {}",
            source.len(),
            lm.dim()
        )));
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidProblem(format!("lambda must be positive, got {lambda}")));
    }
    let ww = dot(&lm.w, &lm.w);
    let margin = dot(&lm.w, source) + lm.w0;
    if ww == T::zero() {
        return Ok(LogisticSolution {
            x_star: source.to_vec(),
            p_target: sigmoid(-lm.w0),
            alpha: T::zero(),
            beta: margin,
        });
    }
    let alpha = ww / lambda;
    let beta = margin - alpha;
    let p = phi(PhiQuery { alpha, beta }, T::lit(PHI_TOL))?;
    let coef = (T::one() - p) / lambda;
    let x_star = source.iter().zip(&lm.w).map(|(&s, &w)| s - coef * w).collect();
    Ok(LogisticSolution { x_star, p_target: p, alpha, beta })
}

/// `∇E = λ(x − x̄) + (1 − p₁(x))w`
pub fn logistic_gradient<T: Scalar>(lm: &LogisticModel<T>, source: &[T], lambda: T, x: &[T]) -> Vec<T> {
    let q = T::one() - lm.prob_target(x);
    x.iter().zip(source).zip(&lm.w).map(|((&xi, &si), &wi)| lambda * (xi - si) + q * wi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn symmetric_root_is_one_half() {
        for &a in &[1e-6f64, 0.3, 1.0, 17.0, 1e6] {
            let t = phi(PhiQuery { alpha: a, beta: -a / 2.0 }, 1e-14).unwrap();
            assert!((t - 0.5).abs() < 1e-13, "alpha={a} t={t}");
        }
    }

    #[test]
    fn rejects_non_positive_alpha() {
        assert!(phi(PhiQuery { alpha: 0.0, beta: 1.0 }, 1e-14).is_err());
        assert!(phi(PhiQuery { alpha: -1.0, beta: 1.0 }, 1e-14).is_err());
    }

    #[test]
    fn extreme_beta_stays_in_open_interval() {
        for &b in &[-1e4, -800.0, 800.0, 1e4] {
            let r = phi_with_stats(PhiQuery { alpha: 2.0, beta: b }, 1e-14).unwrap();
            assert!(r.t > 0.0 && r.t < 1.0);
            assert!(r.iterations <= 60, "beta={b} took {}", r.iterations);
        }
    }

    #[test]
    fn zero_weights_return_source() {
        let lm = LogisticModel::new(vec![0.0, 0.0], 0.7).unwrap();
        let s = solve_logistic(&lm, &[1.0, 2.0], 0.5).unwrap();
        assert_eq!(s.x_star, vec![1.0, 2.0]);
        assert!((s.p_target - 1.0 / (1.0 + 0.7f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn huge_lambda_barely_moves() {
        let lm = LogisticModel::new(vec![3.0, -4.0], 0.2).unwrap();
        let src = [0.5, 0.5];
        let s = solve_logistic(&lm, &src, 1e9).unwrap();
        let dx: Vec<f64> = s.x_star.iter().zip(&src).map(|(a, b)| a - b).collect();
        assert!(norm(&dx) <= 5.0 / 1e9);
    }

    #[test]
    fn stationary_at_solution() {
        let lm = LogisticModel::new(vec![1.5, -0.5, 2.0], -0.3).unwrap();
        let src = [0.2, 0.1, 0.4];
        let s = solve_logistic(&lm, &src, 0.05).unwrap();
        let g = logistic_gradient(&lm, &src, 0.05, &s.x_star);
        assert!(norm(&g) < 1e-10 * (1.0 + norm(&lm.w)));
    }
}
