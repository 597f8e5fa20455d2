//! Newton's method with the Hessian inverted through a `K×K` system.

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::model::ReducedModel;
use crate::objective::{Objective, Point, Problem};
use crate::scalar::Scalar;
use crate::solver::{drive, DirectionRule, Proposal, SolverConfig, SolverResult};

/// Below this value the rank-one denominator `1 − vᵀH⁻¹v` is treated as a
/// numerical breakdown and the solver takes a `1/L` gradient step instead.
pub const DENOMINATOR_GUARD: f64 = 1e-14;

/// Newton direction `d = −(∇²E)⁻¹∇E` for `∇²E = H − vvᵀ`,
/// `H = λI + Ā_kᵀ diag(p) Ā_k`, `v = Ā_kᵀp`.
///
/// With `s = √p` and `M = diag(s)·Ā_kĀ_kᵀ·diag(s) + λI` (symmetric positive
/// definite even when some `p_i` underflow to zero):
///
/// * `H⁻¹g = (g − Ā_kᵀ diag(s) M⁻¹ diag(s) Ā_k g) / λ`
/// * `H⁻¹v = Ā_kᵀ diag(s) M⁻¹ s`
/// * `1 − vᵀH⁻¹v = λ sᵀM⁻¹s`
///
/// so the Sherman–Morrison correction needs one Cholesky factorization of
/// `M`, two triangular solve pairs and two `O(KD)` products.
pub fn newton_direction<T: Scalar>(reduced: &ReducedModel<T>, lambda: T, probs: &[T], grad: &[T]) -> Result<Vec<T>> {
    newton_step(reduced, lambda, probs, grad).map(|(d, _)| d)
}

/// Newton direction `d` and its image `Ā_k d`. With `d = −(g + Ā_kᵀc)/λ` the
/// image is `−(Ā_k g + G c)/λ`, which reuses `Ā_k g` and costs `O(K²)`.
fn newton_step<T: Scalar>(reduced: &ReducedModel<T>, lambda: T, probs: &[T], grad: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let k = reduced.classes();
    let a_bar = reduced.a_bar();
    let gram = reduced.gram();
    let s: Vec<T> = probs.iter().map(|&p| p.max(T::zero()).sqrt()).collect();

    let mut m = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = s[i] * gram.get(i, j) * s[j];
            m.set(i, j, v);
            m.set(j, i, v);
        }
        m.set(i, i, m.get(i, i) + lambda);
    }
    let chol = Cholesky::factor(&m)?;

    let c = a_bar.mul_vec(grad);
    let sc: Vec<T> = s.iter().zip(&c).map(|(&si, &ci)| si * ci).collect();
    let y = chol.solve(&sc);
    let u = chol.solve(&s);

    let su = dot(&s, &u);
    let denom = lambda * su;
    if !(denom > T::lit(DENOMINATOR_GUARD)) {
        return Err(Error::Breakdown(denom.to_f64_lossy()));
    }
    // λβ with β = vᵀH⁻¹g / (1 − vᵀH⁻¹v)
    let lambda_beta = dot(&u, &sc) / su;
    let coeff: Vec<T> = (0..k).map(|i| s[i] * (lambda_beta * u[i] - y[i])).collect();
    let mut d = a_bar.tr_mul_vec(&coeff);
    let inv_lambda = T::one() / lambda;
    for (di, &gi) in d.iter_mut().zip(grad) {
        *di = -(gi + *di) * inv_lambda;
    }
    let gc = gram.mul_vec(&coeff);
    let image = c.iter().zip(&gc).map(|(&ci, &gi)| -(ci + gi) * inv_lambda).collect();
    Ok((d, image))
}

struct NewtonRule;

impl<T: Scalar> DirectionRule<T> for NewtonRule {
    fn propose(&mut self, obj: &Objective<'_, T>, point: &Point<T>, grad: &[T]) -> Result<Proposal<T>> {
        match newton_step(obj.reduced(), obj.lambda(), &point.probs, grad) {
            Ok((d, w)) => Ok(Proposal::Imaged(d, w)),
            Err(Error::Breakdown(_)) => Ok(Proposal::GradientFallback),
            Err(e) => Err(e),
        }
    }
}

/// Minimizes `E` by Newton's method from `x0`.
///
/// Stops when `‖∇E‖ < grad_tol` or after `max_iter` steps; in the latter case
/// the result is returned with `converged = false`.
pub fn solve_newton<T: Scalar>(
    reduced: &ReducedModel<T>,
    problem: &Problem<T>,
    x0: &[T],
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    let obj = Objective::new(reduced, problem)?;
    drive(&obj, x0, cfg, &mut NewtonRule)
}

/// [`solve_newton`] started from the source instance.
pub fn solve_newton_from_source<T: Scalar>(
    reduced: &ReducedModel<T>,
    problem: &Problem<T>,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    solve_newton(reduced, problem, &problem.source, cfg)
}
