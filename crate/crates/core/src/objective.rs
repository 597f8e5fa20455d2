//! The inverse-classification objective
//! `E(x; λ, k) = (λ/2)‖x − x̄‖² + g_k(x)` with `g_k = −ln p_k`.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, dot, Matrix};
use crate::model::{log_sum_exp, ReducedModel, SoftmaxModel};
use crate::scalar::Scalar;

/// One inverse-classification instance: source `x̄`, target class `k`
/// (0-based) and trade-off `λ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    pub source: Vec<T>,
    pub target_class: usize,
    pub lambda: T,
}

impl<T: Scalar> Problem<T> {
    pub fn new(source: Vec<T>, target_class: usize, lambda: T) -> Result<Self> {
        let p = Self { source, target_class, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidProblem(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !all_finite(&self.source) {
            return Err(Error::NonFinite("source instance"));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// Objective value and softmax state at a point, reused by the solvers.
#[derive(Debug, Clone)]
pub struct Point<T> {
    pub x: Vec<T>,
    pub value: T,
    /// `ln p_i(x)`, finite even where `p_i` underflows.
    pub log_probs: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> Point<T> {
    /// `g_k(x) = −ln p_k(x)`
    pub fn target_neg_log_prob(&self, k: usize) -> T {
        -self.log_probs[k]
    }
}

/// `E` bound to a reduced model and a problem.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a, T> {
    reduced: &'a ReducedModel<T>,
    problem: &'a Problem<T>,
}

impl<'a, T: Scalar> Objective<'a, T> {
    pub fn new(reduced: &'a ReducedModel<T>, problem: &'a Problem<T>) -> Result<Self> {
        problem.validate()?;
        if problem.target_class != reduced.target_class() {
            return Err(Error::InvalidProblem(format!(
                "problem targets class {} but the model was reduced for class {}",
                problem.target_class,
                reduced.target_class()
            )));
        }
        if problem.source.len() != reduced.dim() {
            return Err(Error::DimensionMismatch(format!(
                "source has {} features, model expects {}",
                problem.source.len(),
                reduced.dim()
            )));
        }
        Ok(Self { reduced, problem })
    }

    pub fn reduced(&self) -> &'a ReducedModel<T> {
        self.reduced
    }

    pub fn problem(&self) -> &'a Problem<T> {
        self.problem
    }

    pub fn lambda(&self) -> T {
        self.problem.lambda
    }

    pub fn dim(&self) -> usize {
        self.reduced.dim()
    }

    /// Evaluates `E(x)` and the softmax probabilities at `x`.
    ///
    /// `g_k` is the log-sum-exp of the reduced logits (whose entry `k` is 0),
    /// so `E` stays accurate when `p_k` underflows.
    pub fn eval(&self, x: &[T]) -> Result<Point<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("point has {} entries, expected {}", x.len(), self.dim())));
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("iterate"));
        }
        let z = self.reduced.reduced_logits(x);
        let lse = log_sum_exp(&z);
        let log_probs: Vec<T> = z.iter().map(|&zi| zi - lse).collect();
        let probs = log_probs.iter().map(|&l| l.exp()).collect();
        let value = self.quadratic(x) + lse;
        if !value.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        Ok(Point { x: x.to_vec(), value, log_probs, probs })
    }

    /// `(λ/2)‖x − x̄‖²`
    pub fn quadratic(&self, x: &[T]) -> T {
        let d2: T = x.iter().zip(&self.problem.source).map(|(&a, &b)| (a - b) * (a - b)).sum();
        T::lit(0.5) * self.problem.lambda * d2
    }

    /// `∇E = λ(x − x̄) + Ā_kᵀp`
    pub fn gradient(&self, x: &[T], probs: &[T]) -> Vec<T> {
        let mut g = self.reduced.a_bar().tr_mul_vec(probs);
        let lambda = self.problem.lambda;
        for ((gi, &xi), &si) in g.iter_mut().zip(x).zip(&self.problem.source) {
            *gi = *gi + lambda * (xi - si);
        }
        g
    }

    pub fn gradient_at(&self, point: &Point<T>) -> Vec<T> {
        self.gradient(&point.x, &point.probs)
    }

    /// `(λI + Ā_kᵀ(diag p − ppᵀ)Ā_k) u` in `O(KD)` without forming a `D×D` matrix.
    pub fn hessian_matvec(&self, probs: &[T], u: &[T]) -> Vec<T> {
        let a_bar = self.reduced.a_bar();
        let s = a_bar.mul_vec(u);
        let ps = dot(probs, &s);
        let t: Vec<T> = probs.iter().zip(&s).map(|(&p, &si)| p * (si - ps)).collect();
        let mut out = a_bar.tr_mul_vec(&t);
        axpy(self.problem.lambda, u, &mut out);
        out
    }

    /// Lipschitz constant of `∇E`: `L = λ + ‖Ā_k‖²`.
    pub fn lipschitz_bound(&self) -> T {
        self.problem.lambda + self.reduced.spec_norm_sq()
    }

    /// Restricts `E` to the line `x + αd`. Building the restriction costs one
    /// `Ā_k d` product; afterwards value changes and slopes cost `O(K)`.
    pub fn ray(&self, point: &Point<T>, direction: &[T]) -> Ray<T> {
        self.ray_with_image(point, direction, self.reduced.a_bar().mul_vec(direction))
    }

    /// [`Objective::ray`] with `w = Ā_k d` supplied by the caller.
    pub fn ray_with_image(&self, point: &Point<T>, direction: &[T], w: Vec<T>) -> Ray<T> {
        assert_eq!(w.len(), self.reduced.classes(), "image length must equal K");
        let rd = point
            .x
            .iter()
            .zip(&self.problem.source)
            .zip(direction)
            .map(|((&x, &s), &d)| (x - s) * d)
            .sum();
        Ray {
            lambda: self.problem.lambda,
            rd,
            dd: dot(direction, direction),
            w,
            log_probs: point.log_probs.clone(),
            probs: point.probs.clone(),
        }
    }
}

/// `φ(α) = E(x + αd)` relative to `E(x)`, computed from the logit-space
/// direction `w = Ā_k d` so that tiny changes are resolved below the
/// rounding level of `E` itself.
#[derive(Debug, Clone)]
pub struct Ray<T> {
    lambda: T,
    rd: T,
    dd: T,
    w: Vec<T>,
    log_probs: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> Ray<T> {
    /// `φ'(0) = ∇E(x)ᵀd`
    pub fn initial_slope(&self) -> T {
        self.lambda * self.rd + dot(&self.probs, &self.w)
    }

    /// `E(x + αd) − E(x)`
    pub fn delta(&self, alpha: T) -> T {
        let quad = self.lambda * alpha * (self.rd + T::lit(0.5) * alpha * self.dd);
        quad + self.log_partition_change(alpha)
    }

    /// `∇E(x + αd)ᵀd`
    pub fn slope(&self, alpha: T) -> T {
        let shifted: Vec<T> = self.log_probs.iter().zip(&self.w).map(|(&l, &w)| l + alpha * w).collect();
        let lse = log_sum_exp(&shifted);
        let pw: T = shifted.iter().zip(&self.w).map(|(&s, &w)| (s - lse).exp() * w).sum();
        self.lambda * (self.rd + alpha * self.dd) + pw
    }

    pub fn delta_and_slope(&self, alpha: T) -> (T, T) {
        (self.delta(alpha), self.slope(alpha))
    }

    /// `ln Σ p_i exp(α w_i)`
    fn log_partition_change(&self, alpha: T) -> T {
        let max_step = self.w.iter().fold(T::zero(), |m, &w| m.max((alpha * w).abs()));
        if max_step <= T::lit(0.5) {
            let s: T = self.probs.iter().zip(&self.w).map(|(&p, &w)| p * (alpha * w).exp_m1()).sum();
            s.ln_1p()
        } else {
            let shifted: Vec<T> = self.log_probs.iter().zip(&self.w).map(|(&l, &w)| l + alpha * w).collect();
            log_sum_exp(&shifted)
        }
    }
}

/// Dense `D×D` Hessian, for diagnostics and small problems only.
pub fn dense_hessian<T: Scalar>(reduced: &ReducedModel<T>, lambda: T, probs: &[T]) -> Matrix<T> {
    let d = reduced.dim();
    let a = reduced.a_bar();
    let v = a.tr_mul_vec(probs);
    let mut h = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut s = -v[i] * v[j];
            for (c, &p) in probs.iter().enumerate() {
                s = s + p * a.get(c, i) * a.get(c, j);
            }
            if i == j {
                s = s + lambda;
            }
            h.set(i, j, s);
        }
    }
    h
}

/// `p_k` recovered from the objective value: `exp((λ/2)‖x − x̄‖² − E)`.
pub fn prob_from_objective<T: Scalar>(obj: &Objective<'_, T>, x: &[T], value: T) -> T {
    (obj.quadratic(x) - value).exp()
}

/// Convenience: `E(x)` for an unreduced model, evaluated directly from the
/// full logits.
pub fn eval_objective<T: Scalar>(model: &SoftmaxModel<T>, problem: &Problem<T>, x: &[T]) -> Result<(T, Vec<T>)> {
    problem.validate()?;
    if problem.target_class >= model.classes() {
        return Err(Error::ClassOutOfRange { index: problem.target_class, classes: model.classes() });
    }
    let e = model.softmax_eval(x)?;
    let d2: T = x.iter().zip(&problem.source).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((T::lit(0.5) * problem.lambda * d2 + e.neg_log_probs[problem.target_class], e.probs))
}
