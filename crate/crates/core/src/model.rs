//! Classifier parameters, stable softmax evaluation and target-class reduction.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, norm, Matrix};
use crate::scalar::Scalar;

/// Relative tolerance of the power iteration for `‖Ā_k‖²`.
pub const POWER_ITER_TOL: f64 = 1e-10;
/// Iteration cap of the power iteration for `‖Ā_k‖²`.
pub const POWER_ITER_MAX: usize = 10_000;

/// A fixed linear softmax classifier `p(x) = softmax(Ax + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel<T> {
    weights: Matrix<T>,
    biases: Vec<T>,
}

impl<T: Scalar> SoftmaxModel<T> {
    /// Validates and wraps a `K×D` weight matrix and `K` biases.
    pub fn new(weights: Matrix<T>, biases: Vec<T>) -> Result<Self> {
        if weights.rows() != biases.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weight rows but {} biases",
                weights.rows(),
                biases.len()
            )));
        }
        if weights.rows() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 classes, got {}",
                weights.rows()
            )));
        }
        if weights.cols() < 1 {
            return Err(Error::DimensionMismatch("feature dimension must be at least 1".into()));
        }
        if !weights.is_finite() {
            return Err(Error::NonFinite("weights"));
        }
        if !all_finite(&biases) {
            return Err(Error::NonFinite("biases"));
        }
        Ok(Self { weights, biases })
    }

    pub fn from_rows(rows: &[Vec<T>], biases: Vec<T>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, biases)
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    /// `z = Ax + b`
    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut z = self.weights.mul_vec(x);
        for (zi, &bi) in z.iter_mut().zip(&self.biases) {
            *zi = *zi + bi;
        }
        Ok(z)
    }

    /// Logits, probabilities and `g_i = -ln p_i`, all from max-shifted logits.
    pub fn softmax_eval(&self, x: &[T]) -> Result<SoftmaxEval<T>> {
        let logits = self.logits(x)?;
        let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
        if !m.is_finite() {
            return Err(Error::NonFinite("logits"));
        }
        let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
        let s: T = e.iter().copied().sum();
        let ln_s = s.ln();
        let neg_log_probs = logits.iter().map(|&z| ln_s - (z - m)).collect();
        let probs = e.iter().map(|&v| v / s).collect();
        Ok(SoftmaxEval { logits, probs, neg_log_probs })
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        let z = self.logits(x)?;
        Ok(argmax(&z))
    }

    /// Builds the quantities for target class `k` (0-based).
    pub fn reduce(&self, k: usize) -> Result<ReducedModel<T>> {
        ReducedModel::new(self, k)
    }

    /// Binary model as logistic regression with class 0 as the target:
    /// `w = a₂ − a₁`, `w0 = b₂ − b₁`.
    pub fn to_logistic(&self) -> Result<LogisticModel<T>> {
        if self.classes() != 2 {
            return Err(Error::NotBinary(self.classes()));
        }
        let w = self
            .weights
            .row(1)
            .iter()
            .zip(self.weights.row(0))
            .map(|(&a2, &a1)| a2 - a1)
            .collect();
        LogisticModel::new(w, self.biases[1] - self.biases[0])
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("instance"));
        }
        Ok(())
    }
}

/// Output of [`SoftmaxModel::softmax_eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxEval<T> {
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    pub neg_log_probs: Vec<T>,
}

/// `ln Σ exp(z_i)` with the maximum factored out.
pub fn log_sum_exp<T: Scalar>(z: &[T]) -> T {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = z.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Target-class reduced model: `Ā_k = A − 1·a_kᵀ`, `b̄_k = b − b_k·1`, the
/// Gram matrix `Ā_kĀ_kᵀ` and its largest eigenvalue `‖Ā_k‖²`.
///
/// Built once per `(model, k)` at `O(DK²)` cost and shared read-only by any
/// number of solves.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel<T> {
    target_class: usize,
    a_bar: Matrix<T>,
    b_bar: Vec<T>,
    gram: Matrix<T>,
    spec_norm_sq: T,
}

impl<T: Scalar> ReducedModel<T> {
    pub fn new(model: &SoftmaxModel<T>, k: usize) -> Result<Self> {
        let classes = model.classes();
        if k >= classes {
            return Err(Error::ClassOutOfRange { index: k, classes });
        }
        let a = model.weights();
        let a_k = a.row(k).to_vec();
        let mut a_bar = a.clone();
        for i in 0..classes {
            if i == k {
                a_bar.row_mut(i).fill(T::zero());
            } else {
                for (v, &ak) in a_bar.row_mut(i).iter_mut().zip(&a_k) {
                    *v = *v - ak;
                }
            }
        }
        let b_k = model.biases()[k];
        let b_bar = model
            .biases()
            .iter()
            .enumerate()
            .map(|(i, &b)| if i == k { T::zero() } else { b - b_k })
            .collect();

        let mut gram = Matrix::zeros(classes, classes);
        for i in 0..classes {
            for j in 0..=i {
                let g = if i == k || j == k { T::zero() } else { dot(a_bar.row(i), a_bar.row(j)) };
                gram.set(i, j, g);
                gram.set(j, i, g);
            }
        }
        let spec_norm_sq = largest_eigenvalue_psd(&gram, T::lit(POWER_ITER_TOL), POWER_ITER_MAX);
        Ok(Self { target_class: k, a_bar, b_bar, gram, spec_norm_sq })
    }

    #[inline]
    pub fn target_class(&self) -> usize {
        self.target_class
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.a_bar.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a_bar.cols()
    }

    pub fn a_bar(&self) -> &Matrix<T> {
        &self.a_bar
    }

    pub fn b_bar(&self) -> &[T] {
        &self.b_bar
    }

    pub fn gram(&self) -> &Matrix<T> {
        &self.gram
    }

    /// `‖Ā_k‖²`
    pub fn spec_norm_sq(&self) -> T {
        self.spec_norm_sq
    }

    /// Reduced logits `z̄ = Ā_k x + b̄_k = z − z_k·1`; entry `k` is zero.
    pub fn reduced_logits(&self, x: &[T]) -> Vec<T> {
        let mut z = self.a_bar.mul_vec(x);
        for (zi, &bi) in z.iter_mut().zip(&self.b_bar) {
            *zi = *zi + bi;
        }
        z
    }
}

/// Largest eigenvalue of a symmetric positive-semidefinite matrix by power
/// iteration, stopped when the Rayleigh quotient changes by less than `tol`
/// relative. The result is clamped below by the largest diagonal entry.
pub fn largest_eigenvalue_psd<T: Scalar>(m: &Matrix<T>, tol: T, max_iter: usize) -> T {
    let n = m.rows();
    let max_diag = (0..n).map(|i| m.get(i, i)).fold(T::zero(), T::max);
    if max_diag <= T::zero() {
        return T::zero();
    }
    // Start from a mix of all columns weighted unevenly so that the start is
    // not orthogonal to the dominant eigenvector for structured inputs.
    let weights: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.37 * ((i + 1) as f64).sqrt())).collect();
    let mut v = m.mul_vec(&weights);
    let nv = norm(&v);
    if nv <= T::zero() {
        return max_diag;
    }
    v.iter_mut().for_each(|x| *x = *x / nv);
    let mut rq = T::zero();
    for _ in 0..max_iter {
        let w = m.mul_vec(&v);
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw <= T::zero() {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (next - rq).abs() <= tol * next.abs();
        rq = next;
        if done {
            break;
        }
    }
    rq.max(max_diag)
}

/// Binary logistic regression `p₁(x) = 1/(1 + exp(wᵀx + w0))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    pub w: Vec<T>,
    pub w0: T,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn new(w: Vec<T>, w0: T) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::DimensionMismatch("empty weight vector".into()));
        }
        if !all_finite(&w) || !w0.is_finite() {
            return Err(Error::NonFinite("logistic parameters"));
        }
        Ok(Self { w, w0 })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// The same classifier with the roles of the two classes swapped.
    pub fn flipped(&self) -> Self {
        Self { w: self.w.iter().map(|&v| -v).collect(), w0: -self.w0 }
    }

    /// `p₁(x)`, evaluated without overflow.
    pub fn prob_target(&self, x: &[T]) -> T {
        sigmoid(-(dot(&self.w, x) + self.w0))
    }
}

/// `1/(1 + exp(-u))` without overflow for either sign of `u`.
pub fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}
