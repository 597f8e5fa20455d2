//! First-order and quasi-Newton comparison methods: gradient descent,
//! Polak–Ribière conjugate gradient, L-BFGS and dense BFGS.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line_search::LineSearch;
use crate::linalg::{dot, Matrix};
use crate::model::ReducedModel;
use crate::newton::solve_newton;
use crate::objective::{Objective, Point, Problem};
use crate::scalar::Scalar;
use crate::solver::{drive, DirectionRule, Proposal, SolverConfig, SolverResult};

/// Largest dimension accepted by dense BFGS, whose inverse-Hessian
/// approximation takes `D²` scalars.
pub const BFGS_MAX_DIM: usize = 10_000;

/// Optimization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Gd,
    Cg,
    Lbfgs,
    Bfgs,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Newton, Method::Gd, Method::Cg, Method::Lbfgs, Method::Bfgs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Newton => "newton",
            Self::Gd => "gd",
            Self::Cg => "cg",
            Self::Lbfgs => "lbfgs",
            Self::Bfgs => "bfgs",
        }
    }

    /// Line search each method uses unless told otherwise: backtracking for
    /// Newton, BFGS and L-BFGS; Wolfe for GD and CG.
    pub fn default_line_search(self) -> LineSearch {
        match self {
            Self::Newton | Self::Lbfgs | Self::Bfgs => LineSearch::Backtracking,
            Self::Gd | Self::Cg => LineSearch::Wolfe,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(Self::Newton),
            "gd" => Ok(Self::Gd),
            "cg" | "cg_pr" => Ok(Self::Cg),
            "lbfgs" => Ok(Self::Lbfgs),
            "bfgs" => Ok(Self::Bfgs),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Method choice plus its settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: Method,
    pub lbfgs_memory: usize,
    pub solver: SolverConfig,
}

impl BaselineConfig {
    /// Defaults for `method`, including its preferred line search.
    pub fn new(method: Method) -> Self {
        Self {
            method,
            lbfgs_memory: 4,
            solver: SolverConfig::default().with_line_search(method.default_line_search()),
        }
    }

    pub fn with_line_search(mut self, ls: LineSearch) -> Self {
        self.solver.line_search = ls;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.lbfgs_memory == 0 {
            return Err(Error::InvalidConfig("L-BFGS memory must be positive".into()));
        }
        Ok(())
    }
}

/// Runs the configured method; `Method::Newton` delegates to
/// [`solve_newton`].
pub fn solve_baseline<T: Scalar>(
    reduced: &ReducedModel<T>,
    problem: &Problem<T>,
    x0: &[T],
    cfg: &BaselineConfig,
) -> Result<SolverResult<T>> {
    cfg.validate()?;
    let obj = Objective::new(reduced, problem)?;
    let lambda = problem.lambda;
    match cfg.method {
        Method::Newton => solve_newton(reduced, problem, x0, &cfg.solver),
        Method::Gd => drive(&obj, x0, &cfg.solver, &mut GradientDescent::default()),
        Method::Cg => drive(&obj, x0, &cfg.solver, &mut PolakRibiere::default()),
        Method::Lbfgs => drive(&obj, x0, &cfg.solver, &mut Lbfgs::new(cfg.lbfgs_memory, lambda)),
        Method::Bfgs => {
            if obj.dim() > BFGS_MAX_DIM {
                return Err(Error::InvalidConfig(format!(
                    "dense BFGS needs a {0}x{0} matrix; limited to D <= {BFGS_MAX_DIM}",
                    obj.dim()
                )));
            }
            drive(&obj, x0, &cfg.solver, &mut Bfgs::new(obj.dim(), lambda))
        }
    }
}

fn negated<T: Scalar>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| -x).collect()
}

/// Wolfe initial step carried over from the previous iteration's
/// `α·∇Eᵀd`, so first-order methods start near the last accepted length.
#[derive(Default)]
struct StepMemory<T> {
    last: Option<(T, T)>,
}

impl<T: Scalar> StepMemory<T> {
    fn initial(&self, slope0: T) -> T {
        match self.last {
            Some((alpha, slope)) if slope0 < T::zero() => {
                let a = alpha * slope / slope0;
                if a.is_finite() && a > T::zero() { a } else { T::one() }
            }
            _ => T::one(),
        }
    }
}

#[derive(Default)]
struct GradientDescent<T> {
    steps: StepMemory<T>,
}

impl<T: Scalar> DirectionRule<T> for GradientDescent<T> {
    fn propose(&mut self, _obj: &Objective<'_, T>, _point: &Point<T>, grad: &[T]) -> Result<Proposal<T>> {
        Ok(Proposal::Direction(negated(grad)))
    }

    fn initial_step(&self, slope0: T) -> T {
        self.steps.initial(slope0)
    }

    fn update(&mut self, _s: &[T], _y: &[T], _g: &[T], alpha: T, slope0: T) {
        self.steps.last = Some((alpha, slope0));
    }
}

/// Polak–Ribière CG, restarting with steepest descent whenever `β < 0` or
/// the combined direction is not a descent direction.
#[derive(Default)]
struct PolakRibiere<T> {
    prev: Option<(Vec<T>, Vec<T>)>,
    steps: StepMemory<T>,
}

impl<T: Scalar> DirectionRule<T> for PolakRibiere<T> {
    fn propose(&mut self, _obj: &Objective<'_, T>, _point: &Point<T>, grad: &[T]) -> Result<Proposal<T>> {
        let mut d = negated(grad);
        if let Some((g_old, d_old)) = &self.prev {
            let gg = dot(g_old, g_old);
            let beta = grad.iter().zip(g_old).map(|(&g, &go)| g * (g - go)).sum::<T>() / gg;
            if beta > T::zero() && beta.is_finite() {
                for (di, &dold) in d.iter_mut().zip(d_old) {
                    *di = *di + beta * dold;
                }
                if dot(&d, grad) >= T::zero() {
                    d = negated(grad);
                }
            }
        }
        self.prev = Some((grad.to_vec(), d.clone()));
        Ok(Proposal::Direction(d))
    }

    fn initial_step(&self, slope0: T) -> T {
        self.steps.initial(slope0)
    }

    fn update(&mut self, _s: &[T], _y: &[T], _g: &[T], alpha: T, slope0: T) {
        self.steps.last = Some((alpha, slope0));
    }

    fn reset(&mut self) {
        self.prev = None;
    }
}

/// Limited-memory BFGS, two-loop recursion over the last `m` pairs.
struct Lbfgs<T> {
    memory: usize,
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
    initial_scale: T,
}

impl<T: Scalar> Lbfgs<T> {
    fn new(memory: usize, lambda: T) -> Self {
        Self { memory, pairs: VecDeque::with_capacity(memory), initial_scale: T::one() / lambda }
    }
}

impl<T: Scalar> DirectionRule<T> for Lbfgs<T> {
    fn propose(&mut self, _obj: &Objective<'_, T>, _point: &Point<T>, grad: &[T]) -> Result<Proposal<T>> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi = *qi - a * yi;
            }
            alphas.push(a);
        }
        let gamma = match self.pairs.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => self.initial_scale,
        };
        q.iter_mut().for_each(|v| *v = *v * gamma);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &q);
            for (qi, &si) in q.iter_mut().zip(s) {
                *qi = *qi + (a - b) * si;
            }
        }
        Ok(Proposal::Direction(negated(&q)))
    }

    fn update(&mut self, s: &[T], y: &[T], _g: &[T], _alpha: T, _slope0: T) {
        let sy = dot(s, y);
        if !(sy > T::zero()) {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s.to_vec(), y.to_vec(), T::one() / sy));
    }

    fn reset(&mut self) {
        self.pairs.clear();
    }
}

/// Dense BFGS on the inverse Hessian, initialized to `(1/λ)I` (the smallest
/// curvature of `E`). Needs `O(D²)` memory and time per iteration.
struct Bfgs<T> {
    inv_hessian: Matrix<T>,
    lambda: T,
}

impl<T: Scalar> Bfgs<T> {
    fn new(dim: usize, lambda: T) -> Self {
        let mut s = Self { inv_hessian: Matrix::zeros(dim, dim), lambda };
        s.reset_matrix();
        s
    }

    fn reset_matrix(&mut self) {
        let n = self.inv_hessian.rows();
        self.inv_hessian = Matrix::zeros(n, n);
        for i in 0..n {
            self.inv_hessian.set(i, i, T::one() / self.lambda);
        }
    }
}

impl<T: Scalar> DirectionRule<T> for Bfgs<T> {
    fn propose(&mut self, _obj: &Objective<'_, T>, _point: &Point<T>, grad: &[T]) -> Result<Proposal<T>> {
        Ok(Proposal::Direction(negated(&self.inv_hessian.mul_vec(grad))))
    }

    fn update(&mut self, s: &[T], y: &[T], _g: &[T], _alpha: T, _slope0: T) {
        let sy = dot(s, y);
        if !(sy > T::zero()) {
            return;
        }
        let rho = T::one() / sy;
        // H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ = H − ρ(s·hyᵀ + hy·sᵀ) + (ρ²·yᵀhy + ρ)ssᵀ
        let hy = self.inv_hessian.mul_vec(y);
        let yhy = dot(y, &hy);
        let coef = rho * rho * yhy + rho;
        let n = s.len();
        for i in 0..n {
            let row = self.inv_hessian.row_mut(i);
            let (si, hyi) = (s[i], hy[i]);
            for j in 0..n {
                row[j] = row[j] - rho * (si * hy[j] + hyi * s[j]) + coef * si * s[j];
            }
        }
    }

    fn reset(&mut self) {
        self.reset_matrix();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SoftmaxModel;

    #[test]
    fn constant_step_gd_lands_on_source_for_zero_model() {
        let m = SoftmaxModel::<f64>::new(Matrix::zeros(3, 2), vec![0.0; 3]).unwrap();
        let r = m.reduce(1).unwrap();
        let p = Problem::new(vec![1.0, -2.0], 1, 0.7).unwrap();
        let cfg = BaselineConfig::new(Method::Gd).with_line_search(LineSearch::Constant);
        let res = solve_baseline(&r, &p, &[5.0, 3.0], &cfg).unwrap();
        assert_eq!(res.iterations, 1);
        for (a, b) in res.x_star.iter().zip(&p.source) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sgd".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = BaselineConfig::new(Method::Lbfgs);
        assert!(c.validate().is_ok());
        c.solver.wolfe_c1 = 0.95;
        assert!(c.validate().is_err());
        let mut c = BaselineConfig::new(Method::Lbfgs);
        c.lbfgs_memory = 0;
        assert!(c.validate().is_err());
        let mut c = BaselineConfig::new(Method::Gd);
        c.solver.backtrack_factor = 1.0;
        assert!(c.validate().is_err());
    }
}
