//! Exact and fast inverse classification for linear softmax and
//! logistic-regression classifiers.
//!
//! Given a fixed classifier, a source instance `x̄`, a target class `k` and a
//! trade-off `λ > 0`, the crate minimizes
//!
//! ```text
//! E(x; λ, k) = (λ/2)‖x − x̄‖² − ln p_k(x)
//! ```
//!
//! which is strongly convex with a unique minimizer. Newton's method solves
//! it to machine precision with a `K×K` linear system per iteration
//! ([`newton`]); binary models have a closed form ([`logistic`]).
//! Gradient descent, Polak–Ribière CG, L-BFGS and BFGS are provided for
//! comparison ([`baseline`]), together with `λ`-paths ([`path`]) and a
//! benchmark harness on synthetic models ([`bench`]).
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases fix the common double-precision case. Class indices are 0-based.
//!
//! ```
//! use invclass::{Problem, SoftmaxModel64, SolverConfig, solve_newton_from_source};
//!
//! let model = SoftmaxModel64::from_rows(
//!     &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
//!     vec![0.0, 0.0, 0.0],
//! ).unwrap();
//! let reduced = model.reduce(2).unwrap();
//! let problem = Problem::new(vec![1.0, 0.5], 2, 0.1).unwrap();
//! let res = solve_newton_from_source(&reduced, &problem, &SolverConfig::default()).unwrap();
//! assert!(res.converged);
//! assert_eq!(model.predict(&res.x_star).unwrap(), 2);
//! ```

// `!(x > 0)` also rejects NaN, which is what the validation checks want.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod error;
pub mod io;
pub mod line_search;
pub mod linalg;
pub mod logistic;
pub mod model;
pub mod newton;
pub mod objective;
pub mod path;
pub mod scalar;
pub mod solver;

pub use baseline::{solve_baseline, BaselineConfig, Method};
pub use error::{Error, Result};
pub use line_search::LineSearch;
pub use linalg::Matrix;
pub use logistic::{phi, solve_logistic, LogisticSolution, PhiQuery};
pub use model::{LogisticModel, ReducedModel, SoftmaxEval, SoftmaxModel};
pub use newton::{newton_direction, solve_newton, solve_newton_from_source};
pub use objective::{Objective, Point, Problem};
pub use path::{constrained_solve, solve_path, ConstrainedSolution, PathConfig, PathEntry, PathResult};
pub use scalar::Scalar;
pub use solver::{IterRecord, SolverConfig, SolverResult};

pub type SoftmaxModel64 = SoftmaxModel<f64>;
pub type ReducedModel64 = ReducedModel<f64>;
pub type LogisticModel64 = LogisticModel<f64>;
pub type Problem64 = Problem<f64>;
pub type SolverResult64 = SolverResult<f64>;
pub type PathResult64 = PathResult<f64>;
pub type SoftmaxModel32 = SoftmaxModel<f32>;
pub type Problem32 = Problem<f32>;
