mod common;

use common::*;
use invclass::path::entry_prob_from_objective;
use invclass::{
    constrained_solve, solve_logistic, solve_newton_from_source, solve_path, Error, Matrix, PathConfig, Problem,
    SoftmaxModel, SolverConfig,
};
use rand::Rng;

#[test]
fn grid_shape() {
    let cfg = PathConfig::default();
    let g = cfg.grid();
    assert_eq!(g.len(), 100);
    assert_eq!((g[0], g[99]), (1e3, 1e-5));
    assert!(g.windows(2).all(|w| w[1] < w[0]));
    let ratio = g[1] / g[0];
    assert!(g.windows(2).all(|w| ((w[1] / w[0]) / ratio - 1.0).abs() < 1e-12));
    assert_eq!(PathConfig { num_points: 1, ..cfg }.grid(), vec![1e3]);
    assert!(PathConfig { num_points: 0, ..cfg }.validate().is_err());
    assert!(PathConfig { lambda_min: 1e4, ..cfg }.validate().is_err());
}

#[test]
fn single_point_path_is_a_plain_solve() {
    let mut r = rng(51);
    let m = random_model(&mut r, 4, 10, 1.0);
    let red = m.reduce(2).unwrap();
    let src = normal_vec(&mut r, 10, 1.0);
    let cfg = PathConfig { lambda_max: 0.3, lambda_min: 0.3, num_points: 1, ..PathConfig::default() };
    let path = solve_path(&red, &src, &cfg).unwrap();
    let p = Problem::new(src, 2, 0.3).unwrap();
    let direct = solve_newton_from_source(&red, &p, &SolverConfig::default()).unwrap();
    assert_eq!(path.entries.len(), 1);
    assert_eq!(path.entries[0].x_star, direct.x_star);
    assert_eq!(path.entries[0].iterations, direct.iterations);
}

#[test]
fn warm_and_cold_paths_agree() {
    let mut r = rng(52);
    for _ in 0..3 {
        let m = random_model(&mut r, 5, 40, 1.0);
        let k = r.random_range(0..5);
        let red = m.reduce(k).unwrap();
        let src = normal_vec(&mut r, 40, 1.0);
        let cfg = PathConfig { num_points: 30, ..PathConfig::default() };
        let warm = solve_path(&red, &src, &cfg).unwrap();
        let cold = solve_path(&red, &src, &PathConfig { warm_start: false, ..cfg }).unwrap();
        for (w, c) in warm.entries.iter().zip(&cold.entries) {
            assert_eq!(w.lambda, c.lambda);
            // Both stop at ‖∇E‖ < 1e-8, so each is within 1e-8/λ of x*(λ).
            let bound = 2e-8 / w.lambda;
            assert!(dist(&w.x_star, &c.x_star) <= bound.max(1e-12), "λ={} gap {:e}", w.lambda, dist(&w.x_star, &c.x_star));
        }
        assert!(warm.total_iterations() < cold.total_iterations());
    }
}

#[test]
fn path_invariants() {
    let mut r = rng(53);
    let m = random_model(&mut r, 6, 20, 1.0);
    let red = m.reduce(0).unwrap();
    let src = normal_vec(&mut r, 20, 1.0);
    let path = solve_path(&red, &src, &PathConfig { num_points: 40, ..PathConfig::default() }).unwrap();
    let first = &path.entries[0];
    assert!(dist(&first.x_star, &src) <= red.spec_norm_sq().sqrt() / first.lambda);
    // p_k(x*(λ)) grows as λ shrinks.
    assert!(path.entries.windows(2).all(|w| w[1].p_target >= w[0].p_target * (1.0 - 1e-12)));
    for e in &path.entries {
        let p = entry_prob_from_objective(&red, &src, e).unwrap();
        assert!((p - e.p_target).abs() < 1e-10);
    }
    let mut buf = Vec::new();
    path.write_csv(&mut buf, false).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("lambda,E,p_target,iterations,time_s\n"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn failed_path_keeps_completed_entries() {
    let mut r = rng(54);
    let m = random_model(&mut r, 3, 10, 3.0);
    let red = m.reduce(1).unwrap();
    let src = normal_vec(&mut r, 10, 1.0);
    let cfg = PathConfig {
        num_points: 20,
        solver: SolverConfig { max_iter: 2, ..SolverConfig::default() },
        ..PathConfig::default()
    };
    let err = solve_path(&red, &src, &cfg).unwrap_err();
    assert!(err.partial.entries.len() < 20);
    assert_eq!(err.total, 20);
    assert!(matches!(err.source, Error::NotConverged { .. }));
    let e: Error = err.into();
    assert!(matches!(e, Error::PathAborted { total: 20, .. }));
}

#[test]
fn constrained_feasible_source_is_returned() {
    let mut r = rng(55);
    let m = random_model(&mut r, 3, 5, 1.0);
    let red = m.reduce(2).unwrap();
    let src = normal_vec(&mut r, 5, 1.0);
    let g = m.softmax_eval(&src).unwrap().neg_log_probs[2];
    let sol = constrained_solve(&red, &src, g * 1.01, 1e-3, &SolverConfig::default()).unwrap();
    assert_eq!(sol.x, src);
    assert_eq!(sol.lambda, None);
}

#[test]
fn constrained_zero_model_is_infeasible() {
    let m = SoftmaxModel::<f64>::new(Matrix::zeros(3, 2), vec![0.0; 3]).unwrap();
    let red = m.reduce(0).unwrap();
    let res = constrained_solve(&red, &[1.0, 1.0], 0.5 * 3f64.ln(), 1e-3, &SolverConfig::default());
    assert!(matches!(res, Err(Error::Infeasible(_))));
}

#[test]
fn constrained_logistic_matches_dense_scan() {
    let mut r = rng(56);
    for _ in 0..5 {
        let m = random_model(&mut r, 2, 6, 2.0);
        let lm = m.to_logistic().unwrap();
        let src = normal_vec(&mut r, 6, 1.0);
        let g0 = -lm.prob_target(&src).ln();
        let alpha = 0.3 * g0;
        let tol = 1e-3;
        let red = m.reduce(0).unwrap();
        let sol = constrained_solve(&red, &src, alpha, tol, &SolverConfig::default()).unwrap();
        assert!(sol.target_neg_log_prob <= alpha && sol.target_neg_log_prob >= alpha * (1.0 - tol));
        let lam = sol.lambda.unwrap();

        // Largest of 10⁴ log-spaced λ meeting g_k ≤ alpha, via the closed form.
        let n = 10_000;
        let (lo, hi) = (1e-12f64.ln(), 1e12f64.ln());
        let step = (hi - lo) / (n - 1) as f64;
        let best = (0..n)
            .map(|i| (lo + step * i as f64).exp())
            .filter(|&l| -solve_logistic(&lm, &src, l).unwrap().p_target.ln() <= alpha)
            .fold(0.0, f64::max);
        assert!(best > 0.0);
        // The bisection answer lies at or below the exact boundary, within
        // the tolerance band; the scan lands within one grid cell of it.
        let g_scan = -solve_logistic(&lm, &src, best).unwrap().p_target.ln();
        let g_next = -solve_logistic(&lm, &src, best * step.exp()).unwrap().p_target.ln();
        assert!(g_scan <= alpha && g_next > alpha);
        let cell = g_next - g_scan;
        assert!((sol.target_neg_log_prob - g_scan).abs() <= tol * alpha + cell);
        assert!(lam <= best * step.exp() * (1.0 + 1e-12), "λ={lam} scan={best}");
        let x_cf = solve_logistic(&lm, &src, lam).unwrap().x_star;
        assert!(dist(&x_cf, &sol.x) <= 1e-6 * (1.0 + dist(&x_cf, &src)));
        let x_scan = solve_logistic(&lm, &src, best).unwrap().x_star;
        let x_next = solve_logistic(&lm, &src, best * step.exp()).unwrap().x_star;
        assert!(dist(&sol.x, &x_scan) <= dist(&x_scan, &x_next) + tol * dist(&x_scan, &src));
    }
}
