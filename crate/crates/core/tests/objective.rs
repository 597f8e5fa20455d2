mod common;

use common::*;
use invclass::linalg::dot;
use invclass::objective::{dense_hessian, eval_objective};
use invclass::{Matrix, Objective, Problem, SoftmaxModel};
use rand::Rng;

#[test]
fn value_matches_direct_evaluation() {
    let mut r = rng(11);
    for _ in 0..50 {
        let m = random_model(&mut r, 3, 2, 1.5);
        let k = r.random_range(0..3);
        let lambda = 10f64.powf(r.random_range(-3.0..1.0));
        let source = normal_vec(&mut r, 2, 1.0);
        let x = normal_vec(&mut r, 2, 2.0);
        let p = Problem::new(source.clone(), k, lambda).unwrap();
        let red = m.reduce(k).unwrap();
        let obj = Objective::new(&red, &p).unwrap();
        let got = obj.eval(&x).unwrap().value;
        let want = direct_objective(&m, &source, k, lambda, &x);
        assert!((got - want).abs() <= 1e-14 * want.abs().max(1.0), "{got} vs {want}");
        let (direct, _) = eval_objective(&m, &p, &x).unwrap();
        assert!((direct - want).abs() <= 1e-14 * want.abs().max(1.0));
    }
}

#[test]
fn zero_model_value_and_gradient() {
    let m = SoftmaxModel::<f64>::new(Matrix::zeros(2, 3), vec![0.0, 0.0]).unwrap();
    let p = Problem::new(vec![1.0, 2.0, 3.0], 1, 0.3).unwrap();
    let red = m.reduce(1).unwrap();
    let obj = Objective::new(&red, &p).unwrap();
    let x = [0.0, 1.0, -1.0];
    let pt = obj.eval(&x).unwrap();
    let q = 0.5 * 0.3 * (1.0 + 1.0 + 16.0);
    assert!((pt.value - (q + 2f64.ln())).abs() < 1e-15);
    let g = obj.gradient_at(&pt);
    for ((gi, xi), si) in g.iter().zip(&x).zip(&p.source) {
        assert!((gi - 0.3 * (xi - si)).abs() < 1e-15);
    }
    let u = [0.5, -1.0, 2.0];
    let hu = obj.hessian_matvec(&pt.probs, &u);
    for (h, ui) in hu.iter().zip(&u) {
        assert!((h - 0.3 * ui).abs() < 1e-15);
    }
    assert_eq!(obj.lipschitz_bound(), 0.3);
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(12);
    for _ in 0..20 {
        let m = random_model(&mut r, 5, 20, 0.5);
        let k = r.random_range(0..5);
        let p = Problem::new(normal_vec(&mut r, 20, 1.0), k, 0.1).unwrap();
        let red = m.reduce(k).unwrap();
        let obj = Objective::new(&red, &p).unwrap();
        let x = normal_vec(&mut r, 20, 1.0);
        let g = obj.gradient_at(&obj.eval(&x).unwrap());
        let h = 1e-6;
        let fd: Vec<f64> = (0..20)
            .map(|i| {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                (direct_objective(&m, &p.source, k, 0.1, &xp) - direct_objective(&m, &p.source, k, 0.1, &xm)) / (2.0 * h)
            })
            .collect();
        assert!(rel_err(&g, &fd) < 1e-5, "rel err {}", rel_err(&g, &fd));
    }
}

#[test]
fn hessian_matvec_is_symmetric_and_matches_dense() {
    let mut r = rng(13);
    for _ in 0..20 {
        let m = random_model(&mut r, 3, 5, 1.0);
        let k = r.random_range(0..3);
        let p = Problem::new(normal_vec(&mut r, 5, 1.0), k, 0.7).unwrap();
        let red = m.reduce(k).unwrap();
        let obj = Objective::new(&red, &p).unwrap();
        let pt = obj.eval(&normal_vec(&mut r, 5, 1.0)).unwrap();
        let (u, v) = (normal_vec(&mut r, 5, 1.0), normal_vec(&mut r, 5, 1.0));
        let (hu, hv) = (obj.hessian_matvec(&pt.probs, &u), obj.hessian_matvec(&pt.probs, &v));
        assert!((dot(&u, &hv) - dot(&v, &hu)).abs() < 1e-10);
        // Independent dense assembly: λI + Āᵀ(diag p − ppᵀ)Ā.
        let a = to_na(red.a_bar());
        let pv = nalgebra::DVector::from_column_slice(&pt.probs);
        let s = nalgebra::DMatrix::from_diagonal(&pv) - &pv * pv.transpose();
        let h = nalgebra::DMatrix::identity(5, 5) * 0.7 + a.transpose() * s * &a;
        let want = &h * nalgebra::DVector::from_column_slice(&u);
        for (g, w) in hu.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12 * (1.0 + w.abs()));
        }
        let ours = to_na(&dense_hessian(&red, 0.7, &pt.probs));
        assert!((ours - h).abs().max() < 1e-12);
    }
}

#[test]
fn lipschitz_examples_and_bound() {
    let m = SoftmaxModel::<f64>::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.0, 0.0]).unwrap();
    let red = m.reduce(0).unwrap();
    let p = Problem::new(vec![0.0, 0.0], 0, 1.0).unwrap();
    let obj = Objective::new(&red, &p).unwrap();
    assert!((obj.lipschitz_bound() - 2.0).abs() < 1e-9);

    let mut r = rng(14);
    for _ in 0..5 {
        let m = random_model(&mut r, 4, 6, 1.0);
        let red = m.reduce(2).unwrap();
        let p = Problem::new(normal_vec(&mut r, 6, 1.0), 2, 0.2).unwrap();
        let obj = Objective::new(&red, &p).unwrap();
        let l = obj.lipschitz_bound();
        for _ in 0..20 {
            let pt = obj.eval(&normal_vec(&mut r, 6, 3.0)).unwrap();
            let h = to_na(&dense_hessian(&red, 0.2, &pt.probs));
            let top = h.symmetric_eigen().eigenvalues.max();
            assert!(l >= top * (1.0 - 1e-9), "L={l} top={top}");
        }
    }
}

#[test]
fn spec_norm_matches_dense_eigen() {
    let mut r = rng(15);
    for _ in 0..20 {
        let m = random_model(&mut r, 5, 3, 1.0);
        let red = m.reduce(r.random_range(0..5)).unwrap();
        let a = to_na(red.a_bar());
        let want = (a.transpose() * &a).symmetric_eigen().eigenvalues.max();
        assert!((red.spec_norm_sq() - want).abs() <= 1e-8 * want, "{} vs {want}", red.spec_norm_sq());
    }
}

#[test]
fn ray_agrees_with_direct_differences() {
    let mut r = rng(16);
    for _ in 0..20 {
        let m = random_model(&mut r, 6, 10, 2.0);
        let k = r.random_range(0..6);
        let p = Problem::new(normal_vec(&mut r, 10, 1.0), k, 0.05).unwrap();
        let red = m.reduce(k).unwrap();
        let obj = Objective::new(&red, &p).unwrap();
        let x = normal_vec(&mut r, 10, 1.0);
        let pt = obj.eval(&x).unwrap();
        let d = normal_vec(&mut r, 10, 1.0);
        let ray = obj.ray(&pt, &d);
        for &alpha in &[1e-6, 1e-3, 0.1, 1.0, 10.0] {
            let xa: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let want = direct_objective(&m, &p.source, k, 0.05, &xa) - direct_objective(&m, &p.source, k, 0.05, &x);
            let got = ray.delta(alpha);
            assert!((got - want).abs() < 1e-12 * (1.0 + pt.value.abs()), "α={alpha}: {got} vs {want}");
        }
    }
}
