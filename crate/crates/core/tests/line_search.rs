use invclass::line_search::{backtracking, strong_wolfe, WolfeParams};

fn quartic(t: f64) -> (f64, f64) {
    (t.powi(4) - 2.0 * t * t + t, 4.0 * t.powi(3) - 4.0 * t + 1.0)
}

fn wolfe_ok(alpha: f64, f0: f64, s0: f64, f: impl Fn(f64) -> (f64, f64), c1: f64, c2: f64) -> bool {
    let (fa, sa) = f(alpha);
    fa - f0 <= c1 * alpha * s0 && sa.abs() <= c2 * s0.abs()
}

#[test]
fn backtracking_candidate_sequence() {
    let mut tried = Vec::new();
    let step = backtracking(
        |a: f64| {
            tried.push(a);
            if a < 0.3 { -1.0 } else { 1.0 }
        },
        0.8,
        100,
    )
    .unwrap();
    let want: Vec<f64> = (0..tried.len()).map(|i| 0.8f64.powi(i as i32)).collect();
    for (t, w) in tried.iter().zip(&want) {
        assert!((t - w).abs() < 1e-15);
    }
    assert_eq!(step.trials, tried.len());
    assert!(step.alpha < 0.3 && step.alpha / 0.8 >= 0.3);
    assert!(backtracking(|_: f64| 1.0, 0.8, 5).is_err());
}

#[test]
fn backtracking_takes_exact_newton_step_on_quadratic() {
    // f(x) = (x − 3)², Newton step from 0 is exactly 3.
    let step = backtracking(|a: f64| (3.0 * a - 3.0).powi(2) - 9.0, 0.8, 100).unwrap();
    assert_eq!((step.alpha, step.trials), (1.0, 1));
}

#[test]
fn wolfe_unit_step_on_half_square() {
    // f(t) = ½t² from t = 1 along d = −1.
    let f = |a: f64| (0.5 * (1.0 - a).powi(2) - 0.5, -(1.0 - a));
    let p = WolfeParams::default();
    let s = strong_wolfe(f, -1.0, 1.0, &p).unwrap();
    assert_eq!(s.step.alpha, 1.0);
    assert!(wolfe_ok(1.0, 0.0, -1.0, f, p.c1, p.c2));
}

#[test]
fn wolfe_on_quartic_against_dense_scan() {
    let (f0, s0) = quartic(-2.0);
    let phi = |a: f64| {
        let (v, s) = quartic(-2.0 + a);
        (v - f0, s)
    };
    for &(c1, c2) in &[(1e-4, 0.9), (1e-4, 0.1), (0.3, 0.5)] {
        let p = WolfeParams { c1, c2, ..WolfeParams::default() };
        let scan: Vec<f64> = (1..=40_000).map(|i| i as f64 * 1e-4).collect();
        let admissible: Vec<f64> = scan.iter().copied().filter(|&a| wolfe_ok(a, 0.0, s0, phi, c1, c2)).collect();
        assert!(!admissible.is_empty());
        for &init in &[1e-3, 0.1, 1.0, 3.9] {
            let s = strong_wolfe(phi, s0, init, &p).unwrap();
            let a = s.step.alpha;
            assert!(a > 0.0 && a <= 4.0);
            assert!(wolfe_ok(a, 0.0, s0, phi, c1, c2), "c2={c2} init={init} α={a}");
            // The scan must also find admissible points within a grid cell.
            assert!(admissible.iter().any(|&b| (a - b).abs() <= 1e-3), "α={a} not near any scanned admissible step");
            assert!((s.slope - phi(a).1).abs() < 1e-12);
        }
    }
}

#[test]
fn wolfe_rejects_ascent() {
    assert!(strong_wolfe(|a: f64| (a, 1.0), 1.0, 1.0, &WolfeParams::default()).is_err());
}
