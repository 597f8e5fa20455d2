#![allow(dead_code)]

use invclass::{Matrix, SoftmaxModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, k: usize, d: usize, scale: f64) -> SoftmaxModel<f64> {
    let w = normal_vec(rng, k * d, scale);
    let b = normal_vec(rng, k, scale);
    SoftmaxModel::new(Matrix::from_row_major(k, d, w).unwrap(), b).unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng, max_d: usize, max_k: usize) -> (usize, usize) {
    (rng.random_range(1..=max_d), rng.random_range(2..=max_k))
}

/// Straight from the definition, without the reduced model.
pub fn direct_objective(model: &SoftmaxModel<f64>, source: &[f64], k: usize, lambda: f64, x: &[f64]) -> f64 {
    let z: Vec<f64> = (0..model.classes())
        .map(|i| model.weights().row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + model.biases()[i])
        .collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let q: f64 = x.iter().zip(source).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * lambda * q + lse - z[k]
}

pub fn to_na(m: &Matrix<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Bisection on a sign change of `f` over `[lo, hi]`, to width `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
