//! Shared oracles for integration tests: dense inversion, reference
//! Cholesky, quadrature. Deliberately independent of the crate's linear
//! algebra and tape paths.

#![allow(dead_code)]

use hmocgp_core::linalg::Mat;

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &Mat) -> Mat {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols());
    let mut aug = Mat::zeros(n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, n + i)] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if aug[(r, col)].abs() > aug[(pivot, col)].abs() {
                pivot = r;
            }
        }
        if pivot != col {
            for j in 0..2 * n {
                let tmp = aug[(col, j)];
                aug[(col, j)] = aug[(pivot, j)];
                aug[(pivot, j)] = tmp;
            }
        }
        let p = aug[(col, col)];
        for j in 0..2 * n {
            aug[(col, j)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = aug[(r, col)];
            for j in 0..2 * n {
                aug[(r, j)] -= f * aug[(col, j)];
            }
        }
    }
    let mut inv = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            inv[(i, j)] = aug[(i, n + j)];
        }
    }
    inv
}

/// Reference dense Cholesky (panics on non-PD input).
pub fn chol(a: &Mat) -> Mat {
    let n = a.n_rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                assert!(sum > 0.0, "oracle cholesky: non-PD input");
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    l
}

pub fn log_det(a: &Mat) -> f64 {
    let l = chol(a);
    (0..a.n_rows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Exact log marginal likelihood of a non-censored homoscedastic GP:
/// −½ yᵀ(K+σ²I)⁻¹y − ½ log det(K+σ²I) − N/2 log 2π.
pub fn exact_log_marginal(k: &Mat, y: &[f64], noise_var: f64) -> f64 {
    let n = k.n_rows();
    let mut ky = k.clone();
    for i in 0..n {
        ky[(i, i)] += noise_var;
    }
    let inv = invert(&ky);
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += y[i] * inv[(i, j)] * y[j];
        }
    }
    -0.5 * quad - 0.5 * log_det(&ky) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Adaptive Simpson quadrature with a relative stopping criterion.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, rel_tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        let scale = (left + right).abs().max(1e-300);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * rel_tol * scale {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, rel_tol, depth - 1) + rec(f, m, b, right, rel_tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    rec(f, a, b, simpson(f, a, m, b), rel_tol, 52)
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
