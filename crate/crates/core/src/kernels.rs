//! Stationary kernels and the linear model of coregionalization (LMC).
//!
//! Multi-output priors are built from Q independent latent GPs with kernels
//! k_q; output d mixes R_q i.i.d. draws of latent q through learnable
//! weights a_{d,q}^i, giving the cross-covariance
//! cov[Γ_d(x), Γ_d'(x')] = Σ_q b_{d,d'}^q k_q(x, x') with B_q = A_q A_qᵀ.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::linalg::{CovMatrix, Mat};

/// RBF (squared-exponential) hyper-parameters, stored in log space so
/// unconstrained gradient steps keep them positive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RbfKernelParams {
    pub log_variance: f64,
    pub log_lengthscale: f64,
}

impl RbfKernelParams {
    pub fn new(variance: f64, lengthscale: f64) -> Self {
        assert!(variance > 0.0 && lengthscale > 0.0);
        Self { log_variance: crate::math::ln(variance), log_lengthscale: crate::math::ln(lengthscale) }
    }

    pub fn variance(&self) -> f64 {
        crate::math::exp(self.log_variance)
    }

    pub fn lengthscale(&self) -> f64 {
        crate::math::exp(self.log_lengthscale)
    }
}

/// Stationary kernel families. Only the RBF is built in; the enum is the
/// extension point for further stationary kernels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Rbf(RbfKernelParams),
}

impl Kernel {
    pub fn rbf(variance: f64, lengthscale: f64) -> Self {
        Kernel::Rbf(RbfKernelParams::new(variance, lengthscale))
    }

    /// k(x, x') from a precomputed squared distance.
    pub fn eval_sqdist(&self, sqdist: f64) -> f64 {
        match self {
            Kernel::Rbf(p) => {
                let gamma = crate::math::exp(-2.0 * p.log_lengthscale);
                rbf_pair(p.log_variance, gamma, sqdist)
            }
        }
    }
}

/// RBF evaluation shared by the plain and tape paths:
/// k = exp(log σ² − d²/(2ℓ²)) with `gamma` = exp(−2 log ℓ) precomputed once
/// per kernel so large covariance assemblies reuse it.
#[inline]
pub fn rbf_pair<S: Real>(log_variance: S, gamma: S, sqdist: f64) -> S {
    (gamma.mul_c(-0.5 * sqdist) + log_variance).exp()
}

/// Squared Euclidean distance between two input vectors.
pub fn sqdist(x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::ShapeMismatch {
            context: "kernel inputs",
            expected: x.len(),
            got: x_prime.len(),
        });
    }
    Ok(x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// RBF kernel value between two input vectors.
pub fn rbf_eval(x: &[f64], x_prime: &[f64], params: &RbfKernelParams) -> Result<f64> {
    let d2 = sqdist(x, x_prime)?;
    let gamma = crate::math::exp(-2.0 * params.log_lengthscale);
    Ok(rbf_pair(params.log_variance, gamma, d2))
}

/// Coregionalization specification: Q latent kernels with their mixing
/// weight matrices A_q (D × R_q each).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LmcSpec {
    pub kernels: Vec<Kernel>,
    pub weights: Vec<Mat>,
}

impl LmcSpec {
    /// Intrinsic coregionalization model: a single latent kernel.
    pub fn icm(kernel: Kernel, weights: Mat) -> Self {
        Self { kernels: vec![kernel], weights: vec![weights] }
    }

    /// Degenerate single-output spec with unit weight.
    pub fn single_output(kernel: Kernel) -> Self {
        Self::icm(kernel, Mat::from_rows(&[&[1.0]]))
    }

    pub fn n_latents(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self, d_outputs: usize) -> Result<()> {
        if self.kernels.is_empty() || self.kernels.len() != self.weights.len() {
            return Err(Error::Config(alloc::format!(
                "LMC needs matching kernels and weights, got {} and {}",
                self.kernels.len(),
                self.weights.len()
            )));
        }
        for (q, w) in self.weights.iter().enumerate() {
            if w.n_rows() != d_outputs || w.n_cols() == 0 {
                return Err(Error::ShapeMismatch {
                    context: "coregionalization weights",
                    expected: d_outputs,
                    got: w.n_rows(),
                });
            }
            let _ = q;
        }
        Ok(())
    }

    /// B_q = A_q A_qᵀ for latent q.
    pub fn coregionalization_matrix(&self, q: usize) -> Mat {
        let a = &self.weights[q];
        let at = a.transpose();
        a.mul_mat(&at)
    }
}

fn stack_index(d: usize, n: usize, n_points: usize) -> usize {
    d * n_points + n
}

/// Assembles the LMC cross-covariance between two input sets as a dense
/// (N·D) × (M·D) matrix in output-major stacking (index = d·N + n).
pub fn lmc_cross_covariance(
    x: &Mat,
    x_prime: &Mat,
    spec: &LmcSpec,
    d_outputs: usize,
) -> Result<Mat> {
    spec.validate(d_outputs)?;
    if x.n_cols() != x_prime.n_cols() {
        return Err(Error::ShapeMismatch {
            context: "input dimensions",
            expected: x.n_cols(),
            got: x_prime.n_cols(),
        });
    }
    let n = x.n_rows();
    let m = x_prime.n_rows();
    let mut out = Mat::zeros(n * d_outputs, m * d_outputs);
    for q in 0..spec.n_latents() {
        let b = spec.coregionalization_matrix(q);
        // kernel gram between the two input sets
        let mut gram = Mat::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                let d2 = sqdist(x.row(i), x_prime.row(j))?;
                gram[(i, j)] = spec.kernels[q].eval_sqdist(d2);
            }
        }
        for d in 0..d_outputs {
            for dp in 0..d_outputs {
                let w = b[(d, dp)];
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..m {
                        out[(stack_index(d, i, n), stack_index(dp, j, m))] += w * gram[(i, j)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Square LMC covariance over one input set, wrapped as a [`CovMatrix`].
pub fn lmc_covariance(x: &Mat, spec: &LmcSpec, d_outputs: usize) -> Result<CovMatrix> {
    let m = lmc_cross_covariance(x, x, spec, d_outputs)?;
    CovMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_min_eigenvalue;
    use crate::rng::Xoshiro256;

    fn inputs_1d(xs: &[f64]) -> Mat {
        Mat::from_vec(xs.len(), 1, xs.to_vec())
    }

    #[test]
    fn rbf_zero_distance_returns_variance() {
        let p = RbfKernelParams::new(2.5, 0.7);
        let v = rbf_eval(&[1.0, 2.0], &[1.0, 2.0], &p).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn rbf_at_one_lengthscale() {
        // ‖x − x'‖ = ℓ gives exp(-1/2), frozen from the closed form
        let p = RbfKernelParams::new(1.0, 3.0);
        let v = rbf_eval(&[0.0], &[3.0], &p).unwrap();
        assert!((v - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn rbf_far_tail_underflows() {
        let p = RbfKernelParams::new(1.0, 1.0);
        let v = rbf_eval(&[0.0], &[100.0], &p).unwrap();
        assert!(v < 1e-300);
    }

    #[test]
    fn rbf_symmetric_in_arguments() {
        let p = RbfKernelParams::new(1.3, 0.4);
        let a = [0.3, -1.2];
        let b = [2.0, 0.5];
        assert_eq!(rbf_eval(&a, &b, &p).unwrap(), rbf_eval(&b, &a, &p).unwrap());
    }

    #[test]
    fn rbf_dimension_mismatch_is_an_error() {
        let p = RbfKernelParams::new(1.0, 1.0);
        assert!(matches!(
            rbf_eval(&[0.0], &[0.0, 1.0], &p),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_lmc_reduces_to_plain_kernel() {
        let kernel = Kernel::rbf(1.7, 0.9);
        let spec = LmcSpec::single_output(kernel);
        let x = inputs_1d(&[0.0, 0.5, 1.5]);
        let cov = lmc_covariance(&x, &spec, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = kernel.eval_sqdist(sqdist(x.row(i), x.row(j)).unwrap());
                assert!((cov.mat[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rank_one_all_ones_weights_replicate_blocks() {
        let kernel = Kernel::rbf(1.0, 1.0);
        let spec = LmcSpec::icm(kernel, Mat::from_rows(&[&[1.0], &[1.0]]));
        let x = inputs_1d(&[0.0, 1.0, 2.0]);
        let cov = lmc_covariance(&x, &spec, 2).unwrap();
        let n = 3;
        for bi in 0..2 {
            for bj in 0..2 {
                for i in 0..n {
                    for j in 0..n {
                        assert_eq!(cov.mat[(bi * n + i, bj * n + j)], cov.mat[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_double_sum_oracle() {
        // entry (d,n),(d',m) = Σ_q Σ_i a_{d,q}^i a_{d',q}^i k_q(x_n, x_m)
        let mut rng = Xoshiro256::seed_from(42);
        let n = 4;
        let d_outputs = 2;
        let x = Mat::from_vec(n, 1, (0..n).map(|_| rng.uniform_in(0.0, 5.0)).collect());
        let kernels = vec![Kernel::rbf(1.3, 0.8), Kernel::rbf(0.6, 2.2)];
        let weights: Vec<Mat> = (0..2)
            .map(|_| {
                Mat::from_vec(
                    d_outputs,
                    2,
                    (0..d_outputs * 2).map(|_| rng.standard_normal()).collect(),
                )
            })
            .collect();
        let spec = LmcSpec { kernels: kernels.clone(), weights: weights.clone() };
        let cov = lmc_covariance(&x, &spec, d_outputs).unwrap();

        for d in 0..d_outputs {
            for dp in 0..d_outputs {
                for i in 0..n {
                    for j in 0..n {
                        let mut oracle = 0.0;
                        for q in 0..2 {
                            let k = kernels[q]
                                .eval_sqdist(sqdist(x.row(i), x.row(j)).unwrap());
                            for r in 0..2 {
                                oracle += weights[q][(d, r)] * weights[q][(dp, r)] * k;
                            }
                        }
                        let got = cov.mat[(d * n + i, dp * n + j)];
                        assert!(
                            (got - oracle).abs() <= 1e-12,
                            "block ({d},{dp}) entry ({i},{j}): {got} vs {oracle}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn assembled_covariance_is_psd() {
        let mut rng = Xoshiro256::seed_from(7);
        for _ in 0..50 {
            let n = 2 + (rng.next_u64() % 6) as usize;
            let d_outputs = 1 + (rng.next_u64() % 3) as usize;
            let n_latents = 1 + (rng.next_u64() % 2) as usize;
            let x = Mat::from_vec(n, 1, (0..n).map(|_| rng.uniform_in(-3.0, 3.0)).collect());
            let spec = LmcSpec {
                kernels: (0..n_latents)
                    .map(|_| Kernel::rbf(rng.uniform_in(0.2, 2.0), rng.uniform_in(0.3, 3.0)))
                    .collect(),
                weights: (0..n_latents)
                    .map(|_| {
                        let r = 1 + (rng.next_u64() % 2) as usize;
                        Mat::from_vec(
                            d_outputs,
                            r,
                            (0..d_outputs * r).map(|_| rng.standard_normal()).collect(),
                        )
                    })
                    .collect(),
            };
            let cov = lmc_covariance(&x, &spec, d_outputs).unwrap();
            let max_diag = (0..cov.dim()).map(|i| cov.mat[(i, i)]).fold(0.0_f64, f64::max);
            let min_eig = sym_min_eigenvalue(&cov.mat);
            assert!(
                min_eig >= -1e-8 * max_diag,
                "min eigenvalue {min_eig} vs diag {max_diag}"
            );
        }
    }
}
