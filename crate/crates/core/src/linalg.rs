//! Dense linear algebra: Cholesky with jitter escalation, triangular
//! solves and the Gaussian conditional that backs prediction.
//!
//! Matrices are small (a few hundred rows at most), so everything is plain
//! row-major `f64` with straightforward loops. Solves always go through a
//! Cholesky factor; no routine ever forms an explicit inverse.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

/// How many times the jitter is multiplied by 10 before giving up.
pub const MAX_JITTER_ESCALATIONS: usize = 6;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "MatSerde", into = "MatSerde")]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MatSerde {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatSerde> for Mat {
    type Error = alloc::string::String;
    fn try_from(m: MatSerde) -> core::result::Result<Self, Self::Error> {
        if m.data.len() != m.n_rows * m.n_cols {
            return Err(alloc::format!(
                "matrix data length {} does not match {}×{}",
                m.data.len(),
                m.n_rows,
                m.n_cols
            ));
        }
        Ok(Mat { n_rows: m.n_rows, n_cols: m.n_cols, data: m.data })
    }
}

impl From<Mat> for MatSerde {
    fn from(m: Mat) -> Self {
        MatSerde { n_rows: m.n_rows, n_cols: m.n_cols, data: m.data }
    }
}

impl Mat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { n_rows, n_cols, data }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Self { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// self * v
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_cols);
        let mut out = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// self * other
    pub fn mul_mat(&self, other: &Mat) -> Mat {
        assert_eq!(self.n_cols, other.n_rows);
        let mut out = Mat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.n_cols..(i + 1) * other.n_cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn mean_diag(&self) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        (0..self.n_rows).map(|i| self[(i, i)]).sum::<f64>() / self.n_rows as f64
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Symmetric covariance matrix plus a record of any jitter already folded in.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CovMatrix {
    pub mat: Mat,
    pub jitter_applied: f64,
}

impl CovMatrix {
    /// Wraps a square matrix, checking symmetry to 1e-12 relative tolerance.
    pub fn new(mat: Mat) -> Result<Self> {
        if mat.n_rows != mat.n_cols {
            return Err(Error::ShapeMismatch {
                context: "covariance matrix",
                expected: mat.n_rows,
                got: mat.n_cols,
            });
        }
        let scale = mat.max_abs().max(1e-300);
        for i in 0..mat.n_rows {
            for j in (i + 1)..mat.n_cols {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Domain(alloc::format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { mat, jitter_applied: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.mat.n_rows()
    }
}

/// Lower-triangular Cholesky factor and the jitter that made it succeed.
#[derive(Debug, Clone)]
pub struct CholFactor {
    pub l: Mat,
    pub jitter: f64,
}

/// Attempts a Cholesky factorization of `a` as given, then with jitter
/// `base_jitter * 10^k` on the diagonal for k = 0..=6, recording the jitter
/// that succeeded.
pub fn cholesky_with_jitter(a: &Mat, base_jitter: f64, name: &'static str) -> Result<CholFactor> {
    assert_eq!(a.n_rows(), a.n_cols(), "cholesky needs a square matrix");
    // degenerate all-zero matrices have no scale to derive jitter from
    let base = if base_jitter > 0.0 { base_jitter } else { 1e-12 };
    let mut jitter = 0.0;
    for attempt in 0..=MAX_JITTER_ESCALATIONS {
        if let Some(l) = try_cholesky(a, jitter) {
            return Ok(CholFactor { l, jitter });
        }
        jitter = base * libm::pow(10.0, attempt as f64);
    }
    Err(Error::NumericalDegeneracy { matrix: name, max_jitter: jitter / 10.0 })
}

/// Default relative jitter used throughout: 1e-6 of the mean diagonal.
pub fn default_base_jitter(a: &Mat) -> f64 {
    let d = a.mean_diag();
    if d > 0.0 {
        1e-6 * d
    } else {
        1e-12
    }
}

fn try_cholesky(a: &Mat, jitter: f64) -> Option<Mat> {
    let n = a.n_rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                // a pivot that lost essentially all relative magnitude is a
                // numerical failure; escalate rather than return garbage
                let floor = 1e-10 * (a[(i, i)].abs() + jitter);
                if !(sum > floor) || !sum.is_finite() {
                    return None;
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves L x = b for lower-triangular L.
pub fn solve_lower(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows();
    assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let mut acc = x[i];
        for k in 0..i {
            acc -= row[k] * x[k];
        }
        x[i] = acc / row[i];
    }
    x
}

/// Solves Lᵀ x = b for lower-triangular L.
pub fn solve_lower_transpose(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows();
    assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for k in (i + 1)..n {
            acc -= l[(k, i)] * x[k];
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

/// Solves (L Lᵀ) x = b.
pub fn solve_with_factor(l: &Mat, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Solves L X = B columnwise.
pub fn solve_lower_mat(l: &Mat, b: &Mat) -> Mat {
    let n = l.n_rows();
    assert_eq!(b.n_rows(), n);
    let mut out = Mat::zeros(n, b.n_cols());
    let mut col = vec![0.0; n];
    for j in 0..b.n_cols() {
        for i in 0..n {
            col[i] = b[(i, j)];
        }
        let x = solve_lower(l, &col);
        for i in 0..n {
            out[(i, j)] = x[i];
        }
    }
    out
}

/// log det(L Lᵀ) from the factor.
pub fn log_det_from_factor(l: &Mat) -> f64 {
    (0..l.n_rows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Moments of ∫ p(f* | f) q(f) df for a GP conditional integrated against a
/// Gaussian q(f) = N(q_mean, q_cov):
///
/// mean = K*ₙ Kₙₙ⁻¹ μ,
/// cov  = K** − K*ₙ Kₙₙ⁻¹ Kₙ* + K*ₙ Kₙₙ⁻¹ Σ Kₙₙ⁻¹ Kₙ*.
///
/// All solves go through the Cholesky factor of Kₙₙ; the returned covariance
/// is symmetrized.
pub fn gaussian_conditional(
    k_nn: &CovMatrix,
    k_sn: &Mat,
    k_ss: &CovMatrix,
    q_mean: &[f64],
    q_cov: &Mat,
) -> Result<(Vec<f64>, Mat)> {
    let n = k_nn.dim();
    let m = k_ss.dim();
    if k_sn.n_rows() != m || k_sn.n_cols() != n {
        return Err(Error::ShapeMismatch {
            context: "cross covariance",
            expected: m * n,
            got: k_sn.n_rows() * k_sn.n_cols(),
        });
    }
    if q_mean.len() != n || q_cov.n_rows() != n || q_cov.n_cols() != n {
        return Err(Error::ShapeMismatch {
            context: "variational moments",
            expected: n,
            got: q_mean.len(),
        });
    }
    let factor = cholesky_with_jitter(&k_nn.mat, default_base_jitter(&k_nn.mat), "K_nn")?;

    // mean
    let alpha = solve_with_factor(&factor.l, q_mean);
    let mean = k_sn.mul_vec(&alpha);

    // V = L⁻¹ Kₙ*, T = Kₙₙ⁻¹ Kₙ*
    let k_ns = k_sn.transpose();
    let v = solve_lower_mat(&factor.l, &k_ns);
    let mut t = v.clone();
    {
        // finish the second triangular solve column by column
        let mut col = vec![0.0; n];
        for j in 0..t.n_cols() {
            for i in 0..n {
                col[i] = v[(i, j)];
            }
            let x = solve_lower_transpose(&factor.l, &col);
            for i in 0..n {
                t[(i, j)] = x[i];
            }
        }
    }

    let mut cov = k_ss.mat.clone();
    // cov -= Vᵀ V
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v[(k, i)] * v[(k, j)];
            }
            cov[(i, j)] -= acc;
        }
    }
    // cov += Tᵀ Σ T
    let sigma_t = q_cov.mul_mat(&t);
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..n {
                acc += t[(k, i)] * sigma_t[(k, j)];
            }
            cov[(i, j)] += acc;
        }
    }
    // symmetrize
    for i in 0..m {
        for j in (i + 1)..m {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    Ok((mean, cov))
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    assert_eq!(a.n_rows(), a.n_cols());
    let n = a.n_rows();
    let mut m = a.clone();
    // symmetrize defensively; Jacobi assumes exact symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let scale = m.max_abs().max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigenvalue(a: &Mat) -> f64 {
    sym_eigenvalues(a).into_iter().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;

    fn random_spd(n: usize, rng: &mut Xoshiro256) -> Mat {
        let mut b = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = rng.standard_normal();
            }
        }
        let bt = b.transpose();
        let mut a = b.mul_mat(&bt);
        for i in 0..n {
            a[(i, i)] += 0.5 * n as f64;
        }
        a
    }

    #[test]
    fn identity_needs_no_jitter() {
        let f = cholesky_with_jitter(&Mat::identity(4), 1e-6, "I").unwrap();
        assert_eq!(f.jitter, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(f.l[(i, j)], expect);
            }
        }
    }

    #[test]
    fn hand_cholesky_2x2() {
        let a = Mat::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let f = cholesky_with_jitter(&a, 1e-6, "A").unwrap();
        assert_eq!(f.jitter, 0.0);
        assert!((f.l[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((f.l[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((f.l[(1, 1)] - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(f.l[(0, 1)], 0.0);
    }

    #[test]
    fn rank_deficient_succeeds_with_small_jitter() {
        let a = Mat::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let f = cholesky_with_jitter(&a, 1e-6, "ones").unwrap();
        assert!(f.jitter > 0.0 && f.jitter <= 1e-4, "jitter {}", f.jitter);
    }

    #[test]
    fn factor_reconstructs_input_plus_jitter() {
        let mut rng = Xoshiro256::seed_from(21);
        for _ in 0..20 {
            let n = 1 + (rng.next_u64() % 8) as usize;
            let a = random_spd(n, &mut rng);
            let f = cholesky_with_jitter(&a, default_base_jitter(&a), "A").unwrap();
            let lt = f.l.transpose();
            let rec = f.l.mul_mat(&lt);
            let norm = a.max_abs();
            for i in 0..n {
                for j in 0..n {
                    let target = a[(i, j)] + if i == j { f.jitter } else { 0.0 };
                    assert!(
                        (rec[(i, j)] - target).abs() <= 1e-8 * norm,
                        "entry ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn negative_definite_matrix_is_rejected() {
        let mut a = Mat::identity(3);
        for i in 0..3 {
            a[(i, i)] = -1.0;
        }
        let err = cholesky_with_jitter(&a, 1e-6, "negdef").unwrap_err();
        assert!(matches!(err, Error::NumericalDegeneracy { matrix: "negdef", .. }));
    }

    #[test]
    fn triangular_solves_invert_each_other() {
        let mut rng = Xoshiro256::seed_from(4);
        let a = random_spd(6, &mut rng);
        let f = cholesky_with_jitter(&a, 1e-9, "A").unwrap();
        let b: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let x = solve_with_factor(&f.l, &b);
        let back = {
            let lt = f.l.transpose();
            f.l.mul_mat(&lt).mul_vec(&x)
        };
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn conditional_matches_dense_inverse_oracle() {
        // oracle uses Gauss-Jordan inversion, fully independent of the solves
        fn invert(a: &Mat) -> Mat {
            let n = a.n_rows();
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
                    let factor = aug[(r, col)];
                    for j in 0..2 * n {
                        aug[(r, j)] -= factor * aug[(col, j)];
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

        let mut rng = Xoshiro256::seed_from(17);
        let n = 5;
        let m = 3;
        let k_nn_m = random_spd(n, &mut rng);
        // build a consistent joint covariance so K** - K*n Knn^-1 Kn* is PSD
        let joint = random_spd(n + m, &mut rng);
        let mut k_sn = Mat::zeros(m, n);
        let mut k_ss_m = Mat::zeros(m, m);
        for i in 0..m {
            for j in 0..n {
                k_sn[(i, j)] = joint[(n + i, j)];
            }
            for j in 0..m {
                k_ss_m[(i, j)] = joint[(n + i, n + j)];
            }
        }
        let mut k_nn_joint = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k_nn_joint[(i, j)] = joint[(i, j)];
            }
        }
        let _ = k_nn_m;
        let q_mean: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let q_cov = random_spd(n, &mut rng);

        let k_nn = CovMatrix::new(k_nn_joint.clone()).unwrap();
        let k_ss = CovMatrix::new(k_ss_m.clone()).unwrap();
        let (mean, cov) =
            gaussian_conditional(&k_nn, &k_sn, &k_ss, &q_mean, &q_cov).unwrap();

        let inv = invert(&k_nn_joint);
        let mean_oracle = k_sn.mul_mat(&inv).mul_vec(&q_mean);
        let ksn_inv = k_sn.mul_mat(&inv);
        let kns = k_sn.transpose();
        let cov1 = ksn_inv.mul_mat(&kns);
        let cov2 = ksn_inv.mul_mat(&q_cov).mul_mat(&inv.mul_mat(&kns));
        for i in 0..m {
            assert!((mean[i] - mean_oracle[i]).abs() < 1e-8, "mean {i}");
            for j in 0..m {
                let oracle = k_ss_m[(i, j)] - cov1[(i, j)] + cov2[(i, j)];
                assert!((cov[(i, j)] - oracle).abs() < 1e-8, "cov ({i},{j})");
            }
        }
    }

    #[test]
    fn conditional_interpolates_at_training_point() {
        let mut rng = Xoshiro256::seed_from(8);
        let n = 4;
        let k_nn_m = random_spd(n, &mut rng);
        let pick = 2;
        let mut k_sn = Mat::zeros(1, n);
        for j in 0..n {
            k_sn[(0, j)] = k_nn_m[(pick, j)];
        }
        let k_ss = CovMatrix::new(Mat::from_rows(&[&[k_nn_m[(pick, pick)]]])).unwrap();
        let q_mean: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let q_cov = random_spd(n, &mut rng);
        let (mean, cov) = gaussian_conditional(
            &CovMatrix::new(k_nn_m).unwrap(),
            &k_sn,
            &k_ss,
            &q_mean,
            &q_cov,
        )
        .unwrap();
        assert!((mean[0] - q_mean[pick]).abs() < 1e-8);
        assert!((cov[(0, 0)] - q_cov[(pick, pick)]).abs() < 1e-7);
    }

    #[test]
    fn conditional_reverts_to_prior_with_zero_cross_covariance() {
        let mut rng = Xoshiro256::seed_from(12);
        let n = 4;
        let k_nn = CovMatrix::new(random_spd(n, &mut rng)).unwrap();
        let k_sn = Mat::zeros(2, n);
        let k_ss = CovMatrix::new(random_spd(2, &mut rng)).unwrap();
        let q_mean: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let q_cov = random_spd(n, &mut rng);
        let (mean, cov) =
            gaussian_conditional(&k_nn, &k_sn, &k_ss, &q_mean, &q_cov).unwrap();
        assert!(mean.iter().all(|v| v.abs() < 1e-12));
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov[(i, j)] - k_ss.mat[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conditional_with_prior_q_returns_prior_moments() {
        // q_cov = K_nn and q_mean = 0 must reproduce (0, K_ss)
        let mut rng = Xoshiro256::seed_from(33);
        let n = 6;
        let m = 2;
        let joint = random_spd(n + m, &mut rng);
        let mut k_nn = Mat::zeros(n, n);
        let mut k_sn = Mat::zeros(m, n);
        let mut k_ss = Mat::zeros(m, m);
        for i in 0..n {
            for j in 0..n {
                k_nn[(i, j)] = joint[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..n {
                k_sn[(i, j)] = joint[(n + i, j)];
            }
            for j in 0..m {
                k_ss[(i, j)] = joint[(n + i, n + j)];
            }
        }
        let (mean, cov) = gaussian_conditional(
            &CovMatrix::new(k_nn.clone()).unwrap(),
            &k_sn,
            &CovMatrix::new(k_ss.clone()).unwrap(),
            &vec![0.0; n],
            &k_nn,
        )
        .unwrap();
        for v in &mean {
            assert!(v.abs() < 1e-8);
        }
        for i in 0..m {
            for j in 0..m {
                assert!((cov[(i, j)] - k_ss[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn jacobi_eigenvalues_known_matrix() {
        let a = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let mut eig = sym_eigenvalues(&a);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_match_trace_and_det() {
        let mut rng = Xoshiro256::seed_from(99);
        let a = random_spd(5, &mut rng);
        let eig = sym_eigenvalues(&a);
        let trace: f64 = (0..5).map(|i| a[(i, i)]).sum();
        assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-9 * trace.abs());
        assert!(sym_min_eigenvalue(&a) > 0.0);
    }
}
