//! Truncated SVD of feature matrices and projection onto the leading right
//! singular vectors.
//!
//! Large inputs use a randomized range finder (Gaussian sketch with
//! oversampling, power iterations re-orthonormalized at every step) followed
//! by an exact Jacobi SVD of the small projected matrix. Inputs small enough
//! for the exact solver, or whose sketch would already span the whole range,
//! go straight to the exact solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{jacobi_svd, orthonormalize, DenseMatrix};
use crate::tensor::{Tensor, TensorFile};

pub const DEFAULT_K: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdBackend {
    /// Exact for inputs with at most `EXACT_LIMIT` entries or when the sketch
    /// would cover the full rank; randomized otherwise.
    Auto,
    Randomized,
    Exact,
}

/// Entry count up to which [`SvdBackend::Auto`] uses the exact solver.
pub const EXACT_LIMIT: usize = 200 * 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdOptions {
    pub oversampling: usize,
    pub power_iterations: usize,
    pub backend: SvdBackend,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversampling: 10,
            power_iterations: 4,
            backend: SvdBackend::Auto,
        }
    }
}

/// Rank-k factors `A ≈ U diag(sigma) Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub k: usize,
    /// n_rows × k
    pub u: DenseMatrix,
    /// non-increasing, non-negative
    pub sigma: Vec<f64>,
    /// n_cols × k
    pub v: DenseMatrix,
}

impl SvdResult {
    /// `U diag(sigma) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("factor shapes agree")
    }

    pub fn to_tensors(&self) -> TensorFile {
        let mut f = TensorFile::default();
        f.push("u", Tensor::matrix(&self.u));
        f.push("sigma", Tensor::vector(&self.sigma));
        f.push("v", Tensor::matrix(&self.v));
        f
    }

    pub fn from_tensors(f: &TensorFile) -> Result<Self> {
        let u = f.get("u")?.to_matrix()?;
        let sigma = f.get("sigma")?.as_f64()?.to_vec();
        let v = f.get("v")?.to_matrix()?;
        if u.cols() != sigma.len() || v.cols() != sigma.len() {
            return Err(Error::Format("inconsistent SVD factor shapes".into()));
        }
        Ok(SvdResult {
            k: sigma.len(),
            u,
            sigma,
            v,
        })
    }
}

pub fn truncated_svd(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<SvdResult> {
    truncated_svd_with(matrix, k, seed, SvdOptions::default())
}

pub fn truncated_svd_with(
    matrix: &FeatureMatrix,
    k: usize,
    seed: u64,
    opts: SvdOptions,
) -> Result<SvdResult> {
    let (m, n) = (matrix.n_rows(), matrix.n_cols());
    let r = m.min(n);
    if k == 0 || k > r {
        return Err(Error::invalid(format!(
            "k = {k} out of range 1..={r} for a {m}x{n} matrix"
        )));
    }
    let sketch = (k + opts.oversampling).min(r);
    let exact = match opts.backend {
        SvdBackend::Exact => true,
        SvdBackend::Randomized => false,
        SvdBackend::Auto => sketch >= r || m * n <= EXACT_LIMIT,
    };
    let (u, sigma, v) = if exact {
        let full = jacobi_svd(&matrix.to_dense());
        (full.u, full.sigma, full.v)
    } else {
        randomized(matrix, sketch, opts.power_iterations, seed)?
    };

    let mut out = SvdResult {
        k,
        u: DenseMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        sigma: sigma[..k].to_vec(),
        v: DenseMatrix::from_fn(n, k, |i, j| v[(i, j)]),
    };
    fix_signs(&mut out);
    Ok(out)
}

fn orthonormal_columns(m: &DenseMatrix) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| m.column(j)).collect();
    orthonormalize(&mut cols);
    let mut q = DenseMatrix::zeros(m.rows(), m.cols());
    for (j, c) in cols.iter().enumerate() {
        q.set_column(j, c);
    }
    q
}

fn randomized(
    a: &FeatureMatrix,
    sketch: usize,
    power_iterations: usize,
    seed: u64,
) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DenseMatrix::from_fn(a.n_cols(), sketch, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormal_columns(&a.mul_dense(&omega)?);
    for _ in 0..power_iterations {
        let z = orthonormal_columns(&a.t_mul_dense(&q)?);
        q = orthonormal_columns(&a.mul_dense(&z)?);
    }
    // B = Qᵀ A, held transposed (n × sketch).
    let bt = a.t_mul_dense(&q)?;
    let small = jacobi_svd(&bt);
    // Bᵀ = W Σ Zᵀ  =>  A ≈ Q Z Σ Wᵀ.
    let u = q.matmul(&small.v)?;
    Ok((u, small.sigma, small.u))
}

/// Flips factor pairs so each V column's largest-magnitude entry is positive.
fn fix_signs(svd: &mut SvdResult) {
    for j in 0..svd.k {
        let col = svd.v.column(j);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |(bi, bv), (i, &x)| {
                if x.abs() > bv.abs() {
                    (i, x)
                } else {
                    (bi, bv)
                }
            })
            .1;
        if pivot < 0.0 {
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
            for i in 0..svd.u.rows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
        }
    }
}

/// Maps rows into the k-dimensional space: `X · V`.
pub fn project(matrix: &FeatureMatrix, svd: &SvdResult) -> Result<DenseMatrix> {
    if matrix.n_cols() != svd.v.rows() {
        return Err(Error::DimensionMismatch {
            expected: svd.v.rows(),
            got: matrix.n_cols(),
        });
    }
    matrix.mul_dense(&svd.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SparseBinaryMatrix;

    fn dense(m: DenseMatrix) -> FeatureMatrix {
        FeatureMatrix::Dense(m)
    }

    #[test]
    fn identity_spectrum() {
        let s = truncated_svd(&dense(DenseMatrix::identity(5)), 5, 1).unwrap();
        for &x in &s.sigma {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one() {
        let u = [0.6, 0.8, 0.0];
        let v = [0.0, 1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let a = DenseMatrix::from_fn(3, 4, |i, j| 7.0 * u[i] * v[j]);
        let s = truncated_svd(&dense(a), 2, 3).unwrap();
        assert!((s.sigma[0] - 7.0).abs() < 1e-12);
        assert!(s.sigma[1].abs() < 1e-8);
    }

    #[test]
    fn k_out_of_range() {
        let a = dense(DenseMatrix::identity(3));
        assert!(truncated_svd(&a, 0, 1).is_err());
        assert!(truncated_svd(&a, 4, 1).is_err());
    }

    #[test]
    fn zero_matrix() {
        for backend in [SvdBackend::Exact, SvdBackend::Randomized] {
            let opts = SvdOptions { backend, ..Default::default() };
            let s = truncated_svd_with(&dense(DenseMatrix::zeros(30, 20)), 3, 1, opts).unwrap();
            assert!(s.sigma.iter().all(|&x| x == 0.0));
            let g = s.v.t_matmul(&s.v).unwrap();
            let e = g.sub(&DenseMatrix::identity(3)).unwrap();
            assert!(e.frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn projection_of_training_matrix_is_u_sigma() {
        let sp = SparseBinaryMatrix::from_rows(
            (0..40).map(|i| (0..25u32).filter(|j| (i * 7 + j * 3) % 5 == 0).collect()).collect(),
            25,
        )
        .unwrap();
        let x = FeatureMatrix::Sparse(sp);
        let opts = SvdOptions { backend: SvdBackend::Randomized, ..Default::default() };
        let s = truncated_svd_with(&x, 3, 9, opts).unwrap();
        let p = project(&x, &s).unwrap();
        for i in 0..40 {
            for j in 0..3 {
                assert!((p[(i, j)] - s.u[(i, j)] * s.sigma[j]).abs() < 1e-8);
            }
        }
        let zero = FeatureMatrix::Sparse(SparseBinaryMatrix::from_rows(vec![vec![]], 25).unwrap());
        assert!(project(&zero, &s).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let wrong = FeatureMatrix::Dense(DenseMatrix::zeros(1, 24));
        assert!(project(&wrong, &s).is_err());
    }

    #[test]
    fn sign_convention_and_serialization() {
        let a = DenseMatrix::from_fn(12, 9, |i, j| ((i * 5 + j * 11) % 13) as f64 - 6.0);
        let s = truncated_svd(&dense(a), 4, 2).unwrap();
        for j in 0..4 {
            let col = s.v.column(j);
            let m = col.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(m > 0.0);
        }
        let back = SvdResult::from_tensors(&s.to_tensors()).unwrap();
        assert_eq!(back, s);
    }
}
