//! Support vector machines: a primal linear SVM trained by Pegasos-style
//! subgradient descent, and an RBF-kernel SVM whose dual is solved by SMO
//! with maximal-violating-pair selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_labels, read_feature_matrix, write_feature_matrix, Algorithm, Hyperparams};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Row};
use crate::tensor::{Tensor, TensorFile};

#[inline]
fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `lambda/2 ‖w‖² + mean hinge`, the bias counted as a regular weight.
pub fn linear_svm_objective(x: &FeatureMatrix, y: &[u8], w: &[f64], w0: f64, lambda: f64) -> f64 {
    let hinge: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &l)| (1.0 - signed(l) * (w0 + x.row(i).dot(w))).max(0.0))
        .sum();
    let sq = w.iter().map(|v| v * v).sum::<f64>() + w0 * w0;
    0.5 * lambda * sq + hinge / y.len() as f64
}

/// Pegasos: one sample per step, step size `1 / (lambda t)`, projection onto
/// the ball of radius `1 / sqrt(lambda)`. The bias is an extra constant
/// feature. Each epoch visits the samples in a fresh seeded permutation.
pub fn train_linear_svm(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<(Vec<f64>, f64)> {
    check_labels(x, y)?;
    let lambda = hp.svm_lambda;
    if !(lambda > 0.0) {
        return Err(Error::invalid("svm_lambda must be positive"));
    }
    let d = x.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    // w = scale * v, with v[d] the bias weight.
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0;
    let mut v_sq = 0.0;
    let radius_sq = 1.0 / lambda;
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut t = 0u64;
    for _ in 0..hp.svm_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let yi = signed(y[i]);
            let margin = yi * scale * (row.dot(&v[..d]) + v[d]);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|e| *e = 0.0);
                scale = 1.0;
                v_sq = 0.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let a = eta * yi / scale;
                let cross = row.dot(&v[..d]) + v[d];
                row.axpy(a, &mut v[..d]);
                v[d] += a;
                v_sq += 2.0 * a * cross + a * a * (row.sq_norm() + 1.0);
            }
            let w_sq = scale * scale * v_sq;
            if w_sq > radius_sq {
                scale *= (radius_sq / w_sq).sqrt();
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|e| *e *= scale);
                v_sq *= scale * scale;
                scale = 1.0;
            }
        }
    }
    let w: Vec<f64> = v[..d].iter().map(|e| e * scale).collect();
    Ok((w, v[d] * scale))
}

/// `exp(-gamma ‖x - z‖²)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let d: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d).exp())
}

#[inline]
fn rbf_rows(a: &Row<'_>, b: &Row<'_>, a_sq: f64, b_sq: f64, gamma: f64) -> f64 {
    let d = (a_sq + b_sq - 2.0 * a.dot_row(b)).max(0.0);
    (-gamma * d).exp()
}

/// A trained RBF-kernel SVM: `f(x) = Σ coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSvm {
    pub support_vectors: FeatureMatrix,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    /// The C the dual was solved with (searched in ν mode).
    pub c: f64,
    /// Fraction of training points that are support vectors.
    pub sv_fraction: f64,
    /// ν mode only: no C reached the requested support-vector fraction.
    pub nu_unreachable: bool,
}

impl KernelSvm {
    pub fn decision_value(&self, row: &Row<'_>) -> f64 {
        let r_sq = row.sq_norm();
        let mut s = 0.0;
        for (k, &c) in self.coef.iter().enumerate() {
            let sv = self.support_vectors.row(k);
            s += c * rbf_rows(&sv, row, sv.sq_norm(), r_sq, self.gamma);
        }
        s - self.rho
    }

    pub(crate) fn write_tensors(&self, f: &mut TensorFile) {
        write_feature_matrix(f, "sv", &self.support_vectors);
        f.push("coef", Tensor::vector(&self.coef));
        f.push(
            "scalars",
            Tensor::vector(&[
                self.rho,
                self.gamma,
                self.c,
                self.sv_fraction,
                f64::from(u8::from(self.nu_unreachable)),
            ]),
        );
    }

    pub(crate) fn read_tensors(f: &TensorFile) -> Result<Self> {
        let s = f.get("scalars")?.as_f64()?;
        if s.len() != 5 {
            return Err(Error::Format("kernel SVM scalars".into()));
        }
        Ok(KernelSvm {
            support_vectors: read_feature_matrix(f, "sv")?,
            coef: f.get("coef")?.as_f64()?.to_vec(),
            rho: s[0],
            gamma: s[1],
            c: s[2],
            sv_fraction: s[3],
            nu_unreachable: s[4] != 0.0,
        })
    }
}

/// Raw result of one SMO solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoOutcome {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn gram_matrix(x: &FeatureMatrix, gamma: f64) -> Vec<f64> {
    let n = x.n_rows();
    let sq: Vec<f64> = (0..n).map(|i| x.row(i).sq_norm()).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        let ri = x.row(i);
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf_rows(&ri, &x.row(j), sq[i], sq[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Solves `min ½ αᵀQα − Σα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`, with
/// `Q_ij = y_i y_j K_ij`, by SMO on the maximal violating pair.
pub fn smo_solve(kernel: &[f64], y: &[u8], c: f64, tol: f64, max_iters: usize) -> SmoOutcome {
    let n = y.len();
    let ys: Vec<f64> = y.iter().map(|&l| signed(l)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| ys[i] * ys[j] * kernel[i * n + j];
    const TAU: f64 = 1e-12;

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if in_up(alpha[t], ys[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], ys[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoOutcome {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Trains in C mode (`hp.c`) or ν mode.
///
/// ν mode searches C by bisection in log space (20 steps over
/// `[1e-4, 1e4]`) for a support-vector fraction within 0.05 of `hp.nu`.
/// When none gets there, the closest solve is returned with
/// [`KernelSvm::nu_unreachable`] set.
pub fn train_kernel_svm(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<KernelSvm> {
    check_labels(x, y)?;
    hp.validate()?;
    let gamma = hp.rbf_gamma.unwrap_or(1.0 / x.n_cols().max(1) as f64);
    let kernel = gram_matrix(x, gamma);
    let n = y.len();
    let solve = |c: f64| {
        let out = smo_solve(&kernel, y, c, hp.smo_tolerance, hp.smo_max_iters);
        if !out.converged {
            log::warn!("SMO stopped at the iteration cap ({}) with C = {c}", hp.smo_max_iters);
        }
        let frac = out.alpha.iter().filter(|&&a| a > 0.0).count() as f64 / n as f64;
        (out, frac)
    };

    let (outcome, c, frac, unreachable) = match hp.algorithm {
        Algorithm::KernelSvmNu => {
            let (mut lo, mut hi) = (1e-4f64.ln(), 1e4f64.ln());
            let mut best: Option<(SmoOutcome, f64, f64)> = None;
            let mut hit = false;
            for _ in 0..20 {
                let mid = 0.5 * (lo + hi);
                let c = mid.exp();
                let (out, frac) = solve(c);
                let gap = (frac - hp.nu).abs();
                let better = best.as_ref().is_none_or(|(_, _, f)| gap < (f - hp.nu).abs());
                if better {
                    best = Some((out, c, frac));
                }
                if gap <= 0.05 {
                    hit = true;
                    break;
                }
                // Larger C leaves fewer points at or inside the margin.
                if frac > hp.nu {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (out, c, frac) = best.expect("at least one solve");
            if !hit {
                log::debug!("nu = {} unreachable; closest support-vector fraction {frac}", hp.nu);
            }
            (out, c, frac, !hit)
        }
        _ => {
            let (out, frac) = solve(hp.c);
            (out, hp.c, frac, false)
        }
    };

    let sv: Vec<usize> = (0..n).filter(|&i| outcome.alpha[i] > 0.0).collect();
    Ok(KernelSvm {
        support_vectors: x.select_rows(&sv),
        coef: sv.iter().map(|&i| outcome.alpha[i] * signed(y[i])).collect(),
        rho: outcome.rho,
        gamma,
        c,
        sv_fraction: frac,
        nu_unreachable: unreachable,
    })
}
