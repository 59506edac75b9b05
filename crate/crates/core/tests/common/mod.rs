//! Independent oracles shared by the integration tests and the acceptance
//! target. Each `check_*` returns a one-line detail on success and the first
//! violation on failure.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use jobrec::cf::{build_rating_matrix, train_cf, CfConfig, CfMode, CfModel, N_ITEMS};
use jobrec::classify::{
    fit, logistic_loss_and_gradient, root_split, train_kernel_svm, Algorithm, Hyperparams, NaiveBayes,
};
use jobrec::dimred::truncated_svd;
use jobrec::embed::{train_paragraph_vectors, ParagraphVectorModel, PvConfig, PvExample};
use jobrec::eval::{confusion, precision, recall, ConfusionMatrix};
use jobrec::features::{FeatureMatrix, SparseBinaryMatrix};
use jobrec::linalg::DenseMatrix;
use jobrec::profile::{Example, LabeledDataset, Profile, WorkExperience};
use jobrec::text::{extract_ngrams, tokenize};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- n-grams

pub fn check_ngram_tables() -> Check {
    let tokens = tokenize("Consult, three years \u{2014} Deloitte");
    ensure(tokens == ["consult", "three", "years", "deloitte"], || format!("unigrams {tokens:?}"))?;
    let bigrams = extract_ngrams(&tokens, 2);
    ensure(bigrams == ["consult three", "three years", "years deloitte"], || format!("bigrams {bigrams:?}"))?;
    let trigrams = extract_ngrams(&tokens, 3);
    ensure(trigrams == ["consult three years", "three years deloitte"], || format!("trigrams {trigrams:?}"))?;
    let sw = tokenize("software engineer work in microsoft");
    let tri = extract_ngrams(&sw, 3);
    ensure(
        tri == ["software engineer work", "engineer work in", "work in microsoft"],
        || format!("trigrams {tri:?}"),
    )?;
    Ok("4 unigrams, 3 bigrams, 2 + 3 trigrams match".into())
}

// ---------------------------------------------------------------- SVD

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations,
/// sorted descending.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[i * n + i] * a[i * n + i];
            for j in 0..n {
                if i != j {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Singular values from the eigenvalues of the smaller Gram matrix.
pub fn oracle_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    let small = m.min(n);
    let mut g = vec![0.0; small * small];
    for i in 0..small {
        for j in 0..=i {
            let mut s = 0.0;
            if n <= m {
                for r in 0..m {
                    s += a.row(r)[i] * a.row(r)[j];
                }
            } else {
                for c in 0..n {
                    s += a.row(i)[c] * a.row(j)[c];
                }
            }
            g[i * small + j] = s;
            g[j * small + i] = s;
        }
    }
    symmetric_eigenvalues(g, small).into_iter().map(|e| e.max(0.0).sqrt()).collect()
}

/// Largest `|MᵀM - I|` entry.
pub fn orthonormality_error(m: &DenseMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.cols() {
        for j in 0..m.cols() {
            let mut s = 0.0;
            for r in 0..m.rows() {
                s += m.row(r)[i] * m.row(r)[j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    worst
}

fn frob_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖A - A Q Qᵀ‖_F` for a random orthonormal `n × k` basis `Q`.
fn random_projection_error(a: &DenseMatrix, k: usize, r: &mut ChaCha8Rng) -> f64 {
    let n = a.cols();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut err = 0.0;
    for i in 0..a.rows() {
        let row = a.row(i);
        let mut proj = vec![0.0; n];
        for b in &basis {
            let d: f64 = row.iter().zip(b).map(|(x, y)| x * y).sum();
            proj.iter_mut().zip(b).for_each(|(p, y)| *p += d * y);
        }
        err += row.iter().zip(&proj).map(|(x, p)| (x - p) * (x - p)).sum::<f64>();
    }
    err.sqrt()
}

/// Shapes of the random suite: always one 200 × 200, the rest drawn.
pub fn svd_suite_shapes(seed: u64) -> Vec<(usize, usize)> {
    let mut r = rng(seed);
    let mut shapes = vec![(200, 200)];
    while shapes.len() < 20 {
        shapes.push((r.random_range(2..=200), r.random_range(2..=200)));
    }
    shapes
}

pub fn check_svd_spectrum_and_orthonormality() -> Check {
    let mut r = rng(2);
    let mut worst_rel: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    for (t, (m, n)) in svd_suite_shapes(20).into_iter().enumerate() {
        let a = gaussian_matrix(&mut r, m, n);
        let rank = m.min(n);
        let k = if t % 2 == 0 { rank } else { r.random_range(1..=rank) };
        let svd = truncated_svd(&FeatureMatrix::Dense(a.clone()), k, 7).map_err(|e| e.to_string())?;
        let oracle = oracle_singular_values(&a);
        for i in 0..k {
            let rel = (svd.sigma[i] - oracle[i]).abs() / oracle[i];
            worst_rel = worst_rel.max(rel);
            ensure(rel <= 1e-6, || {
                format!("{m}x{n} k={k}: sigma[{i}] = {} vs oracle {} (rel {rel:.2e})", svd.sigma[i], oracle[i])
            })?;
        }
        let orth = orthonormality_error(&svd.u).max(orthonormality_error(&svd.v));
        worst_orth = worst_orth.max(orth);
        ensure(orth <= 1e-8, || format!("{m}x{n} k={k}: orthonormality error {orth:.2e}"))?;
    }
    Ok(format!("20 matrices, max sigma rel err {worst_rel:.1e}, max |U'U-I|,|V'V-I| {worst_orth:.1e}"))
}

pub fn check_svd_error_monotone() -> Check {
    let mut r = rng(3);
    let mut checked = 0;
    for (m, n) in svd_suite_shapes(30) {
        let a = gaussian_matrix(&mut r, m, n);
        let rank = m.min(n);
        let mut ks: BTreeSet<usize> = (0..6).map(|i| 1 + i * (rank - 1) / 5).collect();
        ks.insert(rank);
        let mut prev = f64::INFINITY;
        for k in ks {
            let svd = truncated_svd(&FeatureMatrix::Dense(a.clone()), k, 11).map_err(|e| e.to_string())?;
            let err = frob_diff(&a, &svd.reconstruct());
            ensure(err <= prev + 1e-9 * a.frobenius_norm(), || {
                format!("{m}x{n}: error {err} at k={k} exceeds {prev} at smaller k")
            })?;
            prev = err;
            checked += 1;
        }
    }
    Ok(format!("{checked} (matrix, k) pairs non-increasing"))
}

pub fn check_eckart_young() -> Check {
    let mut r = rng(4);
    let mut trials = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..20 {
        let a = gaussian_matrix(&mut r, 40, 25);
        for k in [1, 3, 5] {
            let svd = truncated_svd(&FeatureMatrix::Dense(a.clone()), k, 5).map_err(|e| e.to_string())?;
            let best = frob_diff(&a, &svd.reconstruct());
            for _ in 0..50 {
                let other = random_projection_error(&a, k, &mut r);
                min_gap = min_gap.min(other - best);
                ensure(best <= other + 1e-9, || format!("k={k}: svd error {best} > projection error {other}"))?;
                trials += 1;
            }
        }
    }
    Ok(format!("{trials} random projections all worse (min margin {min_gap:.3})"))
}

// ---------------------------------------------------------------- classifiers

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_diff(analytic: &[f64], numeric: &[f64]) -> f64 {
    let d: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&d) / norm(numeric).max(1e-12)
}

/// Worst norm-wise relative error between the analytic LR gradient and
/// central differences, over 5 random points.
pub fn lr_gradient_error() -> f64 {
    let mut r = rng(5);
    let (n, d) = (30, 6);
    let x = FeatureMatrix::Dense(gaussian_matrix(&mut r, n, d));
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let l2 = 0.1;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let w: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let w0: f64 = r.sample(StandardNormal);
        let (_, gw, g0) = logistic_loss_and_gradient(&x, &y, &w, w0, l2);
        let h = 1e-5;
        let mut numeric = Vec::with_capacity(d + 1);
        for j in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let lp = logistic_loss_and_gradient(&x, &y, &wp, w0, l2).0;
            let lm = logistic_loss_and_gradient(&x, &y, &wm, w0, l2).0;
            numeric.push((lp - lm) / (2.0 * h));
        }
        let lp = logistic_loss_and_gradient(&x, &y, &w, w0 + h, l2).0;
        let lm = logistic_loss_and_gradient(&x, &y, &w, w0 - h, l2).0;
        numeric.push((lp - lm) / (2.0 * h));
        let mut analytic = gw;
        analytic.push(g0);
        worst = worst.max(rel_diff(&analytic, &numeric));
    }
    worst
}

/// Tiny corpus the paragraph-vector checks train on.
pub fn pv_corpus() -> Vec<Vec<String>> {
    let docs = [
        "python java sql python java sql data pipeline",
        "python sql data pipeline spark data python",
        "java spring backend java service api java",
        "backend api service spring java api",
        "audit tax ledger audit compliance tax",
        "tax ledger audit compliance ledger report",
    ];
    docs.iter().map(|d| tokenize(d)).collect()
}

fn pv_param(m: &mut ParagraphVectorModel, which: u8, idx: usize) -> &mut f64 {
    match which {
        0 => &mut m.docs[idx],
        1 => &mut m.word_in[idx],
        _ => &mut m.word_out[idx],
    }
}

fn pv_central_difference(m: &mut ParagraphVectorModel, ex: &PvExample, which: u8, idx: usize) -> f64 {
    let h = 1e-6;
    let orig = *pv_param(m, which, idx);
    *pv_param(m, which, idx) = orig + h;
    let lp = m.example_loss(ex);
    *pv_param(m, which, idx) = orig - h;
    let lm = m.example_loss(ex);
    *pv_param(m, which, idx) = orig;
    (lp - lm) / (2.0 * h)
}

/// Worst norm-wise relative error of the PV negative-sampling gradient over
/// 5 random examples; parameters are perturbed one coordinate at a time.
pub fn pv_gradient_error() -> f64 {
    let corpus = pv_corpus();
    let config = PvConfig { dim: 8, window: 2, negative_samples: 3, epochs: 3, learning_rate: 0.05, seed: 9 };
    let mut model = train_paragraph_vectors(&corpus, &config).expect("tiny corpus trains");
    let mut r = rng(6);
    // Move away from the small initial scale so every term matters.
    for v in model.word_in.iter_mut().chain(model.word_out.iter_mut()).chain(model.docs.iter_mut()) {
        *v += 0.3 * r.sample::<f64, _>(StandardNormal);
    }
    let vocab = model.vocab.len();
    let dim = model.dim;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let ex = PvExample {
            doc: r.random_range(0..model.n_docs()),
            context: (0..4).map(|_| r.random_range(0..vocab)).collect(),
            center: r.random_range(0..vocab),
            negatives: (0..3).map(|_| r.random_range(0..vocab)).collect(),
        };
        let g = model.example_gradient(&ex);
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for k in 0..dim {
            analytic.push(g.doc[k]);
            numeric.push(pv_central_difference(&mut model, &ex, 0, ex.doc * dim + k));
        }
        let mut words: BTreeSet<usize> = ex.context.iter().copied().collect();
        words.insert(ex.center);
        words.extend(&ex.negatives);
        for &w in &words {
            for k in 0..dim {
                analytic.push(g.word_in.get(&w).map_or(0.0, |v| v[k]));
                numeric.push(pv_central_difference(&mut model, &ex, 1, w * dim + k));
                analytic.push(g.word_out.get(&w).map_or(0.0, |v| v[k]));
                numeric.push(pv_central_difference(&mut model, &ex, 2, w * dim + k));
            }
        }
        worst = worst.max(rel_diff(&analytic, &numeric));
    }
    worst
}

pub fn check_gradients() -> Check {
    let lr = lr_gradient_error();
    ensure(lr <= 1e-5, || format!("logistic gradient rel err {lr:.2e}"))?;
    let pv = pv_gradient_error();
    ensure(pv <= 1e-5, || format!("paragraph-vector gradient rel err {pv:.2e}"))?;
    Ok(format!("LR rel err {lr:.1e}, PV rel err {pv:.1e}"))
}

/// Dense dual C-SVM by projected gradient descent. Returns the decision
/// values `Σ α_j y_j K_ij + b` at the training points.
pub fn dual_qp_decision_values(kernel: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let n = y.len();
    let q: Vec<f64> = (0..n * n).map(|k| y[k / n] * y[k % n] * kernel[k]).collect();
    let trace: f64 = (0..n).map(|i| q[i * n + i]).sum();
    let step = 1.0 / trace;
    let project = |v: &[f64]| -> Vec<f64> {
        // Σ y_i clip(v_i - τ y_i) is non-increasing in τ.
        let g = |tau: f64| -> f64 { (0..n).map(|i| y[i] * (v[i] - tau * y[i]).clamp(0.0, c)).sum() };
        let (mut lo, mut hi) = (-1e3, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        (0..n).map(|i| (v[i] - tau * y[i]).clamp(0.0, c)).collect()
    };
    let mut alpha = vec![0.0; n];
    for _ in 0..500_000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * alpha[j]).sum::<f64>() - 1.0).collect();
        let moved: Vec<f64> = (0..n).map(|i| alpha[i] - step * grad[i]).collect();
        let next = project(&moved);
        let delta = next.iter().zip(&alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        alpha = next;
        if delta < 1e-15 {
            break;
        }
    }
    let raw: Vec<f64> = (0..n).map(|i| (0..n).map(|j| alpha[j] * y[j] * kernel[i * n + j]).sum()).collect();
    let eps = 1e-7 * c;
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > eps && alpha[i] < c - eps).collect();
    let b = if free.is_empty() {
        // Midpoint of the interval the KKT conditions leave for b.
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let bound = y[i] - raw[i];
            let at_zero = alpha[i] <= eps;
            if (y[i] > 0.0) == at_zero {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
        0.5 * (lo + hi)
    } else {
        free.iter().map(|&i| y[i] - raw[i]).sum::<f64>() / free.len() as f64
    };
    raw.iter().map(|v| v + b).collect()
}

/// The 12-point problem: two overlapping blobs, so some multipliers sit at C.
pub fn smo_fixture() -> (DenseMatrix, Vec<u8>) {
    let mut r = rng(12);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..12 {
        let label = (i % 2) as u8;
        let centre = if label == 1 { 0.6 } else { -0.6 };
        rows.push(vec![
            centre + r.sample::<f64, _>(StandardNormal),
            centre + r.sample::<f64, _>(StandardNormal),
        ]);
        y.push(label);
    }
    (DenseMatrix::from_rows(&rows).unwrap(), y)
}

/// Worst absolute gap between SMO and dual-QP decision values on the
/// 12-point fixture, with the number of multipliers at the bound C.
pub fn smo_vs_qp() -> (f64, usize) {
    let (x, y) = smo_fixture();
    let (gamma, c) = (0.5, 1.0);
    let n = y.len();
    let kernel: Vec<f64> = (0..n * n)
        .map(|k| {
            let (a, b) = (x.row(k / n), x.row(k % n));
            let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            (-gamma * d).exp()
        })
        .collect();
    let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let oracle = dual_qp_decision_values(&kernel, &ys, c);
    let fm = FeatureMatrix::Dense(x);
    let mut hp = Hyperparams::new(Algorithm::KernelSvmC);
    hp.c = c;
    hp.rbf_gamma = Some(gamma);
    hp.smo_tolerance = 1e-6;
    let svm = train_kernel_svm(&fm, &y, &hp).expect("SMO trains");
    let at_c = svm.coef.iter().filter(|a| (a.abs() - c).abs() < 1e-9).count();
    let worst = (0..n).map(|i| (svm.decision_value(&fm.row(i)) - oracle[i]).abs()).fold(0.0, f64::max);
    (worst, at_c)
}

pub fn check_smo() -> Check {
    let (gap, at_c) = smo_vs_qp();
    ensure(gap <= 1e-3, || format!("decision values differ by {gap:.2e}"))?;
    Ok(format!("12 points, max |f_smo - f_qp| {gap:.1e}, {at_c} multipliers at C"))
}

fn gini(pos: usize, total: usize) -> f64 {
    let p = pos as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Exhaustive `(feature, midpoint)` search; best gain, then lowest feature,
/// then lowest threshold.
pub fn exhaustive_root_split(x: &DenseMatrix, y: &[u8]) -> Option<(usize, f64, f64)> {
    let n = y.len();
    let pos = y.iter().filter(|&&l| l == 1).count();
    let parent = gini(pos, n);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.cols() {
        let values: BTreeSet<u64> = (0..n).map(|i| x.row(i)[f].to_bits()).collect();
        let mut sorted: Vec<f64> = values.into_iter().map(f64::from_bits).collect();
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let left: Vec<usize> = (0..n).filter(|&i| x.row(i)[f] <= t).collect();
            let lp = left.iter().filter(|&&i| y[i] == 1).count();
            let (nl, nr) = (left.len(), n - left.len());
            let child = (nl as f64 * gini(lp, nl) + nr as f64 * gini(pos - lp, nr)) / n as f64;
            let gain = parent - child;
            let better = match best {
                None => true,
                Some((bf, bt, bg)) => gain > bg + 1e-12 || (gain >= bg - 1e-12 && (f, t) < (bf, bt)),
            };
            if better {
                best = Some((f, t, gain));
            }
        }
    }
    best
}

pub fn check_cart_root_split() -> Check {
    let mut r = rng(13);
    for trial in 0..20 {
        // Two continuous and two small-integer features, so ties and
        // repeated values both occur.
        let x = DenseMatrix::from_fn(20, 4, |_, j| {
            if j < 2 {
                r.random::<f64>()
            } else {
                f64::from(r.random_range(0..4u8))
            }
        });
        let y: Vec<u8> = (0..20).map(|i| if i < 2 { i as u8 } else { r.random_range(0..2u8) }).collect();
        let ours = root_split(&FeatureMatrix::Dense(x.clone()), &y).map_err(|e| e.to_string())?;
        let oracle = exhaustive_root_split(&x, &y);
        match (ours, oracle) {
            (Some(s), Some((f, t, g))) => ensure(
                s.feature == f && s.threshold == t && (s.gain - g).abs() <= 1e-12,
                || format!("trial {trial}: ({}, {}, {}) vs oracle ({f}, {t}, {g})", s.feature, s.threshold, s.gain),
            )?,
            (None, None) => {}
            (a, b) => return Err(format!("trial {trial}: {a:?} vs oracle {b:?}")),
        }
    }
    Ok("20 random 20x4 fixtures agree on feature, threshold and gain".into())
}

/// The 6-example, 2-feature binary fixture.
pub fn nb_fixture() -> (Vec<[u8; 2]>, Vec<u8>) {
    (vec![[1, 0], [1, 1], [0, 1], [1, 0], [0, 0], [0, 1]], vec![1, 1, 1, 0, 0, 0])
}

/// `P(y = 1 | x)` by Bayes' rule with add-one smoothed per-feature
/// probabilities, enumerated over the four binary inputs.
pub fn nb_enumerated_posteriors() -> Vec<([u8; 2], f64)> {
    let (x, y) = nb_fixture();
    let mut out = Vec::new();
    for q in [[0, 0], [0, 1], [1, 0], [1, 1]] {
        let mut joint = [0.0; 2];
        for c in 0..2u8 {
            let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
            let mut p = members.len() as f64 / y.len() as f64;
            for j in 0..2 {
                let ones = members.iter().filter(|&&i| x[i][j] == 1).count() as f64;
                let theta = (ones + 1.0) / (members.len() as f64 + 2.0);
                p *= if q[j] == 1 { theta } else { 1.0 - theta };
            }
            joint[c as usize] = p;
        }
        out.push((q, joint[1] / (joint[0] + joint[1])));
    }
    out
}

pub fn check_naive_bayes() -> Check {
    let (x, y) = nb_fixture();
    let rows: Vec<Vec<u32>> = x.iter().map(|r| (0..2).filter(|&j| r[j] == 1).map(|j| j as u32).collect()).collect();
    let fm = FeatureMatrix::Sparse(SparseBinaryMatrix::from_rows(rows, 2).unwrap());
    let nb = NaiveBayes::fit(&fm, &y).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (q, expected) in nb_enumerated_posteriors() {
        let cols: Vec<u32> = (0..2).filter(|&j| q[j] == 1).map(|j| j as u32).collect();
        let qm = FeatureMatrix::Sparse(SparseBinaryMatrix::from_rows(vec![cols], 2).unwrap());
        let posterior = 1.0 / (1.0 + (-nb.log_odds(&qm.row(0))).exp());
        worst = worst.max((posterior - expected).abs());
        ensure((posterior - expected).abs() <= 1e-12, || format!("x={q:?}: {posterior} vs {expected}"))?;
    }
    Ok(format!("4 inputs, max posterior gap {worst:.1e}"))
}

pub fn xor() -> (FeatureMatrix, Vec<u8>) {
    let x = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    (FeatureMatrix::Dense(x), vec![0, 0, 1, 1])
}

fn train_accuracy(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<f64, String> {
    let model = fit(x, y, hp).map_err(|e| e.to_string())?;
    let pred = model.predict(x).map_err(|e| e.to_string())?;
    Ok(pred.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64)
}

pub fn check_xor() -> Check {
    let (x, y) = xor();
    let mut rbf = Hyperparams::new(Algorithm::KernelSvmC);
    rbf.c = 10.0;
    rbf.rbf_gamma = Some(1.0);
    let rbf_acc = train_accuracy(&x, &y, &rbf)?;
    let lin_acc = train_accuracy(&x, &y, &Hyperparams::new(Algorithm::LinearSvm))?;
    ensure(rbf_acc == 1.0, || format!("RBF SVM train accuracy {rbf_acc}"))?;
    ensure(lin_acc <= 0.75, || format!("linear SVM train accuracy {lin_acc}"))?;
    Ok(format!("RBF accuracy {rbf_acc}, linear accuracy {lin_acc}"))
}

// ---------------------------------------------------------------- metrics

pub fn check_metrics() -> Check {
    let mut r = rng(14);
    for trial in 0..1000 {
        let n = r.random_range(1..200);
        let pred: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let truth: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            match (pred[i], truth[i]) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 0) => tn += 1,
                _ => fn_ += 1,
            }
        }
        let cm = confusion(&pred, &truth).map_err(|e| e.to_string())?;
        ensure(cm == ConfusionMatrix { tp, fp, tn, fn_ }, || format!("trial {trial}: {cm:?}"))?;
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rc = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        ensure(precision(&cm) == p && recall(&cm) == rc, || format!("trial {trial}: ratios"))?;
    }
    let worked = ConfusionMatrix { tp: 9, fp: 1, tn: 0, fn_: 0 };
    ensure(precision(&worked) == 0.9, || format!("tp=9 fp=1 precision {}", precision(&worked)))?;
    let truth = [1, 0, 1, 1, 0];
    let perfect = confusion(&truth, &truth).map_err(|e| e.to_string())?;
    ensure(precision(&perfect) == 1.0 && recall(&perfect) == 1.0, || "perfect classifier".into())?;
    Ok("1000 random vectors, worked values exact".into())
}

// ---------------------------------------------------------------- CF

/// `r̂_ui` with every sum materialized from scratch.
pub fn direct_prediction(m: &CfModel, u: usize, i: usize) -> f64 {
    let f = m.factors;
    let p = &m.params;
    let fb = &m.feedback[u];
    let mut user = vec![0.0; f];
    if m.mode == CfMode::SvdPp {
        user.copy_from_slice(&p.p[u * f..(u + 1) * f]);
    }
    if !fb.is_empty() {
        let scale = 1.0 / (fb.len() as f64).sqrt();
        let mut implicit = vec![0.0; f];
        let mut explicit = vec![0.0; f];
        for &(j, rating) in fb {
            let baseline = m.mu + p.b_user[u] + p.b_item[j];
            for k in 0..f {
                implicit[k] += p.y[j * f + k];
                if m.mode == CfMode::AsvdPp {
                    explicit[k] += (rating - baseline) * p.x[j * f + k];
                }
            }
        }
        for k in 0..f {
            user[k] += scale * implicit[k] + scale * explicit[k];
        }
    }
    let mut dot = 0.0;
    for k in 0..f {
        dot += p.q[i * f + k] * user[k];
    }
    m.mu + p.b_user[u] + p.b_item[i] + dot
}

/// Random 4-user model over the first 3 items; user 3 has no feedback.
pub fn cf_fixture(mode: CfMode, seed: u64) -> CfModel {
    let mut r = rng(seed);
    let mut m = CfModel::zeros(mode, 3, 4, 0.4);
    for (_, v) in m.params.fields_mut() {
        v.iter_mut().for_each(|e| *e = r.random_range(-1.0..1.0));
    }
    m.feedback = vec![
        vec![(0, 2.0), (1, -1.0), (2, 1.0)],
        vec![(1, 2.0)],
        vec![(0, -1.0), (2, 2.0)],
        vec![],
    ];
    m
}

pub fn random_ratings(r: &mut ChaCha8Rng, users: usize) -> jobrec::cf::RatingMatrix {
    let mut ratings = Vec::new();
    for u in 0..users {
        for item in 0..N_ITEMS {
            if r.random_bool(0.6) {
                let value = [-1i8, 1, 2][r.random_range(0..3)];
                ratings.push(jobrec::cf::Rating { user: u, item, value });
            }
        }
    }
    jobrec::cf::RatingMatrix {
        user_ids: (0..users).map(|u| format!("u{u}")).collect(),
        ratings,
        labels: vec![0; users],
        train_users: (0..users).collect(),
        test_users: Vec::new(),
    }
}

const TITLES: [&str; 4] = ["software engineer", "consultant", "Software  Engineer", "data scientist"];

/// A random profile with each past slot independently empty, blank-titled
/// or filled with a random title and optional duration.
pub fn random_slot_profile(r: &mut ChaCha8Rng, id: usize) -> Profile {
    let mut p = Profile { id: format!("p{id}"), ..Profile::default() };
    for slot in p.past_jobs.iter_mut() {
        *slot = match r.random_range(0..6) {
            0 => None,
            1 => Some(WorkExperience { job_title: "  ".into(), ..WorkExperience::default() }),
            _ => Some(WorkExperience {
                job_title: TITLES[r.random_range(0..TITLES.len())].into(),
                duration_months: if r.random_bool(0.8) { Some(r.random_range(0..120)) } else { None },
                ..WorkExperience::default()
            }),
        };
    }
    p
}

/// The three slot rules, restated: same title and at least 36 months rates
/// 2, same title otherwise 1, any other title -1.
pub fn brute_force_slot_ratings(p: &Profile, target: &str) -> BTreeMap<usize, i8> {
    let canon = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let mut out = BTreeMap::new();
    for (item, slot) in p.past_jobs.iter().enumerate() {
        let Some(job) = slot else { continue };
        if job.job_title.trim().is_empty() {
            continue;
        }
        let rating = if canon(&job.job_title) != canon(target) {
            -1
        } else {
            match job.duration_months {
                Some(m) if m >= 36 => 2,
                _ => 1,
            }
        };
        out.insert(item, rating);
    }
    out
}

pub fn check_cf() -> Check {
    let mut worst: f64 = 0.0;
    for mode in CfMode::ALL {
        let m = cf_fixture(mode, 15);
        for u in 0..4 {
            for i in 0..3 {
                let gap = (m.predict_rating(u, i) - direct_prediction(&m, u, i)).abs();
                worst = worst.max(gap);
                ensure(gap <= 1e-12, || format!("{mode} u={u} i={i}: gap {gap:e}"))?;
            }
        }
    }

    let single = jobrec::cf::RatingMatrix {
        user_ids: vec!["u0".into()],
        ratings: vec![jobrec::cf::Rating { user: 0, item: 0, value: 2 }],
        labels: vec![1],
        train_users: vec![0],
        test_users: Vec::new(),
    };
    for mode in CfMode::ALL {
        let cfg = CfConfig { factors: 1, epochs: 200, ..CfConfig::new(mode) };
        let m = train_cf(&single, &cfg).map_err(|e| e.to_string())?;
        let pred = m.predict_rating(0, 0);
        ensure((pred - 2.0).abs() <= 0.05, || format!("{mode} single cell predicts {pred}"))?;
    }

    let mut r = rng(16);
    let matrix = random_ratings(&mut r, 30);
    for mode in CfMode::ALL {
        let cfg = CfConfig { epochs: 5, ..CfConfig::new(mode) };
        let a = train_cf(&matrix, &cfg).map_err(|e| e.to_string())?;
        let b = train_cf(&matrix, &cfg).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{mode} training is not deterministic"))?;
    }

    let targets = ["software engineer", "consultant"];
    let mut slots = 0;
    for t in 0..1000 {
        let p = random_slot_profile(&mut r, t);
        let target = targets[t % 2];
        let dataset = LabeledDataset {
            target_title: target.into(),
            examples: vec![Example { profile_index: 0, label: 0 }],
            split: None,
        };
        let m = build_rating_matrix(std::slice::from_ref(&p), &dataset, target).map_err(|e| e.to_string())?;
        let ours: BTreeMap<usize, i8> =
            m.ratings.iter().filter(|x| x.item < N_ITEMS - 1).map(|x| (x.item, x.value)).collect();
        let expected = brute_force_slot_ratings(&p, target);
        ensure(ours == expected, || format!("profile {t}: {ours:?} vs {expected:?}"))?;
        slots += expected.len();
    }
    Ok(format!("formula gap {worst:.1e}, single-cell fit, determinism, {slots} slot ratings over 1000 profiles"))
}
