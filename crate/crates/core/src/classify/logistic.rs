use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_labels, sigmoid, Hyperparams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// log(1 + e^z) without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `(l2 / 2)‖w‖²` (intercept unpenalized), with its
/// gradient `(dw, dw0)`.
pub fn logistic_loss_and_gradient(
    x: &FeatureMatrix,
    y: &[u8],
    w: &[f64],
    w0: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    let mut grad0 = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let row = x.row(i);
        let z = w0 + row.dot(w);
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let r = (sigmoid(z) - t) / n;
        row.axpy(r, &mut grad);
        grad0 += r;
    }
    loss /= n;
    let mut sq = 0.0;
    for (g, &wi) in grad.iter_mut().zip(w) {
        *g += l2 * wi;
        sq += wi * wi;
    }
    (loss + 0.5 * l2 * sq, grad, grad0)
}

/// Full-batch gradient descent; returns `(w, w0)`.
///
/// The step is `min(learning_rate, 1 / L)` with `L` the smoothness bound
/// `(max‖x‖² + 1) / 4 + l2`, so every update decreases the objective.
pub fn train_logistic_regression(
    x: &FeatureMatrix,
    y: &[u8],
    hp: &Hyperparams,
) -> Result<(Vec<f64>, f64)> {
    let (w, w0, _) = train_logistic_regression_traced(x, y, hp)?;
    Ok((w, w0))
}

/// As [`train_logistic_regression`], also returning the objective evaluated
/// before each update.
pub fn train_logistic_regression_traced(
    x: &FeatureMatrix,
    y: &[u8],
    hp: &Hyperparams,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    check_labels(x, y)?;
    let mut w = vec![0.0; x.n_cols()];
    let mut w0 = 0.0;
    let mut trace = Vec::new();
    let max_sq = (0..x.n_rows()).map(|i| x.row(i).sq_norm()).fold(0.0, f64::max);
    let smoothness = 0.25 * (max_sq + 1.0) + hp.l2_strength;
    let step = hp.learning_rate.min(1.0 / smoothness);
    for _ in 0..hp.max_iters {
        let (loss, grad, grad0) = logistic_loss_and_gradient(x, y, &w, w0, hp.l2_strength);
        trace.push(loss);
        let gmax = grad.iter().fold(grad0.abs(), |m, g| m.max(g.abs()));
        if gmax < hp.tolerance {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= step * gi;
        }
        w0 -= step * grad0;
    }
    Ok((w, w0, trace))
}

/// Assigns each example a fold in `0..k`, stratified by label and
/// deterministic per seed.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0usize; y.len()];
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    fold
}

/// Picks the L2 strength from `hp.l2_grid` with the best mean stratified
/// k-fold accuracy (ties go to the stronger penalty), then refits on all
/// data. Returns `(w, w0, chosen_l2)`.
pub fn cross_validate_select(
    x: &FeatureMatrix,
    y: &[u8],
    hp: &Hyperparams,
) -> Result<(Vec<f64>, f64, f64)> {
    check_labels(x, y)?;
    if hp.cv_folds < 2 {
        return Err(Error::invalid("cv_folds must be at least 2"));
    }
    if hp.l2_grid.is_empty() {
        return Err(Error::invalid("l2 grid is empty"));
    }
    let folds = stratified_folds(y, hp.cv_folds, hp.seed);
    let mut splits = Vec::with_capacity(hp.cv_folds);
    for f in 0..hp.cv_folds {
        let (val, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| folds[i] == f);
        let single_class = |idx: &[usize]| {
            let pos = idx.iter().filter(|&&i| y[i] == 1).count();
            pos == 0 || pos == idx.len()
        };
        if single_class(&val) || single_class(&train) {
            return Err(Error::invalid(format!(
                "fold {f} contains a single class; use fewer than {} folds",
                hp.cv_folds
            )));
        }
        splits.push((train, val));
    }

    let mut best: Option<(f64, f64)> = None; // (mean accuracy, l2)
    for &l2 in &hp.l2_grid {
        let mut fold_hp = hp.clone();
        fold_hp.l2_strength = l2;
        let mut acc_sum = 0.0;
        for (train, val) in &splits {
            let xt = x.select_rows(train);
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let (w, w0) = train_logistic_regression(&xt, &yt, &fold_hp)?;
            let correct = val
                .iter()
                .filter(|&&i| u8::from(sigmoid(w0 + x.row(i).dot(&w)) >= 0.5) == y[i])
                .count();
            acc_sum += correct as f64 / val.len() as f64;
        }
        let mean = acc_sum / splits.len() as f64;
        best = match best {
            None => Some((mean, l2)),
            Some((bm, _)) if mean > bm + 1e-12 => Some((mean, l2)),
            Some((bm, bl)) if (mean - bm).abs() <= 1e-12 && l2 > bl => Some((mean, l2)),
            keep => keep,
        };
    }
    let chosen = best.expect("grid is nonempty").1;
    let mut final_hp = hp.clone();
    final_hp.l2_strength = chosen;
    let (w, w0) = train_logistic_regression(x, y, &final_hp)?;
    Ok((w, w0, chosen))
}
