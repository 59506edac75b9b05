//! Random forest of CART trees.
//!
//! Tree `t` uses its own generator seeded with `seed + t`: it first draws the
//! bootstrap sample (when enabled), then the per-node feature subsets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{grow_tree, FeatureSampler, Tree};
use super::{check_labels, Hyperparams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// `ceil(sqrt(n_features))`, at least 1.
pub fn default_max_features(n_features: usize) -> usize {
    ((n_features as f64).sqrt().ceil() as usize).max(1)
}

pub fn train_random_forest(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<Vec<Tree>> {
    check_labels(x, y)?;
    hp.validate()?;
    let f = x.n_cols();
    let k = hp.forest_max_features.unwrap_or_else(|| default_max_features(f));
    if k == 0 || k > f {
        return Err(Error::invalid(format!("forest_max_features must lie in 1..={f}, got {k}")));
    }
    let n = y.len();
    let mut trees = Vec::with_capacity(hp.n_trees);
    for t in 0..hp.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(t as u64));
        let mut samples: Vec<usize> = if hp.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let sampler = FeatureSampler::new(f, k, rng);
        trees.push(grow_tree(x, y, &mut samples, hp, Some(sampler)));
    }
    Ok(trees)
}
