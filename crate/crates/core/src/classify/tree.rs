//! CART with Gini impurity.
//!
//! Rows go left when `x[feature] <= threshold`. Dense features split at
//! midpoints between consecutive distinct values; sparse binary features
//! split at 0.5. Among equally good splits the lowest feature index wins,
//! then the lowest threshold. Splits that leave the impurity unchanged are
//! still taken, so the tree keeps growing until a node is pure, too small,
//! at `max_depth`, or has no non-constant feature.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_labels, Hyperparams};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Row};
use crate::tensor::{Tensor, TensorFile};

/// Gains closer than this count as equal.
pub const GAIN_TIE: f64 = 1e-12;

const LEAF: u32 = u32::MAX;

/// `1 - Σ p_c²` over class counts.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::invalid("Gini impurity of an empty node"));
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

fn gini2(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - a * a - b * b
}

/// Impurity decrease of splitting `parent` into `left` and the remainder.
fn split_gain(parent: [usize; 2], left: [usize; 2]) -> f64 {
    let right = [parent[0] - left[0], parent[1] - left[1]];
    let n = (parent[0] + parent[1]) as f64;
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    gini2(parent) - (nl * gini2(left) + nr * gini2(right)) / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn better(cand: &SplitCandidate, best: &Option<SplitCandidate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            if cand.gain > b.gain + GAIN_TIE {
                true
            } else if cand.gain >= b.gain - GAIN_TIE {
                (cand.feature, cand.threshold) < (b.feature, b.threshold)
            } else {
                false
            }
        }
    }
}

/// One node in a flat arena. Leaves have `feature == None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Training examples per class reaching this node.
    pub counts: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl Tree {
    fn leaf_for(&self, row: &Row<'_>) -> &Node {
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            match node.feature {
                None => return node,
                Some(f) => at = if row.get(f) <= node.threshold { node.left } else { node.right },
            }
        }
    }

    /// Majority label of the leaf; ties go to 0.
    pub fn predict_row(&self, row: &Row<'_>) -> u8 {
        let c = self.leaf_for(row).counts;
        u8::from(c[1] > c[0])
    }

    pub fn positive_fraction(&self, row: &Row<'_>) -> f64 {
        let c = self.leaf_for(row).counts;
        c[1] as f64 / (c[0] + c[1]) as f64
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            let n = &t.nodes[at];
            match n.feature {
                None => 0,
                Some(_) => 1 + go(t, n.left).max(go(t, n.right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature.is_none()).count()
    }

    pub(crate) fn write_tensors(&self, f: &mut TensorFile, prefix: &str) {
        let mut feat = Vec::with_capacity(self.nodes.len());
        let mut thr = Vec::with_capacity(self.nodes.len());
        let mut links = Vec::with_capacity(2 * self.nodes.len());
        let mut counts = Vec::with_capacity(2 * self.nodes.len());
        for n in &self.nodes {
            feat.push(n.feature.map_or(LEAF, |x| x as u32));
            thr.push(n.threshold);
            links.extend([n.left as u32, n.right as u32]);
            counts.extend([n.counts[0] as u32, n.counts[1] as u32]);
        }
        f.push(format!("{prefix}.n_features"), Tensor::u32(vec![self.n_features as u32]));
        f.push(format!("{prefix}.feature"), Tensor::u32(feat));
        f.push(format!("{prefix}.threshold"), Tensor::vector(&thr));
        f.push(format!("{prefix}.links"), Tensor::u32(links));
        f.push(format!("{prefix}.counts"), Tensor::u32(counts));
    }

    pub(crate) fn read_tensors(f: &TensorFile, prefix: &str) -> Result<Self> {
        let n_features = f.get(&format!("{prefix}.n_features"))?.as_u32()?[0] as usize;
        let feat = f.get(&format!("{prefix}.feature"))?.as_u32()?;
        let thr = f.get(&format!("{prefix}.threshold"))?.as_f64()?;
        let links = f.get(&format!("{prefix}.links"))?.as_u32()?;
        let counts = f.get(&format!("{prefix}.counts"))?.as_u32()?;
        let n = feat.len();
        if n == 0 || thr.len() != n || links.len() != 2 * n || counts.len() != 2 * n {
            return Err(Error::Format(format!("tree {prefix}: inconsistent node arrays")));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let feature = (feat[i] != LEAF).then_some(feat[i] as usize);
            let (left, right) = (links[2 * i] as usize, links[2 * i + 1] as usize);
            if feature.is_some() && (left >= n || right >= n || left <= i || right <= i) {
                return Err(Error::Format(format!("tree {prefix}: bad child link at node {i}")));
            }
            nodes.push(Node {
                feature,
                threshold: thr[i],
                left,
                right,
                counts: [counts[2 * i] as usize, counts[2 * i + 1] as usize],
            });
        }
        Ok(Tree { nodes, n_features })
    }
}

/// Feature sampling for forests: `k` features per node, drawn without
/// replacement; constant features do not count toward `k`.
pub(crate) struct FeatureSampler {
    pub k: usize,
    pub rng: ChaCha8Rng,
    perm: Vec<usize>,
}

impl FeatureSampler {
    pub fn new(n_features: usize, k: usize, rng: ChaCha8Rng) -> Self {
        FeatureSampler {
            k,
            rng,
            perm: (0..n_features).collect(),
        }
    }
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    max_depth: usize,
    min_samples_split: usize,
    sampler: Option<FeatureSampler>,
    nodes: Vec<Node>,
    // Scratch for sparse per-feature class counts, zero between calls.
    ones: Vec<[usize; 2]>,
    touched: Vec<usize>,
}

fn class_counts(y: &[u8], samples: &[usize]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for &i in samples {
        c[y[i] as usize] += 1;
    }
    c
}

impl Builder<'_> {
    /// Best split of `samples` over all features, or over the sampled ones
    /// when growing a forest.
    fn best_split(&mut self, samples: &[usize], parent: [usize; 2]) -> Option<SplitCandidate> {
        let f_total = self.x.n_cols();
        match self.x {
            FeatureMatrix::Sparse(_) => {
                let mut touched = std::mem::take(&mut self.touched);
                touched.clear();
                for &i in samples {
                    if let Row::Sparse(idx) = self.x.row(i) {
                        for &j in idx {
                            let c = &mut self.ones[j as usize];
                            if c[0] + c[1] == 0 {
                                touched.push(j as usize);
                            }
                            c[self.y[i] as usize] += 1;
                        }
                    }
                }
                touched.sort_unstable();
                let n = samples.len();
                let ones = &self.ones;
                let eval = |f: usize| -> Option<SplitCandidate> {
                    let o = ones[f];
                    let k = o[0] + o[1];
                    if k == 0 || k == n {
                        return None;
                    }
                    let left = [parent[0] - o[0], parent[1] - o[1]];
                    Some(SplitCandidate { feature: f, threshold: 0.5, gain: split_gain(parent, left) })
                };
                // Features absent from every sample are constant; without
                // sampling only the present ones need a look.
                let best = select(f_total, Some(&touched), &mut self.sampler, eval);
                for &j in &touched {
                    self.ones[j] = [0, 0];
                }
                self.touched = touched;
                best
            }
            FeatureMatrix::Dense(_) => {
                let x = self.x;
                let y = self.y;
                let mut order: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
                let eval = |f: usize| -> Option<SplitCandidate> {
                    order.clear();
                    order.extend(samples.iter().map(|&i| (x.row(i).get(f), y[i])));
                    order.sort_by(|a, b| a.0.total_cmp(&b.0));
                    dense_feature_best(&order, f, parent)
                };
                select(f_total, None, &mut self.sampler, eval)
            }
        }
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let counts = class_counts(self.y, samples);
        let id = self.nodes.len();
        self.nodes.push(Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            counts,
        });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.max_depth || samples.len() < self.min_samples_split {
            return id;
        }
        let Some(split) = self.best_split(samples, counts) else {
            return id;
        };
        let mut cut = 0;
        for k in 0..samples.len() {
            if self.x.row(samples[k]).get(split.feature) <= split.threshold {
                samples.swap(cut, k);
                cut += 1;
            }
        }
        let (l, r) = samples.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(split.feature);
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        id
    }
}

/// Best threshold for one feature given `(value, label)` pairs sorted by
/// value.
fn dense_feature_best(order: &[(f64, u8)], f: usize, parent: [usize; 2]) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    let mut left = [0usize; 2];
    for k in 0..order.len().saturating_sub(1) {
        left[order[k].1 as usize] += 1;
        let (a, b) = (order[k].0, order[k + 1].0);
        if a == b {
            continue;
        }
        let mut threshold = a + (b - a) / 2.0;
        if threshold >= b {
            threshold = a;
        }
        let cand = SplitCandidate { feature: f, threshold, gain: split_gain(parent, left) };
        if better(&cand, &best) {
            best = Some(cand);
        }
    }
    best
}

/// Evaluates all features in index order, or a sampled subset.
fn select<F>(
    f_total: usize,
    candidates: Option<&[usize]>,
    sampler: &mut Option<FeatureSampler>,
    mut eval: F,
) -> Option<SplitCandidate>
where
    F: FnMut(usize) -> Option<SplitCandidate>,
{
    let mut best: Option<SplitCandidate> = None;
    match sampler {
        None => {
            let all: Vec<usize>;
            let features = match candidates {
                Some(c) => c,
                None => {
                    all = (0..f_total).collect();
                    &all
                }
            };
            for &f in features {
                if let Some(c) = eval(f) {
                    if better(&c, &best) {
                        best = Some(c);
                    }
                }
            }
        }
        Some(s) => {
            let mut found = 0;
            let mut drawn = 0;
            while drawn < f_total && found < s.k {
                let j = s.rng.random_range(drawn..f_total);
                s.perm.swap(drawn, j);
                let f = s.perm[drawn];
                drawn += 1;
                if let Some(c) = eval(f) {
                    found += 1;
                    if better(&c, &best) {
                        best = Some(c);
                    }
                }
            }
        }
    }
    best
}

pub(crate) fn grow_tree(
    x: &FeatureMatrix,
    y: &[u8],
    samples: &mut [usize],
    hp: &Hyperparams,
    sampler: Option<FeatureSampler>,
) -> Tree {
    let mut b = Builder {
        x,
        y,
        max_depth: hp.max_depth,
        min_samples_split: hp.min_samples_split,
        sampler,
        nodes: Vec::new(),
        ones: if x.is_sparse() { vec![[0, 0]; x.n_cols()] } else { Vec::new() },
        touched: Vec::new(),
    };
    b.grow(samples, 0);
    Tree {
        nodes: b.nodes,
        n_features: x.n_cols(),
    }
}

pub fn train_decision_tree(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<Tree> {
    check_labels(x, y)?;
    hp.validate()?;
    let mut samples: Vec<usize> = (0..y.len()).collect();
    Ok(grow_tree(x, y, &mut samples, hp, None))
}

/// The split chosen at the root of a tree trained on all rows, or `None`
/// when every feature is constant.
pub fn root_split(x: &FeatureMatrix, y: &[u8]) -> Result<Option<SplitCandidate>> {
    check_labels(x, y)?;
    let samples: Vec<usize> = (0..y.len()).collect();
    let mut b = Builder {
        x,
        y,
        max_depth: 1,
        min_samples_split: 2,
        sampler: None,
        nodes: Vec::new(),
        ones: if x.is_sparse() { vec![[0, 0]; x.n_cols()] } else { Vec::new() },
        touched: Vec::new(),
    };
    Ok(b.best_split(&samples, class_counts(y, &samples)))
}
