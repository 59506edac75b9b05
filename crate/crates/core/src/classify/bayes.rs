//! Naive Bayes: Bernoulli with add-one smoothing for binary sparse features,
//! Gaussian for dense real-valued features.

use super::check_labels;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Row};
use crate::tensor::{Tensor, TensorFile};

/// Variance floor for the Gaussian model.
pub const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliNb {
    pub log_prior: [f64; 2],
    /// `log θ_cj` per class.
    pub log_p: [Vec<f64>; 2],
    /// `log (1 - θ_cj)` per class.
    pub log_q: [Vec<f64>; 2],
    /// `Σ_j log (1 - θ_cj)`: the log-likelihood of an all-zero row.
    pub base: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum NaiveBayes {
    Bernoulli(BernoulliNb),
    Gaussian(GaussianNb),
}

fn class_counts(y: &[u8]) -> [usize; 2] {
    let pos = y.iter().filter(|&&l| l == 1).count();
    [y.len() - pos, pos]
}

fn log_priors(counts: [usize; 2]) -> [f64; 2] {
    let n = (counts[0] + counts[1]) as f64;
    [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()]
}

impl BernoulliNb {
    pub fn fit(x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        check_labels(x, y)?;
        let d = x.n_cols();
        let counts = class_counts(y);
        let mut ones = [vec![0.0; d], vec![0.0; d]];
        for (i, &l) in y.iter().enumerate() {
            match x.row(i) {
                Row::Sparse(idx) => idx.iter().for_each(|&j| ones[l as usize][j as usize] += 1.0),
                Row::Dense(v) => {
                    for (j, &val) in v.iter().enumerate() {
                        if val != 0.0 {
                            ones[l as usize][j] += 1.0;
                        }
                    }
                }
            }
        }
        let mut log_p = [Vec::new(), Vec::new()];
        let mut log_q = [Vec::new(), Vec::new()];
        let mut base = [0.0; 2];
        for c in 0..2 {
            let denom = counts[c] as f64 + 2.0;
            log_p[c] = ones[c].iter().map(|&k| ((k + 1.0) / denom).ln()).collect();
            log_q[c] = ones[c].iter().map(|&k| ((counts[c] as f64 - k + 1.0) / denom).ln()).collect();
            base[c] = log_q[c].iter().sum();
        }
        Ok(BernoulliNb {
            log_prior: log_priors(counts),
            log_p,
            log_q,
            base,
        })
    }

    /// Joint log-likelihood `log P(c) + log P(x | c)` for both classes.
    /// Nonzero entries count as present.
    pub fn joint_log_likelihood(&self, row: &Row<'_>) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = self.log_prior[c] + self.base[c];
            let mut add = |j: usize| s += self.log_p[c][j] - self.log_q[c][j];
            match row {
                Row::Sparse(idx) => idx.iter().for_each(|&j| add(j as usize)),
                Row::Dense(v) => v
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .for_each(|(j, _)| add(j)),
            }
            *o = s;
        }
        out
    }
}

impl GaussianNb {
    pub fn fit(x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        check_labels(x, y)?;
        let d = x.n_cols();
        let counts = class_counts(y);
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        for (i, &l) in y.iter().enumerate() {
            x.row(i).axpy(1.0, &mut mean[l as usize]);
        }
        for c in 0..2 {
            mean[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (i, &l) in y.iter().enumerate() {
            let c = l as usize;
            let row = x.row(i);
            for j in 0..d {
                let e = row.get(j) - mean[c][j];
                var[c][j] += e * e;
            }
        }
        for c in 0..2 {
            var[c]
                .iter_mut()
                .for_each(|v| *v = (*v / counts[c] as f64).max(VAR_FLOOR));
        }
        Ok(GaussianNb {
            log_prior: log_priors(counts),
            mean,
            var,
        })
    }

    pub fn joint_log_likelihood(&self, row: &Row<'_>) -> [f64; 2] {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = self.log_prior[c];
            for (j, (&m, &v)) in self.mean[c].iter().zip(&self.var[c]).enumerate() {
                let e = row.get(j) - m;
                s -= 0.5 * (ln_2pi + v.ln() + e * e / v);
            }
            *o = s;
        }
        out
    }
}

impl NaiveBayes {
    /// Bernoulli for sparse binary input, Gaussian for dense input.
    pub fn fit(x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        if x.is_sparse() {
            Ok(NaiveBayes::Bernoulli(BernoulliNb::fit(x, y)?))
        } else {
            Ok(NaiveBayes::Gaussian(GaussianNb::fit(x, y)?))
        }
    }

    /// `log P(1 | x) - log P(0 | x)`; the model predicts 1 when this is ≥ 0.
    pub fn log_odds(&self, row: &Row<'_>) -> f64 {
        let jll = match self {
            NaiveBayes::Bernoulli(m) => m.joint_log_likelihood(row),
            NaiveBayes::Gaussian(m) => m.joint_log_likelihood(row),
        };
        jll[1] - jll[0]
    }

    pub(crate) fn write_tensors(&self, f: &mut TensorFile) {
        match self {
            NaiveBayes::Bernoulli(m) => {
                f.push("nb.kind", Tensor::u32(vec![0]));
                f.push("nb.log_prior", Tensor::vector(&m.log_prior));
                for c in 0..2 {
                    f.push(format!("nb.log_p{c}"), Tensor::vector(&m.log_p[c]));
                    f.push(format!("nb.log_q{c}"), Tensor::vector(&m.log_q[c]));
                }
                f.push("nb.base", Tensor::vector(&m.base));
            }
            NaiveBayes::Gaussian(m) => {
                f.push("nb.kind", Tensor::u32(vec![1]));
                f.push("nb.log_prior", Tensor::vector(&m.log_prior));
                for c in 0..2 {
                    f.push(format!("nb.mean{c}"), Tensor::vector(&m.mean[c]));
                    f.push(format!("nb.var{c}"), Tensor::vector(&m.var[c]));
                }
            }
        }
    }

    pub(crate) fn read_tensors(f: &TensorFile) -> Result<Self> {
        let pair = |name: &str| -> Result<[f64; 2]> {
            let v = f.get(name)?.as_f64()?;
            if v.len() != 2 {
                return Err(Error::Format(format!("{name} must hold two values")));
            }
            Ok([v[0], v[1]])
        };
        let vecs = |stem: &str| -> Result<[Vec<f64>; 2]> {
            Ok([
                f.get(&format!("{stem}0"))?.as_f64()?.to_vec(),
                f.get(&format!("{stem}1"))?.as_f64()?.to_vec(),
            ])
        };
        let log_prior = pair("nb.log_prior")?;
        match f.get("nb.kind")?.as_u32()?.first() {
            Some(0) => Ok(NaiveBayes::Bernoulli(BernoulliNb {
                log_prior,
                log_p: vecs("nb.log_p")?,
                log_q: vecs("nb.log_q")?,
                base: pair("nb.base")?,
            })),
            Some(1) => Ok(NaiveBayes::Gaussian(GaussianNb {
                log_prior,
                mean: vecs("nb.mean")?,
                var: vecs("nb.var")?,
            })),
            _ => Err(Error::Format("unknown naive Bayes kind".into())),
        }
    }
}
