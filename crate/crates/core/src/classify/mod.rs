//! The eight binary learners: logistic regression (plain and with
//! cross-validated L2), linear SVM, kernel SVM in C and ν modes, naive Bayes,
//! a CART decision tree and a random forest.
//!
//! Every learner is implemented here from first principles, trains
//! single-threaded and is bit-for-bit reproducible for a fixed seed.

mod bayes;
mod forest;
mod logistic;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

pub use bayes::{BernoulliNb, GaussianNb, NaiveBayes};
pub use forest::{default_max_features, train_random_forest};
pub use logistic::{
    cross_validate_select, logistic_loss_and_gradient, stratified_folds, train_logistic_regression,
    train_logistic_regression_traced,
};
pub use svm::{
    linear_svm_objective, rbf_kernel, smo_solve, train_kernel_svm, train_linear_svm, KernelSvm,
    SmoOutcome,
};
pub use tree::{gini_impurity, root_split, train_decision_tree, Node, SplitCandidate, Tree, GAIN_TIE};

use crate::error::{Error, Result};
use crate::eval::time_fit;
use crate::features::{FeatureMatrix, SparseBinaryMatrix};
use crate::tensor::{Tensor, TensorFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    LogReg,
    LogRegCv,
    LinearSvm,
    KernelSvmNu,
    KernelSvmC,
    NaiveBayes,
    DecisionTree,
    RandomForest,
}

impl Algorithm {
    /// Table column order.
    pub const ALL: [Algorithm; 8] = [
        Algorithm::LogReg,
        Algorithm::LogRegCv,
        Algorithm::LinearSvm,
        Algorithm::KernelSvmNu,
        Algorithm::KernelSvmC,
        Algorithm::NaiveBayes,
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LogReg => "logistic_regression",
            Algorithm::LogRegCv => "logistic_regression_cv",
            Algorithm::LinearSvm => "linear_svc",
            Algorithm::KernelSvmNu => "nu_svc",
            Algorithm::KernelSvmC => "svc",
            Algorithm::NaiveBayes => "naive_bayes",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
        }
    }

    /// Human-readable column heading.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::LogReg => "Logistic regression",
            Algorithm::LogRegCv => "Logistic regression CV",
            Algorithm::LinearSvm => "SVM Linear SVC",
            Algorithm::KernelSvmNu => "SVM NuSVC",
            Algorithm::KernelSvmC => "SVM SVC",
            Algorithm::NaiveBayes => "Naive Bayes",
            Algorithm::DecisionTree => "Decision Tree",
            Algorithm::RandomForest => "Random forest",
        }
    }

    fn tag(self) -> u32 {
        Algorithm::ALL.iter().position(|&a| a == self).unwrap() as u32
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                let allowed: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::invalid(format!(
                    "unknown algorithm {key:?}; allowed: {}",
                    allowed.join(", ")
                ))
            })
    }
}

/// Hyperparameters for all learners; each learner reads its own fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub algorithm: Algorithm,
    // Logistic regression.
    pub learning_rate: f64,
    pub l2_strength: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub cv_folds: usize,
    pub l2_grid: Vec<f64>,
    // Linear SVM.
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    // Kernel SVM.
    pub c: f64,
    pub nu: f64,
    /// `None` means `1 / feature_dim`.
    pub rbf_gamma: Option<f64>,
    pub smo_tolerance: f64,
    pub smo_max_iters: usize,
    // Trees.
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Features examined per forest split; `None` means `ceil(sqrt(F))`.
    pub forest_max_features: Option<usize>,
    pub seed: u64,
}

impl Hyperparams {
    pub fn new(algorithm: Algorithm) -> Self {
        Hyperparams {
            algorithm,
            learning_rate: 0.1,
            l2_strength: 1e-4,
            max_iters: 1000,
            tolerance: 1e-6,
            cv_folds: 5,
            l2_grid: vec![1e-4, 1e-2, 1.0, 100.0],
            svm_lambda: 1e-4,
            svm_epochs: 100,
            c: 1.0,
            nu: 0.5,
            rbf_gamma: None,
            smo_tolerance: 1e-3,
            smo_max_iters: 1_000_000,
            max_depth: 20,
            min_samples_split: 2,
            n_trees: 100,
            bootstrap: true,
            forest_max_features: None,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if self.l2_grid.is_empty() {
            return Err(Error::invalid("l2 grid is empty"));
        }
        if let Some(g) = self.rbf_gamma {
            if !(g > 0.0) {
                return Err(Error::invalid(format!("rbf_gamma must be positive, got {g}")));
            }
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        Ok(())
    }
}

/// Fitted parameters of one learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    /// Logistic regression (either flavour); `l2` is the strength used.
    Logistic { w: Vec<f64>, w0: f64, l2: f64 },
    LinearSvm { w: Vec<f64>, w0: f64 },
    KernelSvm(KernelSvm),
    NaiveBayes(NaiveBayes),
    Tree(Tree),
    Forest(Vec<Tree>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub algorithm: Algorithm,
    pub feature_dim: usize,
    pub training_seconds: f64,
    pub params: Params,
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `w0 + w · x`.
pub fn linear_score(w: &[f64], w0: f64, x: &[f64]) -> Result<f64> {
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: x.len(),
        });
    }
    Ok(w0 + crate::linalg::dot(w, x))
}

pub(crate) fn check_labels(x: &FeatureMatrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("labels must be 0 or 1, found {bad}")));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains the learner named by `hp.algorithm`, timing only the fit itself.
pub fn fit(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<Model> {
    hp.validate()?;
    check_labels(x, y)?;
    let (params, seconds) = time_fit(|| fit_params(x, y, hp));
    Ok(Model {
        algorithm: hp.algorithm,
        feature_dim: x.n_cols(),
        training_seconds: seconds,
        params: params?,
    })
}

fn fit_params(x: &FeatureMatrix, y: &[u8], hp: &Hyperparams) -> Result<Params> {
    Ok(match hp.algorithm {
        Algorithm::LogReg => {
            let (w, w0) = train_logistic_regression(x, y, hp)?;
            Params::Logistic { w, w0, l2: hp.l2_strength }
        }
        Algorithm::LogRegCv => {
            let (w, w0, l2) = cross_validate_select(x, y, hp)?;
            Params::Logistic { w, w0, l2 }
        }
        Algorithm::LinearSvm => {
            let (w, w0) = train_linear_svm(x, y, hp)?;
            Params::LinearSvm { w, w0 }
        }
        Algorithm::KernelSvmC | Algorithm::KernelSvmNu => {
            Params::KernelSvm(train_kernel_svm(x, y, hp)?)
        }
        Algorithm::NaiveBayes => Params::NaiveBayes(NaiveBayes::fit(x, y)?),
        Algorithm::DecisionTree => Params::Tree(train_decision_tree(x, y, hp)?),
        Algorithm::RandomForest => Params::Forest(train_random_forest(x, y, hp)?),
    })
}

impl Model {
    fn check_width(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.n_cols(),
            });
        }
        Ok(())
    }

    /// Real-valued score per row: probability for logistic regression,
    /// decision value for SVMs, log-odds for naive Bayes, positive fraction
    /// for a tree leaf and the positive vote share for a forest.
    pub fn predict_score(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok((0..x.n_rows()).map(|i| self.score_row(x, i)).collect())
    }

    fn score_row(&self, x: &FeatureMatrix, i: usize) -> f64 {
        let row = x.row(i);
        match &self.params {
            Params::Logistic { w, w0, .. } => sigmoid(w0 + row.dot(w)),
            Params::LinearSvm { w, w0 } => w0 + row.dot(w),
            Params::KernelSvm(m) => m.decision_value(&row),
            Params::NaiveBayes(nb) => nb.log_odds(&row),
            Params::Tree(t) => t.positive_fraction(&row),
            Params::Forest(trees) => {
                let votes = trees.iter().filter(|t| t.predict_row(&row) == 1).count();
                votes as f64 / trees.len() as f64
            }
        }
    }

    /// Labels in {0, 1}. Logistic regression predicts 1 at probability ≥ 0.5,
    /// SVMs at decision value ≥ 0, naive Bayes when the positive log-posterior
    /// is at least the negative one; tree and forest majority ties go to 0.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        self.check_width(x)?;
        Ok((0..x.n_rows())
            .map(|i| match &self.params {
                Params::Tree(t) => t.predict_row(&x.row(i)),
                Params::Forest(trees) => {
                    let row = x.row(i);
                    let votes = trees.iter().filter(|t| t.predict_row(&row) == 1).count();
                    u8::from(2 * votes > trees.len())
                }
                Params::Logistic { .. } => u8::from(self.score_row(x, i) >= 0.5),
                _ => u8::from(self.score_row(x, i) >= 0.0),
            })
            .collect())
    }

    pub fn to_tensors(&self) -> TensorFile {
        let mut f = TensorFile::default();
        f.push("algorithm", Tensor::u32(vec![self.algorithm.tag()]));
        f.push("feature_dim", Tensor::u32(vec![self.feature_dim as u32]));
        f.push("training_seconds", Tensor::scalar(self.training_seconds));
        match &self.params {
            Params::Logistic { w, w0, l2 } => {
                f.push("w", Tensor::vector(w));
                f.push("w0", Tensor::scalar(*w0));
                f.push("l2", Tensor::scalar(*l2));
            }
            Params::LinearSvm { w, w0 } => {
                f.push("w", Tensor::vector(w));
                f.push("w0", Tensor::scalar(*w0));
            }
            Params::KernelSvm(m) => m.write_tensors(&mut f),
            Params::NaiveBayes(nb) => nb.write_tensors(&mut f),
            Params::Tree(t) => t.write_tensors(&mut f, "tree"),
            Params::Forest(trees) => {
                f.push("n_trees", Tensor::u32(vec![trees.len() as u32]));
                for (i, t) in trees.iter().enumerate() {
                    t.write_tensors(&mut f, &format!("tree{i}"));
                }
            }
        }
        f
    }

    pub fn from_tensors(f: &TensorFile) -> Result<Self> {
        let tag = *f
            .get("algorithm")?
            .as_u32()?
            .first()
            .ok_or_else(|| Error::Format("empty algorithm tag".into()))?;
        let algorithm = *Algorithm::ALL
            .get(tag as usize)
            .ok_or_else(|| Error::Format(format!("unknown algorithm tag {tag}")))?;
        let feature_dim = f.get("feature_dim")?.as_u32()?[0] as usize;
        let training_seconds = f.get("training_seconds")?.as_f64()?[0];
        let params = match algorithm {
            Algorithm::LogReg | Algorithm::LogRegCv => Params::Logistic {
                w: f.get("w")?.as_f64()?.to_vec(),
                w0: f.get("w0")?.as_f64()?[0],
                l2: f.get("l2")?.as_f64()?[0],
            },
            Algorithm::LinearSvm => Params::LinearSvm {
                w: f.get("w")?.as_f64()?.to_vec(),
                w0: f.get("w0")?.as_f64()?[0],
            },
            Algorithm::KernelSvmC | Algorithm::KernelSvmNu => {
                Params::KernelSvm(KernelSvm::read_tensors(f)?)
            }
            Algorithm::NaiveBayes => Params::NaiveBayes(NaiveBayes::read_tensors(f)?),
            Algorithm::DecisionTree => Params::Tree(Tree::read_tensors(f, "tree")?),
            Algorithm::RandomForest => {
                let n = f.get("n_trees")?.as_u32()?[0] as usize;
                Params::Forest(
                    (0..n)
                        .map(|i| Tree::read_tensors(f, &format!("tree{i}")))
                        .collect::<Result<_>>()?,
                )
            }
        };
        Ok(Model {
            algorithm,
            feature_dim,
            training_seconds,
            params,
        })
    }
}

/// Stores a matrix under `{prefix}.dense`, or as CSR arrays for sparse input.
pub fn write_feature_matrix(f: &mut TensorFile, prefix: &str, x: &FeatureMatrix) {
    match x {
        FeatureMatrix::Dense(m) => f.push(format!("{prefix}.dense"), Tensor::matrix(m)),
        FeatureMatrix::Sparse(m) => {
            let mut lens = Vec::with_capacity(m.n_rows());
            let mut idx = Vec::with_capacity(m.nnz());
            for i in 0..m.n_rows() {
                lens.push(m.row(i).len() as u32);
                idx.extend_from_slice(m.row(i));
            }
            f.push(format!("{prefix}.n_cols"), Tensor::u32(vec![m.n_cols() as u32]));
            f.push(format!("{prefix}.row_lens"), Tensor::u32(lens));
            f.push(format!("{prefix}.indices"), Tensor::u32(idx));
        }
    }
}

pub fn read_feature_matrix(f: &TensorFile, prefix: &str) -> Result<FeatureMatrix> {
    if let Ok(t) = f.get(&format!("{prefix}.dense")) {
        return Ok(FeatureMatrix::Dense(t.to_matrix()?));
    }
    let n_cols = f.get(&format!("{prefix}.n_cols"))?.as_u32()?[0] as usize;
    let lens = f.get(&format!("{prefix}.row_lens"))?.as_u32()?;
    let idx = f.get(&format!("{prefix}.indices"))?.as_u32()?;
    let mut rows = Vec::with_capacity(lens.len());
    let mut at = 0usize;
    for &l in lens {
        let end = at + l as usize;
        let slice = idx
            .get(at..end)
            .ok_or_else(|| Error::Format("sparse row lengths exceed index data".into()))?;
        rows.push(slice.to_vec());
        at = end;
    }
    Ok(FeatureMatrix::Sparse(SparseBinaryMatrix::from_rows(rows, n_cols)?))
}
