//! Collaborative filtering over a user × work-experience rating matrix.
//!
//! Items are the six past work-experience slots plus a virtual target item
//! whose rating encodes the training label. SVD++ and asymmetric SVD++
//! models are fit by SGD on the observed cells only; a test user's label is
//! read off the predicted target-item rating.
//!
//! The implicit set `N(u)` and the explicit set `R(u)` hold the user's
//! observed slot items; the target item is left out of both so that a
//! training user's label never feeds its own prediction.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::profile::{normalize_title, LabeledDataset, Profile, N_PAST_JOBS};

/// Slot items plus the virtual target item.
pub const N_ITEMS: usize = N_PAST_JOBS + 1;
pub const TARGET_ITEM: usize = N_PAST_JOBS;
/// A matching slot held at least this long rates 2, otherwise 1.
pub const LONG_TENURE_MONTHS: u32 = 36;

pub fn item_name(item: usize) -> String {
    if item == TARGET_ITEM {
        "target".to_string()
    } else {
        format!("work_exp{}", item + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    pub user_ids: Vec<String>,
    /// Observed cells, ordered by user then item.
    pub ratings: Vec<Rating>,
    /// Dataset labels, aligned with `user_ids`.
    pub labels: Vec<u8>,
    /// Users with an observed target item.
    pub train_users: Vec<usize>,
    /// Users whose target item is held out.
    pub test_users: Vec<usize>,
}

/// Rating of one past work-experience slot against the target title.
pub fn slot_rating(title: &str, duration_months: Option<u32>, target_title: &str) -> i8 {
    if normalize_title(title) != normalize_title(target_title) {
        -1
    } else if duration_months.is_some_and(|m| m >= LONG_TENURE_MONTHS) {
        2
    } else {
        1
    }
}

/// One row per dataset example, in dataset order. Without a split every
/// user counts as a training user.
pub fn build_rating_matrix(
    profiles: &[Profile],
    dataset: &LabeledDataset,
    target_title: &str,
) -> Result<RatingMatrix> {
    let n = dataset.examples.len();
    let mut is_train = vec![dataset.split.is_none(); n];
    if let Some(split) = &dataset.split {
        for &i in &split.train {
            is_train[i] = true;
        }
    }
    let mut m = RatingMatrix {
        user_ids: Vec::with_capacity(n),
        ratings: Vec::new(),
        labels: Vec::with_capacity(n),
        train_users: Vec::new(),
        test_users: Vec::new(),
    };
    for (u, ex) in dataset.examples.iter().enumerate() {
        let p = profiles.get(ex.profile_index).ok_or_else(|| {
            Error::invalid(format!("example {u} points past the profile list"))
        })?;
        m.user_ids.push(p.id.clone());
        m.labels.push(ex.label);
        for (item, slot) in p.past_jobs.iter().enumerate() {
            if let Some(job) = slot {
                if job.job_title.trim().is_empty() {
                    continue;
                }
                let value = slot_rating(&job.job_title, job.duration_months, target_title);
                m.ratings.push(Rating { user: u, item, value });
            }
        }
        if is_train[u] {
            m.train_users.push(u);
            let value = if ex.label == 1 { 2 } else { -1 };
            m.ratings.push(Rating { user: u, item: TARGET_ITEM, value });
        } else {
            m.test_users.push(u);
        }
    }
    Ok(m)
}

impl RatingMatrix {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    /// CSV with header `user_id,item_id,rating`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["user_id", "item_id", "rating"]).map_err(csv_err)?;
        for r in &self.ratings {
            out.write_record([
                self.user_ids[r.user].as_str(),
                item_name(r.item).as_str(),
                r.value.to_string().as_str(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Dense display with unobserved cells as 0.
    pub fn to_display_rows(&self) -> Vec<[i8; N_ITEMS]> {
        let mut rows = vec![[0i8; N_ITEMS]; self.n_users()];
        for r in &self.ratings {
            rows[r.user][r.item] = r.value;
        }
        rows
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CfMode {
    SvdPp,
    AsvdPp,
}

impl CfMode {
    pub const ALL: [CfMode; 2] = [CfMode::SvdPp, CfMode::AsvdPp];

    pub fn name(self) -> &'static str {
        match self {
            CfMode::SvdPp => "svdpp",
            CfMode::AsvdPp => "asvdpp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CfMode::SvdPp => "SVD++",
            CfMode::AsvdPp => "Asymmetric SVD++",
        }
    }
}

impl fmt::Display for CfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "svdpp" | "svd++" => Ok(CfMode::SvdPp),
            "asvdpp" | "asvd++" => Ok(CfMode::AsvdPp),
            other => Err(Error::invalid(format!(
                "unknown CF mode {other:?}; allowed: svdpp, asvdpp"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfConfig {
    pub mode: CfMode,
    pub factors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl CfConfig {
    pub fn new(mode: CfMode) -> Self {
        CfConfig {
            mode,
            factors: 20,
            epochs: 50,
            learning_rate: 0.007,
            lambda: 0.02,
            seed: 42,
        }
    }
}

/// Learned parameters; factor matrices are row-major with `f` columns.
/// `p` is used in SVD++ mode and `x` in ASVD++ mode; the other is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CfParams {
    pub b_user: Vec<f64>,
    pub b_item: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
}

impl CfParams {
    fn zeros_like(other: &CfParams) -> Self {
        CfParams {
            b_user: vec![0.0; other.b_user.len()],
            b_item: vec![0.0; other.b_item.len()],
            q: vec![0.0; other.q.len()],
            p: vec![0.0; other.p.len()],
            y: vec![0.0; other.y.len()],
            x: vec![0.0; other.x.len()],
        }
    }

    pub fn fields(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("b_user", &self.b_user),
            ("b_item", &self.b_item),
            ("q", &self.q),
            ("p", &self.p),
            ("y", &self.y),
            ("x", &self.x),
        ]
    }

    pub fn fields_mut(&mut self) -> [(&'static str, &mut [f64]); 6] {
        [
            ("b_user", &mut self.b_user),
            ("b_item", &mut self.b_item),
            ("q", &mut self.q),
            ("p", &mut self.p),
            ("y", &mut self.y),
            ("x", &mut self.x),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    BUser,
    BItem,
    Q,
    P,
    Y,
    X,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfModel {
    pub mode: CfMode,
    pub factors: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    /// Fixed to the mean observed rating.
    pub mu: f64,
    pub params: CfParams,
    /// Observed slot ratings per user: `N(u)` and, with values, `R(u)`.
    pub feedback: Vec<Vec<(usize, f64)>>,
}

impl CfModel {
    /// A model with all parameters zero.
    pub fn zeros(mode: CfMode, factors: usize, n_users: usize, mu: f64) -> Self {
        let uf = if mode == CfMode::SvdPp { n_users * factors } else { 0 };
        let xf = if mode == CfMode::AsvdPp { N_ITEMS * factors } else { 0 };
        CfModel {
            mode,
            factors,
            lambda: 0.0,
            learning_rate: 0.0,
            mu,
            params: CfParams {
                b_user: vec![0.0; n_users],
                b_item: vec![0.0; N_ITEMS],
                q: vec![0.0; N_ITEMS * factors],
                p: vec![0.0; uf],
                y: vec![0.0; N_ITEMS * factors],
                x: vec![0.0; xf],
            },
            feedback: vec![Vec::new(); n_users],
        }
    }

    pub fn n_users(&self) -> usize {
        self.params.b_user.len()
    }

    fn row<'a>(&self, v: &'a [f64], k: usize) -> &'a [f64] {
        &v[k * self.factors..(k + 1) * self.factors]
    }

    /// The user-side factor `z_u` the item factor is dotted with.
    fn user_vector(&self, u: usize) -> Vec<f64> {
        let f = self.factors;
        let p = &self.params;
        let fb = &self.feedback[u];
        let mut z = match self.mode {
            CfMode::SvdPp => self.row(&p.p, u).to_vec(),
            CfMode::AsvdPp => vec![0.0; f],
        };
        if fb.is_empty() {
            return z;
        }
        let norm = (fb.len() as f64).powf(-0.5);
        for &(j, r) in fb {
            let yj = self.row(&p.y, j);
            for k in 0..f {
                z[k] += norm * yj[k];
            }
            if self.mode == CfMode::AsvdPp {
                let w = norm * (r - self.baseline(u, j));
                let xj = self.row(&p.x, j);
                for k in 0..f {
                    z[k] += w * xj[k];
                }
            }
        }
        z
    }

    /// `μ + b_u + b_j`.
    fn baseline(&self, u: usize, j: usize) -> f64 {
        self.mu + self.params.b_user[u] + self.params.b_item[j]
    }

    /// Predicted rating. An out-of-range user predicts `μ + b_i`, an
    /// out-of-range item `μ + b_u`, both `μ`.
    pub fn predict_rating(&self, user: usize, item: usize) -> f64 {
        let known_u = user < self.n_users();
        let known_i = item < N_ITEMS;
        match (known_u, known_i) {
            (false, false) => self.mu,
            (false, true) => self.mu + self.params.b_item[item],
            (true, false) => self.mu + self.params.b_user[user],
            (true, true) => {
                let z = self.user_vector(user);
                let qi = self.row(&self.params.q, item);
                self.baseline(user, item) + crate::linalg::dot(qi, &z)
            }
        }
    }

    /// `½ e² + (λ/2)(b_u² + b_i² + ‖q_i‖² + ‖p_u‖² + Σ_{N(u)} ‖y_j‖² +
    /// Σ_{R(u)} ‖x_j‖²)` for one observation.
    pub fn observation_loss(&self, user: usize, item: usize, rating: f64) -> f64 {
        let e = rating - self.predict_rating(user, item);
        let p = &self.params;
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        let mut reg = p.b_user[user].powi(2) + p.b_item[item].powi(2) + sq(self.row(&p.q, item));
        if self.mode == CfMode::SvdPp {
            reg += sq(self.row(&p.p, user));
        }
        for &(j, _) in &self.feedback[user] {
            reg += sq(self.row(&p.y, j));
            if self.mode == CfMode::AsvdPp {
                reg += sq(self.row(&p.x, j));
            }
        }
        0.5 * e * e + 0.5 * self.lambda * reg
    }

    /// Gradient entries `(field, index, ∂L/∂θ)` of the observation loss. An
    /// index may repeat; entries add.
    fn gradient_entries(&self, u: usize, i: usize, rating: f64, out: &mut Vec<(Field, usize, f64)>) {
        out.clear();
        let f = self.factors;
        let p = &self.params;
        let lam = self.lambda;
        let z = self.user_vector(u);
        let qi = self.row(&p.q, i);
        let e = rating - (self.baseline(u, i) + crate::linalg::dot(qi, &z));
        let fb = &self.feedback[u];

        let mut d_bu = 1.0;
        out.push((Field::BItem, i, -e + lam * p.b_item[i]));
        for k in 0..f {
            out.push((Field::Q, i * f + k, -e * z[k] + lam * qi[k]));
        }
        if self.mode == CfMode::SvdPp {
            let pu = self.row(&p.p, u);
            for k in 0..f {
                out.push((Field::P, u * f + k, -e * qi[k] + lam * pu[k]));
            }
        }
        if !fb.is_empty() {
            let norm = (fb.len() as f64).powf(-0.5);
            for &(j, r) in fb {
                let yj = self.row(&p.y, j);
                for k in 0..f {
                    out.push((Field::Y, j * f + k, -e * norm * qi[k] + lam * yj[k]));
                }
                if self.mode == CfMode::AsvdPp {
                    let xj = self.row(&p.x, j);
                    let w = norm * (r - self.baseline(u, j));
                    for k in 0..f {
                        out.push((Field::X, j * f + k, -e * w * qi[k] + lam * xj[k]));
                    }
                    // The baseline inside the explicit term depends on b_u and b_j.
                    let qx = norm * crate::linalg::dot(qi, xj);
                    d_bu -= qx;
                    out.push((Field::BItem, j, e * qx));
                }
            }
        }
        out.push((Field::BUser, u, -e * d_bu + lam * p.b_user[u]));
    }

    /// `∂L/∂θ` of [`CfModel::observation_loss`] for every parameter.
    pub fn observation_gradient(&self, user: usize, item: usize, rating: f64) -> CfParams {
        let mut g = CfParams::zeros_like(&self.params);
        let mut buf = Vec::new();
        self.gradient_entries(user, item, rating, &mut buf);
        for (field, idx, v) in buf {
            *slot(&mut g, field, idx) += v;
        }
        g
    }

    /// One SGD step `θ ← θ − γ ∂L/∂θ`, all partials taken at the current θ.
    pub fn sgd_step(&mut self, user: usize, item: usize, rating: f64) {
        let mut buf = Vec::new();
        self.sgd_step_with(user, item, rating, &mut buf);
    }

    fn sgd_step_with(&mut self, user: usize, item: usize, rating: f64, buf: &mut Vec<(Field, usize, f64)>) {
        self.gradient_entries(user, item, rating, buf);
        let lr = self.learning_rate;
        for &(field, idx, v) in buf.iter() {
            *slot(&mut self.params, field, idx) -= lr * v;
        }
    }

    fn all_finite(&self) -> bool {
        self.params.fields().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }

    /// Root-mean-square error over the given observations.
    pub fn rmse(&self, ratings: &[Rating]) -> f64 {
        let se: f64 = ratings
            .iter()
            .map(|r| (f64::from(r.value) - self.predict_rating(r.user, r.item)).powi(2))
            .sum();
        (se / ratings.len().max(1) as f64).sqrt()
    }
}

fn slot(p: &mut CfParams, field: Field, idx: usize) -> &mut f64 {
    match field {
        Field::BUser => &mut p.b_user[idx],
        Field::BItem => &mut p.b_item[idx],
        Field::Q => &mut p.q[idx],
        Field::P => &mut p.p[idx],
        Field::Y => &mut p.y[idx],
        Field::X => &mut p.x[idx],
    }
}

fn feedback_sets(matrix: &RatingMatrix) -> Vec<Vec<(usize, f64)>> {
    let mut fb = vec![Vec::new(); matrix.n_users()];
    for r in &matrix.ratings {
        if r.item != TARGET_ITEM {
            fb[r.user].push((r.item, f64::from(r.value)));
        }
    }
    fb
}

pub fn train_cf(matrix: &RatingMatrix, config: &CfConfig) -> Result<CfModel> {
    Ok(train_cf_traced(matrix, config)?.0)
}

/// As [`train_cf`], also returning the training RMSE after each epoch.
pub fn train_cf_traced(matrix: &RatingMatrix, config: &CfConfig) -> Result<(CfModel, Vec<f64>)> {
    if matrix.ratings.is_empty() {
        return Err(Error::invalid("rating matrix has no observed cells"));
    }
    if config.factors == 0 {
        return Err(Error::invalid("factor count must be at least 1"));
    }
    if !(config.learning_rate > 0.0) || !(config.lambda >= 0.0) {
        return Err(Error::invalid("learning rate must be positive and lambda non-negative"));
    }
    let mu = matrix.ratings.iter().map(|r| f64::from(r.value)).sum::<f64>() / matrix.ratings.len() as f64;
    let mut model = CfModel::zeros(config.mode, config.factors, matrix.n_users(), mu);
    model.lambda = config.lambda;
    model.learning_rate = config.learning_rate;
    model.feedback = feedback_sets(matrix);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (name, v) in model.params.fields_mut() {
        if !name.starts_with("b_") {
            v.iter_mut().for_each(|e| *e = rng.random_range(-0.05..0.05));
        }
    }

    let mut order: Vec<usize> = (0..matrix.ratings.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut buf = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let r = matrix.ratings[k];
            model.sgd_step_with(r.user, r.item, f64::from(r.value), &mut buf);
        }
        if !model.all_finite() {
            return Err(Error::invalid(format!(
                "CF training diverged in epoch {}; lower the learning rate",
                epoch + 1
            )));
        }
        trace.push(model.rmse(&matrix.ratings));
    }
    Ok((model, trace))
}

/// Label 1 iff the predicted target-item rating exceeds `threshold`.
pub fn classify_from_cf(model: &CfModel, users: &[usize], threshold: f64) -> Vec<u8> {
    users
        .iter()
        .map(|&u| u8::from(model.predict_rating(u, TARGET_ITEM) > threshold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(ratings: &[(usize, usize, i8)], n_users: usize) -> RatingMatrix {
        RatingMatrix {
            user_ids: (0..n_users).map(|u| format!("u{u}")).collect(),
            ratings: ratings.iter().map(|&(user, item, value)| Rating { user, item, value }).collect(),
            labels: vec![0; n_users],
            train_users: (0..n_users).collect(),
            test_users: Vec::new(),
        }
    }

    #[test]
    fn slot_rules() {
        assert_eq!(slot_rating("Software Engineer", Some(48), "software engineer"), 2);
        assert_eq!(slot_rating("software engineer", Some(36), "software engineer"), 2);
        assert_eq!(slot_rating("software engineer", Some(12), "software engineer"), 1);
        assert_eq!(slot_rating("software engineer", None, "software engineer"), 1);
        assert_eq!(slot_rating("consultant", Some(99), "software engineer"), -1);
    }

    #[test]
    fn bias_only_predictions() {
        let mut m = CfModel::zeros(CfMode::SvdPp, 3, 2, 0.7);
        assert_eq!(m.predict_rating(0, 1), 0.7);
        m.params.b_user[1] = 0.25;
        m.params.b_item[2] = -0.5;
        assert_eq!(m.predict_rating(1, 2), 0.7 + 0.25 - 0.5);
        assert_eq!(m.predict_rating(9, 2), 0.7 - 0.5);
        assert_eq!(m.predict_rating(1, 99), 0.7 + 0.25);
        assert_eq!(m.predict_rating(9, 99), 0.7);
    }

    #[test]
    fn single_cell_fit() {
        let mx = matrix(&[(0, 0, 2)], 1);
        for mode in CfMode::ALL {
            let mut cfg = CfConfig::new(mode);
            cfg.factors = 1;
            cfg.epochs = 2000;
            cfg.learning_rate = 0.05;
            let m = train_cf(&mx, &cfg).unwrap();
            assert!((m.predict_rating(0, 0) - 2.0).abs() < 0.05, "{mode}");
        }
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(train_cf(&matrix(&[], 2), &CfConfig::new(CfMode::SvdPp)).is_err());
    }

    #[test]
    fn zero_model_with_positive_mean_labels_everyone_one() {
        let m = CfModel::zeros(CfMode::AsvdPp, 2, 4, 0.3);
        assert_eq!(classify_from_cf(&m, &[3, 0, 2], 0.0), vec![1, 1, 1]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mx = matrix(&[(0, 0, 2), (0, 2, -1), (1, 1, 1), (1, 6, 2), (2, 3, -1), (0, 6, -1)], 3);
        for mode in CfMode::ALL {
            let mut cfg = CfConfig::new(mode);
            cfg.factors = 3;
            cfg.epochs = 3;
            cfg.lambda = 0.1;
            cfg.learning_rate = 0.05;
            let mut m = train_cf(&mx, &cfg).unwrap();
            for (u, i, r) in [(0usize, 0usize, 2.0), (0, 6, -1.0), (1, 1, 1.0)] {
                let g = m.observation_gradient(u, i, r);
                let h = 1e-6;
                for fi in 0..6 {
                    let len = m.params.fields()[fi].1.len();
                    for idx in 0..len {
                        let orig = m.params.fields()[fi].1[idx];
                        m.params.fields_mut()[fi].1[idx] = orig + h;
                        let lp = m.observation_loss(u, i, r);
                        m.params.fields_mut()[fi].1[idx] = orig - h;
                        let lm = m.observation_loss(u, i, r);
                        m.params.fields_mut()[fi].1[idx] = orig;
                        let fd = (lp - lm) / (2.0 * h);
                        let an = g.fields()[fi].1[idx];
                        assert!((fd - an).abs() <= 1e-7 * (1.0 + an.abs()), "{mode} {} {idx}: {fd} vs {an}", g.fields()[fi].0);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mx = matrix(&[(0, 0, 2), (0, 2, -1), (1, 1, 1), (1, 6, 2), (2, 3, -1)], 3);
        let cfg = CfConfig::new(CfMode::AsvdPp);
        assert_eq!(train_cf(&mx, &cfg).unwrap(), train_cf(&mx, &cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 7;
        assert_ne!(train_cf(&mx, &cfg).unwrap(), train_cf(&mx, &other).unwrap());
    }

    #[test]
    fn dump_format() {
        let mx = matrix(&[(0, 0, 2), (1, 6, -1)], 2);
        let mut buf = Vec::new();
        mx.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "user_id,item_id,rating\nu0,work_exp1,2\nu1,target,-1\n");
        assert_eq!(mx.to_display_rows()[1], [0, 0, 0, 0, 0, 0, -1]);
    }
}
