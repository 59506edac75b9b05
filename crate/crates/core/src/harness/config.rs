//! Experiment configuration in the flat `key = value` format.
//!
//! ```text
//! data.csv = profiles.csv          # or data.spec = gen.cfg, or datagen.* keys
//! titles = software engineer, consultant
//! representations = unigram, bigram, trigram
//! subsets = all, work_experience, education, skills
//! algorithms = logistic_regression, random_forest
//! dimred.mode = off                # off | on | both
//! dimred.k = 50
//! seeds = 42
//! cf.enabled = true
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::cf::{CfConfig, CfMode};
use crate::classify::{Algorithm, Hyperparams};
use crate::datagen::{GenSpec, SPEC_KEYS};
use crate::embed::PvConfig;
use crate::error::{Error, Result};
use crate::kv::{fmt_f64, KvFile};
use crate::profile::{normalize_title, FieldSubset, DEFAULT_TARGET_TITLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Representation {
    Unigram,
    Bigram,
    Trigram,
    WordAvg,
    ParagraphVector,
}

impl Representation {
    pub const ALL: [Representation; 5] = [
        Representation::Unigram,
        Representation::Bigram,
        Representation::Trigram,
        Representation::WordAvg,
        Representation::ParagraphVector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Unigram => "unigram",
            Representation::Bigram => "bigram",
            Representation::Trigram => "trigram",
            Representation::WordAvg => "word_avg",
            Representation::ParagraphVector => "paragraph_vector",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Representation::Unigram => "Unigram",
            Representation::Bigram => "Bigram",
            Representation::Trigram => "Trigram",
            Representation::WordAvg => "Word vectors",
            Representation::ParagraphVector => "Paragraph vectors",
        }
    }

    /// n for the n-gram representations.
    pub fn ngram_order(self) -> Option<usize> {
        match self {
            Representation::Unigram => Some(1),
            Representation::Bigram => Some(2),
            Representation::Trigram => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase();
        Representation::ALL.into_iter().find(|r| r.name() == key).ok_or_else(|| {
            let allowed: Vec<&str> = Representation::ALL.iter().map(|r| r.name()).collect();
            Error::invalid(format!("unknown representation {key:?}; allowed: {}", allowed.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimredMode {
    Off,
    On,
    Both,
}

impl DimredMode {
    pub fn name(self) -> &'static str {
        match self {
            DimredMode::Off => "off",
            DimredMode::On => "on",
            DimredMode::Both => "both",
        }
    }
}

impl FromStr for DimredMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "off" => Ok(DimredMode::Off),
            "on" => Ok(DimredMode::On),
            "both" => Ok(DimredMode::Both),
            other => Err(Error::invalid(format!("unknown dimred mode {other:?}; allowed: off, on, both"))),
        }
    }
}

/// Which documents paragraph vectors are trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvScope {
    /// The sampled dataset of one title (train and test documents).
    Dataset,
    /// Every profile in the corpus.
    Corpus,
}

impl FromStr for PvScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "dataset" => Ok(PvScope::Dataset),
            "corpus" => Ok(PvScope::Corpus),
            other => Err(Error::invalid(format!("unknown scope {other:?}; allowed: dataset, corpus"))),
        }
    }
}

impl PvScope {
    pub fn name(self) -> &'static str {
        match self {
            PvScope::Dataset => "dataset",
            PvScope::Corpus => "corpus",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    /// A datagen spec file.
    SpecFile(PathBuf),
    /// `datagen.*` keys in the config itself.
    Inline(GenSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfSettings {
    pub enabled: bool,
    pub modes: Vec<CfMode>,
    pub factors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub threshold: f64,
}

impl Default for CfSettings {
    fn default() -> Self {
        let d = CfConfig::new(CfMode::SvdPp);
        CfSettings {
            enabled: false,
            modes: CfMode::ALL.to_vec(),
            factors: d.factors,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            lambda: d.lambda,
            threshold: 0.0,
        }
    }
}

impl CfSettings {
    pub fn model_config(&self, mode: CfMode, seed: u64) -> CfConfig {
        CfConfig {
            mode,
            factors: self.factors,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub titles: Vec<String>,
    pub representations: Vec<Representation>,
    pub subsets: Vec<FieldSubset>,
    pub algorithms: Vec<Algorithm>,
    pub dimred_mode: DimredMode,
    pub dimred_k: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub split: f64,
    pub seeds: Vec<u64>,
    /// Fractions of the training split to train on.
    pub train_sizes: Vec<f64>,
    pub min_doc_freq: usize,
    /// Skip paragraph vectors on subsets other than `all`.
    pub skip_pv_subsets: bool,
    pub embeddings: Option<PathBuf>,
    pub pv: PvConfig,
    pub pv_scope: PvScope,
    pub cf: CfSettings,
    /// Top-n cut for precision@n / recall@n; 0 disables.
    pub at_n: usize,
    /// Base hyperparameters; `algorithm` and `seed` are set per cell.
    pub hp: Hyperparams,
    pub jobs: usize,
    /// Skip content-based cells (CF only).
    pub content_enabled: bool,
}

const TOP_KEYS: &[&str] = &[
    "data.csv",
    "data.spec",
    "titles",
    "representations",
    "subsets",
    "algorithms",
    "dimred.mode",
    "dimred.k",
    "sampling.n_pos",
    "sampling.n_neg",
    "split",
    "seeds",
    "train_sizes",
    "ngram.min_doc_freq",
    "grid.skip_pv_subsets",
    "grid.content",
    "embeddings.path",
    "pv.dim",
    "pv.window",
    "pv.negatives",
    "pv.epochs",
    "pv.lr",
    "pv.scope",
    "cf.enabled",
    "cf.modes",
    "cf.factors",
    "cf.epochs",
    "cf.lr",
    "cf.lambda",
    "cf.threshold",
    "metrics.at_n",
    "jobs",
];

/// Hyperparameter keys under `hp.`.
const HP_KEYS: &[&str] = &[
    "lr",
    "l2",
    "max_iters",
    "tolerance",
    "cv_folds",
    "l2_grid",
    "svm_lambda",
    "svm_epochs",
    "c",
    "nu",
    "rbf_gamma",
    "smo_tolerance",
    "smo_max_iters",
    "max_depth",
    "min_samples_split",
    "n_trees",
    "bootstrap",
    "max_features",
];

impl ExperimentConfig {
    /// Defaults around a data source.
    pub fn new(data: DataSource) -> Self {
        ExperimentConfig {
            data,
            titles: DEFAULT_TARGET_TITLES.iter().map(|s| s.to_string()).collect(),
            representations: vec![Representation::Unigram, Representation::Bigram, Representation::Trigram],
            subsets: FieldSubset::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            dimred_mode: DimredMode::Off,
            dimred_k: crate::dimred::DEFAULT_K,
            n_pos: 500,
            n_neg: 500,
            split: 0.8,
            seeds: vec![42],
            train_sizes: vec![1.0],
            min_doc_freq: 1,
            skip_pv_subsets: true,
            embeddings: None,
            pv: PvConfig::default(),
            pv_scope: PvScope::Dataset,
            cf: CfSettings::default(),
            at_n: 0,
            hp: Hyperparams::new(Algorithm::LogReg),
            jobs: 1,
            content_enabled: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KvFile::parse(text).map_err(|e| match e {
            Error::Parse { line, message } => Error::config(format!("line {line}"), message),
            other => other,
        })?;
        let mut known: Vec<String> = TOP_KEYS.iter().map(|s| s.to_string()).collect();
        known.extend(HP_KEYS.iter().map(|k| format!("hp.{k}")));
        known.extend(SPEC_KEYS.iter().map(|k| format!("datagen.{k}")));
        let known_refs: Vec<&str> = known.iter().map(String::as_str).collect();
        kv.check_known(&known_refs)?;

        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) }
        };
        let has_inline = kv.entries.keys().any(|k| k.starts_with("datagen."));
        let data = match (kv.get("data.csv"), kv.get("data.spec"), has_inline) {
            (Some(p), None, false) => DataSource::Csv(resolve(p)),
            (None, Some(p), false) => DataSource::SpecFile(resolve(p)),
            (None, None, true) => DataSource::Inline(GenSpec::from_kv(&kv)?),
            (None, None, false) => {
                return Err(Error::config("data.csv", "missing; give data.csv, data.spec or datagen.* keys"))
            }
            _ => return Err(Error::config("data.csv", "give exactly one of data.csv, data.spec, datagen.*")),
        };
        let mut c = ExperimentConfig::new(data);

        fn enum_list<T: FromStr<Err = Error>>(kv: &KvFile, key: &str) -> Result<Option<Vec<T>>> {
            kv.get(key)
                .map(|v| {
                    crate::kv::split_list(v)
                        .map(|item| {
                            item.parse::<T>().map_err(|e| {
                                let msg = match e {
                                    Error::InvalidArgument(m) => m,
                                    other => other.to_string(),
                                };
                                Error::config(key, msg)
                            })
                        })
                        .collect()
                })
                .transpose()
        }
        fn one<T: FromStr<Err = Error>>(kv: &KvFile, key: &str) -> Result<Option<T>> {
            Ok(enum_list::<T>(kv, key)?.map(|mut v| {
                let last = v.pop();
                last.expect("nonempty")
            }))
        }

        if let Some(t) = kv.parse_list::<String>("titles")? {
            c.titles = t.iter().map(|s| normalize_title(s)).collect();
        }
        if let Some(v) = enum_list(&kv, "representations")? {
            c.representations = v;
        }
        if let Some(v) = enum_list(&kv, "subsets")? {
            c.subsets = v;
        }
        if let Some(v) = enum_list(&kv, "algorithms")? {
            c.algorithms = v;
        }
        if let Some(v) = one(&kv, "dimred.mode")? {
            c.dimred_mode = v;
        }
        macro_rules! scalar {
            ($key:literal => $($field:tt)+) => {
                if let Some(v) = kv.parse_value($key)? {
                    c.$($field)+ = v;
                }
            };
        }
        scalar!("dimred.k" => dimred_k);
        scalar!("sampling.n_pos" => n_pos);
        scalar!("sampling.n_neg" => n_neg);
        scalar!("split" => split);
        scalar!("ngram.min_doc_freq" => min_doc_freq);
        scalar!("grid.skip_pv_subsets" => skip_pv_subsets);
        scalar!("grid.content" => content_enabled);
        scalar!("pv.dim" => pv.dim);
        scalar!("pv.window" => pv.window);
        scalar!("pv.negatives" => pv.negative_samples);
        scalar!("pv.epochs" => pv.epochs);
        scalar!("pv.lr" => pv.learning_rate);
        scalar!("cf.enabled" => cf.enabled);
        scalar!("cf.factors" => cf.factors);
        scalar!("cf.epochs" => cf.epochs);
        scalar!("cf.lr" => cf.learning_rate);
        scalar!("cf.lambda" => cf.lambda);
        scalar!("cf.threshold" => cf.threshold);
        scalar!("metrics.at_n" => at_n);
        scalar!("jobs" => jobs);
        scalar!("hp.lr" => hp.learning_rate);
        scalar!("hp.l2" => hp.l2_strength);
        scalar!("hp.max_iters" => hp.max_iters);
        scalar!("hp.tolerance" => hp.tolerance);
        scalar!("hp.cv_folds" => hp.cv_folds);
        scalar!("hp.svm_lambda" => hp.svm_lambda);
        scalar!("hp.svm_epochs" => hp.svm_epochs);
        scalar!("hp.c" => hp.c);
        scalar!("hp.nu" => hp.nu);
        scalar!("hp.smo_tolerance" => hp.smo_tolerance);
        scalar!("hp.smo_max_iters" => hp.smo_max_iters);
        scalar!("hp.max_depth" => hp.max_depth);
        scalar!("hp.min_samples_split" => hp.min_samples_split);
        scalar!("hp.n_trees" => hp.n_trees);
        scalar!("hp.bootstrap" => hp.bootstrap);
        if let Some(v) = one(&kv, "pv.scope")? {
            c.pv_scope = v;
        }
        if let Some(v) = enum_list(&kv, "cf.modes")? {
            c.cf.modes = v;
        }
        if let Some(v) = kv.parse_list("seeds")? {
            c.seeds = v;
        }
        if let Some(v) = kv.parse_list("train_sizes")? {
            c.train_sizes = v;
        }
        if let Some(v) = kv.parse_list("hp.l2_grid")? {
            c.hp.l2_grid = v;
        }
        c.hp.rbf_gamma = optional(&kv, "hp.rbf_gamma")?;
        c.hp.forest_max_features = optional(&kv, "hp.max_features")?;
        c.embeddings = kv.get("embeddings.path").filter(|s| !s.is_empty()).map(resolve);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.titles.is_empty() || self.titles.iter().any(|t| t.is_empty()) {
            return Err(Error::config("titles", "at least one nonempty title is required"));
        }
        if self.content_enabled {
            if self.representations.is_empty() {
                return Err(Error::config("representations", "at least one is required"));
            }
            if self.subsets.is_empty() {
                return Err(Error::config("subsets", "at least one is required"));
            }
            if self.algorithms.is_empty() {
                return Err(Error::config("algorithms", "at least one is required"));
            }
        } else if !self.cf.enabled {
            return Err(Error::config("grid.content", "nothing to run: content cells off and cf.enabled = false"));
        }
        if self.dimred_k == 0 {
            return Err(Error::config("dimred.k", "must be at least 1"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::config("split", format!("must lie in (0, 1), got {}", self.split)));
        }
        if self.n_pos < 2 || self.n_neg < 2 {
            return Err(Error::config("sampling.n_pos", "n_pos and n_neg must be at least 2"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.train_sizes.is_empty() || self.train_sizes.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::config("train_sizes", "fractions must lie in (0, 1]"));
        }
        if self.min_doc_freq == 0 {
            return Err(Error::config("ngram.min_doc_freq", "must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        if self.pv.dim == 0 || self.pv.window == 0 || self.pv.epochs == 0 || !(self.pv.learning_rate > 0.0) {
            return Err(Error::config("pv.dim", "pv.dim, pv.window, pv.epochs and pv.lr must be positive"));
        }
        if self.cf.enabled {
            if self.cf.modes.is_empty() {
                return Err(Error::config("cf.modes", "at least one mode is required"));
            }
            if self.cf.factors == 0 {
                return Err(Error::config("cf.factors", "must be at least 1"));
            }
            if !(self.cf.learning_rate > 0.0) {
                return Err(Error::config("cf.lr", "must be positive"));
            }
        }
        self.hp.validate().map_err(|e| Error::config("hp", e.to_string()))?;
        let uses_word_avg = self.content_enabled && self.representations.contains(&Representation::WordAvg);
        match (&self.embeddings, uses_word_avg) {
            (None, true) => {
                return Err(Error::config("embeddings.path", "required by the word_avg representation"))
            }
            (Some(p), _) if !p.is_file() => {
                return Err(Error::config("embeddings.path", format!("{} does not exist", p.display())))
            }
            _ => {}
        }
        match &self.data {
            DataSource::Csv(p) if !p.is_file() => {
                Err(Error::config("data.csv", format!("{} does not exist", p.display())))
            }
            DataSource::SpecFile(p) if !p.is_file() => {
                Err(Error::config("data.spec", format!("{} does not exist", p.display())))
            }
            DataSource::Inline(spec) => spec.validate(),
            _ => Ok(()),
        }
    }

    /// Canonical text; [`ExperimentConfig::parse`] reads it back to an equal
    /// config.
    pub fn dump(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut lines: Vec<String> = Vec::new();
        match &self.data {
            DataSource::Csv(p) => lines.push(format!("data.csv = {}", p.display())),
            DataSource::SpecFile(p) => lines.push(format!("data.spec = {}", p.display())),
            DataSource::Inline(spec) => lines.extend(spec.to_kv_lines()),
        }
        let names = |v: &[&str]| v.join(", ");
        lines.push(format!("titles = {}", self.titles.join(", ")));
        lines.push(format!(
            "representations = {}",
            names(&self.representations.iter().map(|r| r.name()).collect::<Vec<_>>())
        ));
        lines.push(format!("subsets = {}", names(&self.subsets.iter().map(|s| s.name()).collect::<Vec<_>>())));
        lines.push(format!("algorithms = {}", names(&self.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>())));
        lines.push(format!("dimred.mode = {}", self.dimred_mode.name()));
        lines.push(format!("dimred.k = {}", self.dimred_k));
        lines.push(format!("sampling.n_pos = {}", self.n_pos));
        lines.push(format!("sampling.n_neg = {}", self.n_neg));
        lines.push(format!("split = {}", fmt_f64(self.split)));
        lines.push(format!("seeds = {}", join(self.seeds.iter().map(u64::to_string).collect())));
        lines.push(format!("train_sizes = {}", join(self.train_sizes.iter().map(|&f| fmt_f64(f)).collect())));
        lines.push(format!("ngram.min_doc_freq = {}", self.min_doc_freq));
        lines.push(format!("grid.skip_pv_subsets = {}", self.skip_pv_subsets));
        lines.push(format!("grid.content = {}", self.content_enabled));
        if let Some(p) = &self.embeddings {
            lines.push(format!("embeddings.path = {}", p.display()));
        }
        lines.push(format!("pv.dim = {}", self.pv.dim));
        lines.push(format!("pv.window = {}", self.pv.window));
        lines.push(format!("pv.negatives = {}", self.pv.negative_samples));
        lines.push(format!("pv.epochs = {}", self.pv.epochs));
        lines.push(format!("pv.lr = {}", fmt_f64(self.pv.learning_rate)));
        lines.push(format!("pv.scope = {}", self.pv_scope.name()));
        lines.push(format!("cf.enabled = {}", self.cf.enabled));
        lines.push(format!("cf.modes = {}", names(&self.cf.modes.iter().map(|m| m.name()).collect::<Vec<_>>())));
        lines.push(format!("cf.factors = {}", self.cf.factors));
        lines.push(format!("cf.epochs = {}", self.cf.epochs));
        lines.push(format!("cf.lr = {}", fmt_f64(self.cf.learning_rate)));
        lines.push(format!("cf.lambda = {}", fmt_f64(self.cf.lambda)));
        lines.push(format!("cf.threshold = {}", fmt_f64(self.cf.threshold)));
        lines.push(format!("metrics.at_n = {}", self.at_n));
        lines.push(format!("jobs = {}", self.jobs));
        let hp = &self.hp;
        lines.push(format!("hp.lr = {}", fmt_f64(hp.learning_rate)));
        lines.push(format!("hp.l2 = {}", fmt_f64(hp.l2_strength)));
        lines.push(format!("hp.max_iters = {}", hp.max_iters));
        lines.push(format!("hp.tolerance = {}", fmt_f64(hp.tolerance)));
        lines.push(format!("hp.cv_folds = {}", hp.cv_folds));
        lines.push(format!("hp.l2_grid = {}", join(hp.l2_grid.iter().map(|&v| fmt_f64(v)).collect())));
        lines.push(format!("hp.svm_lambda = {}", fmt_f64(hp.svm_lambda)));
        lines.push(format!("hp.svm_epochs = {}", hp.svm_epochs));
        lines.push(format!("hp.c = {}", fmt_f64(hp.c)));
        lines.push(format!("hp.nu = {}", fmt_f64(hp.nu)));
        if let Some(g) = hp.rbf_gamma {
            lines.push(format!("hp.rbf_gamma = {}", fmt_f64(g)));
        }
        lines.push(format!("hp.smo_tolerance = {}", fmt_f64(hp.smo_tolerance)));
        lines.push(format!("hp.smo_max_iters = {}", hp.smo_max_iters));
        lines.push(format!("hp.max_depth = {}", hp.max_depth));
        lines.push(format!("hp.min_samples_split = {}", hp.min_samples_split));
        lines.push(format!("hp.n_trees = {}", hp.n_trees));
        lines.push(format!("hp.bootstrap = {}", hp.bootstrap));
        if let Some(m) = hp.forest_max_features {
            lines.push(format!("hp.max_features = {m}"));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    /// First 16 hex digits of the SHA-256 of [`ExperimentConfig::dump`]
    /// without the `jobs` line, which never changes results.
    pub fn hash(&self) -> String {
        let text: String = self
            .dump()
            .lines()
            .filter(|l| !l.starts_with("jobs ="))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn optional<T: FromStr>(kv: &KvFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match kv.get(key) {
        None => Ok(None),
        Some(v) if v.eq_ignore_ascii_case("auto") || v.is_empty() => Ok(None),
        Some(_) => kv.parse_value(key),
    }
}
