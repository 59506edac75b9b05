//! Grid execution: datasets, featurization and cells.

use std::fs::File;
use std::io::BufReader;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{DataSource, DimredMode, ExperimentConfig, PvScope, Representation};
use crate::cf::{build_rating_matrix, classify_from_cf, train_cf, CfMode, TARGET_ITEM};
use crate::classify::{self, Algorithm, Params};
use crate::datagen::{generate_corpus, GenSpec};
use crate::dimred::{project, truncated_svd};
use crate::embed::{embed_document_avg, load_embeddings, train_paragraph_vectors, EmbeddingTable, ParagraphVectorModel};
use crate::error::{Error, Result};
use crate::eval::{confusion, precision_recall_at_n, ConfusionMatrix};
use crate::features::FeatureMatrix;
use crate::kv::KvFile;
use crate::linalg::DenseMatrix;
use crate::profile::{
    assemble_field_text, balanced_sample, normalize_durations, parse_profiles, train_test_split, FieldSubset,
    LabeledDataset, Profile, RowError,
};
use crate::text::{build_vocabulary, tokenize, vectorize_corpus, NGramConfig, Vocabulary};

/// Profiles plus what the loader had to say about the source.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub profiles: Vec<Profile>,
    pub rows_read: usize,
    pub row_errors: Vec<RowError>,
}

pub fn load_data(source: &DataSource) -> Result<LoadedData> {
    let (mut profiles, rows_read, row_errors) = match source {
        DataSource::Csv(path) => {
            let out = parse_profiles(BufReader::new(File::open(path)?))?;
            (out.profiles, out.rows_read, out.row_errors)
        }
        DataSource::SpecFile(path) => {
            let text = std::fs::read_to_string(path)?;
            let spec = GenSpec::from_kv(&KvFile::parse(&text)?)?;
            let corpus = generate_corpus(&spec)?;
            let n = corpus.profiles.len();
            (corpus.profiles, n, Vec::new())
        }
        DataSource::Inline(spec) => {
            let corpus = generate_corpus(spec)?;
            let n = corpus.profiles.len();
            (corpus.profiles, n, Vec::new())
        }
    };
    for e in &row_errors {
        warn!("skipped line {}: {}", e.line, e.message);
    }
    normalize_durations(&mut profiles);
    info!("loaded {} profiles ({} rows read, {} skipped)", profiles.len(), rows_read, row_errors.len());
    Ok(LoadedData { profiles, rows_read, row_errors })
}

/// Representation label used for collaborative-filtering rows.
pub const CF_REPRESENTATION: &str = "ratings";
/// Field-subset label used for collaborative-filtering rows.
pub const CF_SUBSET: &str = "-";

#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub seed: u64,
    pub title: String,
    pub representation: String,
    pub subset: String,
    /// Algorithm or CF mode name.
    pub method: String,
    /// Requested SVD rank; `None` when reduction is off.
    pub dimred: Option<usize>,
    pub train_size: f64,
}

impl CellKey {
    pub fn is_cf(&self) -> bool {
        self.representation == CF_REPRESENTATION
    }

    pub fn dimred_label(&self) -> String {
        match self.dimred {
            None => "off".to_string(),
            Some(k) => format!("k{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    /// Rank actually used; below the request when the data is smaller.
    pub k_effective: Option<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub confusion: Option<ConfusionMatrix>,
    /// precision@n and recall@n over the scores, when enabled.
    pub at_n: Option<(f64, f64)>,
    pub training_seconds: f64,
    /// Free-form remarks such as `nu_unreachable`.
    pub note: String,
    pub error: Option<String>,
}

impl CellResult {
    fn failed(key: CellKey, err: &Error) -> Self {
        CellResult {
            key,
            k_effective: None,
            n_train: 0,
            n_test: 0,
            n_features: 0,
            confusion: None,
            at_n: None,
            training_seconds: 0.0,
            note: String::new(),
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub config_hash: String,
    pub titles: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
    /// Combinations left out of the Cartesian product, with the reason.
    pub skipped: Vec<String>,
    /// Corpus facts for the manifest.
    pub data_notes: Vec<String>,
}

impl EvalReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Dense stand-ins for the two halves of a dataset after featurization.
#[derive(Debug, Clone)]
pub struct Featurized {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub y_train: Vec<u8>,
    pub y_test: Vec<u8>,
    pub vocabulary: Option<Vocabulary>,
    pub note: String,
}

/// Shared resources for featurization.
pub struct FeatureContext<'a> {
    pub min_doc_freq: usize,
    pub embeddings: Option<&'a EmbeddingTable>,
    pub pv: &'a crate::embed::PvConfig,
    /// Model over every profile, for corpus-scope paragraph vectors.
    pub pv_corpus: Option<&'a ParagraphVectorModel>,
}

fn tokens_for(profiles: &[Profile], idx: usize, subset: FieldSubset) -> Vec<String> {
    tokenize(&assemble_field_text(&profiles[idx], subset))
}

fn dense_rows(rows: Vec<Vec<f64>>, dim: usize) -> Result<FeatureMatrix> {
    if rows.is_empty() {
        return Ok(FeatureMatrix::Dense(DenseMatrix::zeros(0, dim)));
    }
    Ok(FeatureMatrix::Dense(DenseMatrix::from_rows(&rows)?))
}

/// Featurizes one split dataset. N-gram vocabularies come from the training
/// documents only; paragraph vectors are trained without labels.
pub fn featurize(
    profiles: &[Profile],
    dataset: &LabeledDataset,
    rep: Representation,
    subset: FieldSubset,
    ctx: &FeatureContext<'_>,
    seed: u64,
) -> Result<Featurized> {
    let split = dataset
        .split
        .as_ref()
        .ok_or_else(|| Error::invalid("dataset has no train/test split"))?;
    let y_train: Vec<u8> = split.train.iter().map(|&i| dataset.examples[i].label).collect();
    let y_test: Vec<u8> = split.test.iter().map(|&i| dataset.examples[i].label).collect();
    let docs = |rows: &[usize]| -> Vec<Vec<String>> {
        rows.iter()
            .map(|&i| tokens_for(profiles, dataset.examples[i].profile_index, subset))
            .collect()
    };
    let mut note = String::new();
    let (train, test, vocabulary) = match rep {
        Representation::Unigram | Representation::Bigram | Representation::Trigram => {
            let n = rep.ngram_order().expect("n-gram representation");
            let train_docs = docs(&split.train);
            let vocab = build_vocabulary(&train_docs, NGramConfig::with_min_doc_freq(n, ctx.min_doc_freq)?)?;
            let train = FeatureMatrix::Sparse(vectorize_corpus(&train_docs, &vocab));
            let test = FeatureMatrix::Sparse(vectorize_corpus(&docs(&split.test), &vocab));
            (train, test, Some(vocab))
        }
        Representation::WordAvg => {
            let table = ctx
                .embeddings
                .ok_or_else(|| Error::invalid("word_avg needs an embeddings file"))?;
            let mut missing = 0usize;
            let mut embed = |rows: &[usize]| -> Result<FeatureMatrix> {
                let vecs: Vec<Vec<f64>> = docs(rows)
                    .iter()
                    .map(|d| {
                        let (v, found) = embed_document_avg(d, table);
                        missing += usize::from(found == 0);
                        v
                    })
                    .collect();
                dense_rows(vecs, table.dim)
            };
            let train = embed(&split.train)?;
            let test = embed(&split.test)?;
            if missing > 0 {
                note = format!("{missing} docs without known words");
            }
            (train, test, None)
        }
        Representation::ParagraphVector => {
            let vectors_for = |model: &ParagraphVectorModel, doc_of: &dyn Fn(usize) -> usize, rows: &[usize]| {
                dense_rows(rows.iter().map(|&i| model.doc_vector(doc_of(i)).to_vec()).collect(), model.dim)
            };
            match ctx.pv_corpus {
                Some(model) => {
                    let doc_of = |i: usize| dataset.examples[i].profile_index;
                    (vectors_for(model, &doc_of, &split.train)?, vectors_for(model, &doc_of, &split.test)?, None)
                }
                None => {
                    let all: Vec<usize> = (0..dataset.examples.len()).collect();
                    let mut cfg = ctx.pv.clone();
                    cfg.seed = seed;
                    let model = train_paragraph_vectors(&docs(&all), &cfg)?;
                    let doc_of = |i: usize| i;
                    (vectors_for(&model, &doc_of, &split.train)?, vectors_for(&model, &doc_of, &split.test)?, None)
                }
            }
        }
    };
    Ok(Featurized { train, test, y_train, y_test, vocabulary, note })
}

/// Stratified subsample of training rows: each label keeps
/// `round(fraction * count)` rows, at least one.
pub fn subsample_train(labels: &[u8], fraction: f64, seed: u64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..labels.len()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for label in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let n = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len());
        keep.extend_from_slice(&rows[..n]);
    }
    keep.sort_unstable();
    keep
}

/// The reduction settings a config asks for, in report order.
pub fn dimred_variants(config: &ExperimentConfig) -> Vec<Option<usize>> {
    match config.dimred_mode {
        DimredMode::Off => vec![None],
        DimredMode::On => vec![Some(config.dimred_k)],
        DimredMode::Both => vec![None, Some(config.dimred_k)],
    }
}

#[derive(Debug, Clone)]
enum Job {
    Content { seed_idx: usize, title_idx: usize, rep: Representation, subset: FieldSubset },
    Cf { seed_idx: usize, title_idx: usize, mode: CfMode },
}

/// Content and CF jobs in report order, plus the combinations skipped.
fn plan(config: &ExperimentConfig) -> (Vec<Job>, Vec<String>) {
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    if config.content_enabled && config.skip_pv_subsets && config.representations.contains(&Representation::ParagraphVector)
    {
        for s in &config.subsets {
            if *s != FieldSubset::All {
                skipped.push(format!("paragraph_vector x {}: only the all subset is run", s.name()));
            }
        }
    }
    for seed_idx in 0..config.seeds.len() {
        for title_idx in 0..config.titles.len() {
            if config.content_enabled {
                for &rep in &config.representations {
                    for &subset in &config.subsets {
                        if rep == Representation::ParagraphVector && config.skip_pv_subsets && subset != FieldSubset::All {
                            continue;
                        }
                        jobs.push(Job::Content { seed_idx, title_idx, rep, subset });
                    }
                }
            }
            if config.cf.enabled {
                for &mode in &config.cf.modes {
                    jobs.push(Job::Cf { seed_idx, title_idx, mode });
                }
            }
        }
    }
    (jobs, skipped)
}

/// Number of cells a config produces.
pub fn cell_count(config: &ExperimentConfig) -> usize {
    let per_content = dimred_variants(config).len() * config.train_sizes.len() * config.algorithms.len();
    plan(config)
        .0
        .iter()
        .map(|j| match j {
            Job::Content { .. } => per_content,
            Job::Cf { .. } => 1,
        })
        .sum()
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    profiles: &'a [Profile],
    datasets: Vec<Vec<std::result::Result<LabeledDataset, String>>>,
    embeddings: Option<EmbeddingTable>,
    /// Per seed, per subset index.
    pv_corpus: Vec<Vec<Option<ParagraphVectorModel>>>,
}

/// Loads the data named by the config and runs every cell.
pub fn run_grid(config: &ExperimentConfig) -> Result<EvalReport> {
    let data = load_data(&config.data)?;
    let mut report = run_grid_on(config, &data.profiles)?;
    report.data_notes.insert(0, format!("rows_read = {}", data.rows_read));
    report.data_notes.insert(1, format!("rows_skipped = {}", data.row_errors.len()));
    Ok(report)
}

/// Samples one balanced dataset per (seed, title) and splits it.
pub fn make_dataset(profiles: &[Profile], config: &ExperimentConfig, title: &str, seed: u64) -> Result<LabeledDataset> {
    let ds = balanced_sample(profiles, title, config.n_pos, config.n_neg, seed)?;
    train_test_split(ds, config.split, seed)
}

/// Runs every cell on already loaded profiles. Only setup problems (an
/// unreadable embeddings file, a bad thread count) are errors; cell
/// failures are recorded in the report.
pub fn run_grid_on(config: &ExperimentConfig, profiles: &[Profile]) -> Result<EvalReport> {
    config.validate()?;
    let embeddings = match (&config.embeddings, config.representations.contains(&Representation::WordAvg)) {
        (Some(path), true) if config.content_enabled => {
            let table = load_embeddings(BufReader::new(File::open(path)?))?;
            info!("loaded {} word vectors of dimension {}", table.vectors.len(), table.dim);
            Some(table)
        }
        _ => None,
    };
    let datasets: Vec<Vec<_>> = config
        .seeds
        .iter()
        .map(|&seed| {
            config
                .titles
                .iter()
                .map(|t| make_dataset(profiles, config, t, seed).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {} worker threads: {e}", config.jobs)))?;

    let wants_pv_corpus = config.content_enabled
        && config.pv_scope == PvScope::Corpus
        && config.representations.contains(&Representation::ParagraphVector);
    let pv_corpus: Vec<Vec<Option<ParagraphVectorModel>>> = config
        .seeds
        .iter()
        .map(|&seed| {
            config
                .subsets
                .iter()
                .map(|&subset| {
                    let wanted = wants_pv_corpus && (subset == FieldSubset::All || !config.skip_pv_subsets);
                    if !wanted {
                        return Ok(None);
                    }
                    info!("training corpus paragraph vectors for seed {seed}, subset {subset}");
                    let docs: Vec<Vec<String>> = (0..profiles.len()).map(|i| tokens_for(profiles, i, subset)).collect();
                    let mut cfg = config.pv.clone();
                    cfg.seed = seed;
                    pool.install(|| train_paragraph_vectors(&docs, &cfg)).map(Some)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let shared = Shared { config, profiles, datasets, embeddings, pv_corpus };
    let (jobs, skipped) = plan(config);
    info!("running {} cells in {} jobs", cell_count(config), jobs.len());
    let per_job: Vec<Vec<CellResult>> = pool.install(|| jobs.par_iter().map(|j| run_job(&shared, j)).collect());
    let cells: Vec<CellResult> = per_job.into_iter().flatten().collect();
    let mut data_notes = vec![format!("profiles = {}", profiles.len())];
    for (s, row) in shared.datasets.iter().enumerate() {
        for (t, ds) in row.iter().enumerate() {
            if let Err(e) = ds {
                data_notes.push(format!("seed {} title {:?}: {e}", config.seeds[s], config.titles[t]));
            }
        }
    }
    Ok(EvalReport {
        config_hash: config.hash(),
        titles: config.titles.clone(),
        seeds: config.seeds.clone(),
        cells,
        skipped,
        data_notes,
    })
}

fn run_job(shared: &Shared<'_>, job: &Job) -> Vec<CellResult> {
    match *job {
        Job::Content { seed_idx, title_idx, rep, subset } => run_content(shared, seed_idx, title_idx, rep, subset),
        Job::Cf { seed_idx, title_idx, mode } => vec![run_cf(shared, seed_idx, title_idx, mode)],
    }
}

fn run_content(
    shared: &Shared<'_>,
    seed_idx: usize,
    title_idx: usize,
    rep: Representation,
    subset: FieldSubset,
) -> Vec<CellResult> {
    let config = shared.config;
    let seed = config.seeds[seed_idx];
    let title = &config.titles[title_idx];
    let key = |method: Algorithm, dimred: Option<usize>, size: f64| CellKey {
        seed,
        title: title.clone(),
        representation: rep.name().to_string(),
        subset: subset.name().to_string(),
        method: method.name().to_string(),
        dimred,
        train_size: size,
    };
    let variants = dimred_variants(config);
    let all_failed = |err: &Error| -> Vec<CellResult> {
        let mut out = Vec::new();
        for &d in &variants {
            for &size in &config.train_sizes {
                for &a in &config.algorithms {
                    out.push(CellResult::failed(key(a, d, size), err));
                }
            }
        }
        out
    };
    let dataset = match &shared.datasets[seed_idx][title_idx] {
        Ok(ds) => ds,
        Err(msg) => return all_failed(&Error::invalid(msg.clone())),
    };
    let subset_idx = config.subsets.iter().position(|&s| s == subset).expect("configured subset");
    let ctx = FeatureContext {
        min_doc_freq: config.min_doc_freq,
        embeddings: shared.embeddings.as_ref(),
        pv: &config.pv,
        pv_corpus: shared.pv_corpus.get(seed_idx).and_then(|v| v[subset_idx].as_ref()),
    };
    debug!("featurizing {title} / {rep} / {subset} (seed {seed})");
    let feats = match featurize(shared.profiles, dataset, rep, subset, &ctx, seed) {
        Ok(f) => f,
        Err(e) => return all_failed(&e),
    };

    let mut out = Vec::new();
    for &d in &variants {
        let reduced = match d {
            None => Ok((feats.train.clone(), feats.test.clone(), None)),
            Some(k) => reduce(&feats, k, seed),
        };
        let (x_train, x_test, k_eff) = match reduced {
            Ok(r) => r,
            Err(e) => {
                for &size in &config.train_sizes {
                    for &a in &config.algorithms {
                        out.push(CellResult::failed(key(a, d, size), &e));
                    }
                }
                continue;
            }
        };
        for &size in &config.train_sizes {
            let rows = subsample_train(&feats.y_train, size, seed);
            let x_fit = if rows.len() == feats.y_train.len() { x_train.clone() } else { x_train.select_rows(&rows) };
            let y_fit: Vec<u8> = rows.iter().map(|&i| feats.y_train[i]).collect();
            for &a in &config.algorithms {
                let mut cell = evaluate_classifier(config, a, seed, &x_fit, &y_fit, &x_test, &feats.y_test, key(a, d, size));
                cell.k_effective = k_eff;
                if !feats.note.is_empty() {
                    cell.note = join_notes(&cell.note, &feats.note);
                }
                out.push(cell);
            }
        }
    }
    out
}

fn join_notes(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}; {b}"),
    }
}

/// SVD fitted on the training rows, applied to both halves. The rank is
/// clamped to the training matrix's smaller side.
fn reduce(feats: &Featurized, k: usize, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix, Option<usize>)> {
    let k_eff = k.min(feats.train.n_rows()).min(feats.train.n_cols());
    if k_eff == 0 {
        return Err(Error::invalid("cannot reduce an empty feature matrix"));
    }
    let svd = truncated_svd(&feats.train, k_eff, seed)?;
    let train = FeatureMatrix::Dense(project(&feats.train, &svd)?);
    let test = FeatureMatrix::Dense(project(&feats.test, &svd)?);
    Ok((train, test, Some(k_eff)))
}

#[allow(clippy::too_many_arguments)]
fn evaluate_classifier(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    seed: u64,
    x_train: &FeatureMatrix,
    y_train: &[u8],
    x_test: &FeatureMatrix,
    y_test: &[u8],
    key: CellKey,
) -> CellResult {
    let mut hp = config.hp.clone();
    hp.algorithm = algorithm;
    hp.seed = seed;
    let outcome = (|| -> Result<(ConfusionMatrix, Option<(f64, f64)>, f64, String)> {
        let model = classify::fit(x_train, y_train, &hp)?;
        let pred = model.predict(x_test)?;
        let cm = confusion(&pred, y_test)?;
        let at_n = if config.at_n > 0 {
            let scores = model.predict_score(x_test)?;
            Some(precision_recall_at_n(&scores, y_test, config.at_n)?)
        } else {
            None
        };
        let note = match &model.params {
            Params::KernelSvm(m) if m.nu_unreachable => "nu_unreachable".to_string(),
            _ => String::new(),
        };
        Ok((cm, at_n, model.training_seconds, note))
    })();
    match outcome {
        Ok((cm, at_n, secs, note)) => CellResult {
            key,
            k_effective: None,
            n_train: y_train.len(),
            n_test: y_test.len(),
            n_features: x_train.n_cols(),
            confusion: Some(cm),
            at_n,
            training_seconds: secs,
            note,
            error: None,
        },
        Err(e) => {
            warn!("cell {} / {} / {} / {} failed: {e}", key.title, key.representation, key.subset, key.method);
            let mut c = CellResult::failed(key, &e);
            c.n_train = y_train.len();
            c.n_test = y_test.len();
            c.n_features = x_train.n_cols();
            c
        }
    }
}

fn run_cf(shared: &Shared<'_>, seed_idx: usize, title_idx: usize, mode: CfMode) -> CellResult {
    let config = shared.config;
    let seed = config.seeds[seed_idx];
    let title = &config.titles[title_idx];
    let key = CellKey {
        seed,
        title: title.clone(),
        representation: CF_REPRESENTATION.to_string(),
        subset: CF_SUBSET.to_string(),
        method: mode.name().to_string(),
        dimred: None,
        train_size: 1.0,
    };
    let dataset = match &shared.datasets[seed_idx][title_idx] {
        Ok(ds) => ds,
        Err(msg) => return CellResult::failed(key, &Error::invalid(msg.clone())),
    };
    let outcome = (|| -> Result<CellResult> {
        let matrix = build_rating_matrix(shared.profiles, dataset, title)?;
        let cfg = config.cf.model_config(mode, seed);
        let (model, secs) = crate::eval::time_fit(|| train_cf(&matrix, &cfg));
        let model = model?;
        let users = &matrix.test_users;
        let pred = classify_from_cf(&model, users, config.cf.threshold);
        let truth: Vec<u8> = users.iter().map(|&u| matrix.labels[u]).collect();
        let cm = confusion(&pred, &truth)?;
        let at_n = if config.at_n > 0 {
            let scores: Vec<f64> = users.iter().map(|&u| model.predict_rating(u, TARGET_ITEM)).collect();
            Some(precision_recall_at_n(&scores, &truth, config.at_n)?)
        } else {
            None
        };
        Ok(CellResult {
            key: key.clone(),
            k_effective: None,
            n_train: matrix.train_users.len(),
            n_test: users.len(),
            n_features: cfg.factors,
            confusion: Some(cm),
            at_n,
            training_seconds: secs,
            note: String::new(),
            error: None,
        })
    })();
    outcome.unwrap_or_else(|e| {
        warn!("cf cell {title} / {} failed: {e}", mode.name());
        CellResult::failed(key, &e)
    })
}
