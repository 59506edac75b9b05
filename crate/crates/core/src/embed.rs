//! Dense document vectors: averages of pretrained word vectors, and
//! paragraph vectors (PV-DM with negative sampling).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::sigmoid;
use crate::error::{Error, Result};
use crate::tensor::read_u32;

/// Token → vector, all of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
    /// Lines whose token had already appeared; the later line wins.
    pub duplicates: usize,
}

/// Reads GloVe-style text: `token v1 v2 ... v_dim` per line. The first
/// line fixes `dim`. Blank lines are skipped.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut dim = 0usize;
    let mut vectors = HashMap::new();
    let mut duplicates = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse {
                line: line_no,
                message: "invalid UTF-8".into(),
            },
            _ => Error::Io(e),
        })?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|s| {
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("non-numeric component {s:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if dim == 0 {
            if values.is_empty() {
                return Err(Error::Parse { line: line_no, message: "no vector components".into() });
            }
            dim = values.len();
        } else if values.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {dim} components, found {}", values.len()),
            });
        }
        if vectors.insert(token.to_string(), values).is_some() {
            duplicates += 1;
        }
    }
    if dim == 0 {
        return Err(Error::Format("embedding file has no vectors".into()));
    }
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate embedding tokens; later lines kept");
    }
    Ok(EmbeddingTable { dim, vectors, duplicates })
}

/// Mean of the in-table token vectors, and how many tokens were found.
/// With none found the vector is zero.
pub fn embed_document_avg<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; table.dim];
    let mut found = 0;
    for t in tokens {
        if let Some(v) = table.vectors.get(t.as_ref()) {
            found += 1;
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
    }
    if found > 0 {
        let inv = 1.0 / found as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
    }
    (sum, found)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvConfig {
    pub dim: usize,
    /// Words on each side of the center word.
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PvConfig {
    fn default() -> Self {
        PvConfig {
            dim: 100,
            window: 5,
            negative_samples: 5,
            epochs: 20,
            learning_rate: 0.025,
            seed: 42,
        }
    }
}

/// Learning rate never decays below this fraction of the start value.
const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ParagraphVectorModel {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub vocab: Vec<String>,
    pub counts: Vec<u64>,
    /// Row-major `vocab × dim`.
    pub word_in: Vec<f64>,
    /// Row-major `vocab × dim`.
    pub word_out: Vec<f64>,
    /// Row-major `docs × dim`.
    pub docs: Vec<f64>,
    index: HashMap<String, usize>,
}

/// One training example: predict `center` from `doc` and `context` words
/// against `negatives`.
#[derive(Debug, Clone, PartialEq)]
pub struct PvExample {
    pub doc: usize,
    pub context: Vec<usize>,
    pub center: usize,
    pub negatives: Vec<usize>,
}

/// Gradient of one example's loss; rows keyed by word index, duplicates
/// already summed.
#[derive(Debug, Clone, PartialEq)]
pub struct PvGradient {
    pub doc: Vec<f64>,
    pub word_in: BTreeMap<usize, Vec<f64>>,
    pub word_out: BTreeMap<usize, Vec<f64>>,
}

fn noise_distribution(counts: &[u64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))
}

impl ParagraphVectorModel {
    pub fn n_docs(&self) -> usize {
        self.docs.len() / self.dim.max(1)
    }

    pub fn word_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn doc_vector(&self, d: usize) -> &[f64] {
        &self.docs[d * self.dim..(d + 1) * self.dim]
    }

    fn hidden(&self, doc: &[f64], context: &[usize]) -> Vec<f64> {
        let dim = self.dim;
        let mut h = doc.to_vec();
        for &c in context {
            for (a, b) in h.iter_mut().zip(&self.word_in[c * dim..(c + 1) * dim]) {
                *a += b;
            }
        }
        let inv = 1.0 / (1 + context.len()) as f64;
        h.iter_mut().for_each(|a| *a *= inv);
        h
    }

    fn out_row(&self, w: usize) -> &[f64] {
        &self.word_out[w * self.dim..(w + 1) * self.dim]
    }

    /// `-log σ(u_center · h) - Σ_k log σ(-u_k · h)` with `h` the mean of the
    /// doc vector and the context word vectors.
    pub fn example_loss(&self, ex: &PvExample) -> f64 {
        self.loss_with_doc(self.doc_vector(ex.doc), ex)
    }

    fn loss_with_doc(&self, doc: &[f64], ex: &PvExample) -> f64 {
        let h = self.hidden(doc, &ex.context);
        let pos = crate::linalg::dot(self.out_row(ex.center), &h);
        let mut loss = softplus(-pos);
        for &k in &ex.negatives {
            loss += softplus(crate::linalg::dot(self.out_row(k), &h));
        }
        loss
    }

    pub fn example_gradient(&self, ex: &PvExample) -> PvGradient {
        self.gradient_with_doc(self.doc_vector(ex.doc), ex)
    }

    fn gradient_with_doc(&self, doc: &[f64], ex: &PvExample) -> PvGradient {
        let dim = self.dim;
        let h = self.hidden(doc, &ex.context);
        let mut dh = vec![0.0; dim];
        let mut word_out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let targets = std::iter::once((ex.center, 1.0)).chain(ex.negatives.iter().map(|&k| (k, 0.0)));
        for (w, label) in targets {
            let u = self.out_row(w);
            let g = sigmoid(crate::linalg::dot(u, &h)) - label;
            for k in 0..dim {
                dh[k] += g * u[k];
            }
            let row = word_out.entry(w).or_insert_with(|| vec![0.0; dim]);
            for k in 0..dim {
                row[k] += g * h[k];
            }
        }
        let inv = 1.0 / (1 + ex.context.len()) as f64;
        let share: Vec<f64> = dh.iter().map(|v| v * inv).collect();
        let mut word_in: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &c in &ex.context {
            let row = word_in.entry(c).or_insert_with(|| vec![0.0; dim]);
            for k in 0..dim {
                row[k] += share[k];
            }
        }
        PvGradient { doc: share, word_in, word_out }
    }

    fn apply(&mut self, doc: usize, g: &PvGradient, lr: f64, update_words: bool) {
        let dim = self.dim;
        for (k, v) in g.doc.iter().enumerate() {
            self.docs[doc * dim + k] -= lr * v;
        }
        if update_words {
            for (&w, row) in &g.word_in {
                for k in 0..dim {
                    self.word_in[w * dim + k] -= lr * row[k];
                }
            }
            for (&w, row) in &g.word_out {
                for k in 0..dim {
                    self.word_out[w * dim + k] -= lr * row[k];
                }
            }
        }
    }

    fn all_finite(&self) -> bool {
        [&self.word_in, &self.word_out, &self.docs]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Header `JRPV | u32 version | u32 dim | u32 vocab | u32 docs | u32
    /// window | u32 negatives`, then per word `u32 len | UTF-8 | u64 count`,
    /// then `word_in`, `word_out` and `docs` as row-major little-endian f32.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PV_MAGIC)?;
        for v in [
            PV_VERSION,
            self.dim as u32,
            self.vocab.len() as u32,
            self.n_docs() as u32,
            self.window as u32,
            self.negative_samples as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (word, &c) in self.vocab.iter().zip(&self.counts) {
            w.write_all(&(word.len() as u32).to_le_bytes())?;
            w.write_all(word.as_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        for m in [&self.word_in, &self.word_out, &self.docs] {
            for &v in m.iter() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PV_MAGIC {
            return Err(Error::Format("not a paragraph-vector model file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != PV_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let n_vocab = read_u32(&mut r)? as usize;
        let n_docs = read_u32(&mut r)? as usize;
        let window = read_u32(&mut r)? as usize;
        let negative_samples = read_u32(&mut r)? as usize;
        let mut vocab = Vec::with_capacity(n_vocab.min(1 << 20));
        let mut counts = Vec::with_capacity(n_vocab.min(1 << 20));
        for _ in 0..n_vocab {
            let len = read_u32(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            vocab.push(String::from_utf8(buf).map_err(|_| Error::Format("vocabulary entry is not UTF-8".into()))?);
            let mut c = [0u8; 8];
            r.read_exact(&mut c)?;
            counts.push(u64::from_le_bytes(c));
        }
        let mut read_f32s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 4];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect())
        };
        let word_in = read_f32s(n_vocab * dim)?;
        let word_out = read_f32s(n_vocab * dim)?;
        let docs = read_f32s(n_docs * dim)?;
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(ParagraphVectorModel {
            dim,
            window,
            negative_samples,
            vocab,
            counts,
            word_in,
            word_out,
            docs,
            index,
        })
    }
}

const PV_MAGIC: &[u8; 4] = b"JRPV";
const PV_VERSION: u32 = 1;

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn context_of(ids: &[usize], pos: usize, window: usize) -> Vec<usize> {
    let lo = pos.saturating_sub(window);
    let hi = (pos + window + 1).min(ids.len());
    (lo..hi).filter(|&j| j != pos).map(|j| ids[j]).collect()
}

fn draw_negatives(noise: &WeightedIndex<f64>, center: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let w = noise.sample(rng);
        if w != center {
            out.push(w);
        }
    }
    out
}

/// Trains PV-DM; also returns the mean example loss of each epoch, each
/// loss taken just before its update.
pub fn train_paragraph_vectors_traced<S: AsRef<str>>(
    corpus: &[Vec<S>],
    config: &PvConfig,
) -> Result<(ParagraphVectorModel, Vec<f64>)> {
    if corpus.is_empty() {
        return Err(Error::invalid("paragraph vectors need at least one document"));
    }
    if config.dim == 0 || config.window == 0 || config.epochs == 0 {
        return Err(Error::invalid("dim, window and epochs must be at least 1"));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let mut counts_map: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in corpus {
        for t in doc {
            *counts_map.entry(t.as_ref()).or_default() += 1;
        }
    }
    if counts_map.len() < 2 {
        return Err(Error::invalid("paragraph vectors need at least 2 distinct tokens"));
    }
    let vocab: Vec<String> = counts_map.keys().map(|s| s.to_string()).collect();
    let counts: Vec<u64> = counts_map.values().copied().collect();
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f64;
    let mut init = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
    let word_in = init(vocab.len() * dim);
    let docs = init(corpus.len() * dim);
    let mut model = ParagraphVectorModel {
        dim,
        window: config.window,
        negative_samples: config.negative_samples,
        word_out: vec![0.0; vocab.len() * dim],
        vocab,
        counts,
        word_in,
        docs,
        index,
    };
    let noise = noise_distribution(&model.counts)?;
    let ids: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| d.iter().map(|t| model.index[t.as_ref()]).collect())
        .collect();

    let total = (ids.iter().map(Vec::len).sum::<usize>() * config.epochs).max(1) as f64;
    let mut seen = 0usize;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut n_ex) = (0.0, 0usize);
        for &d in &order {
            for pos in 0..ids[d].len() {
                let lr = config.learning_rate * (1.0 - seen as f64 / total).max(MIN_LR_FRACTION);
                seen += 1;
                let center = ids[d][pos];
                let ex = PvExample {
                    doc: d,
                    context: context_of(&ids[d], pos, config.window),
                    center,
                    negatives: draw_negatives(&noise, center, config.negative_samples, &mut rng),
                };
                loss_sum += model.example_loss(&ex);
                n_ex += 1;
                let g = model.example_gradient(&ex);
                model.apply(d, &g, lr, true);
            }
        }
        if !model.all_finite() {
            return Err(Error::invalid(format!(
                "paragraph-vector training produced non-finite values in epoch {}",
                epoch + 1
            )));
        }
        trace.push(loss_sum / n_ex.max(1) as f64);
    }
    Ok((model, trace))
}

pub fn train_paragraph_vectors<S: AsRef<str>>(corpus: &[Vec<S>], config: &PvConfig) -> Result<ParagraphVectorModel> {
    Ok(train_paragraph_vectors_traced(corpus, config)?.0)
}

/// Fits a fresh doc vector with the word matrices frozen. Returns the vector
/// and whether any token was in the vocabulary; with none, or with zero
/// steps, the seeded initialization comes back unchanged.
pub fn infer_doc_vector<S: AsRef<str>>(
    tokens: &[S],
    model: &ParagraphVectorModel,
    steps: usize,
    learning_rate: f64,
    seed: u64,
) -> (Vec<f64>, bool) {
    let dim = model.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 0.5 / dim as f64;
    let mut doc: Vec<f64> = (0..dim).map(|_| rng.random_range(-bound..bound)).collect();
    let ids: Vec<usize> = tokens.iter().filter_map(|t| model.word_index(t.as_ref())).collect();
    if ids.is_empty() {
        return (doc, false);
    }
    let Ok(noise) = noise_distribution(&model.counts) else {
        return (doc, true);
    };
    let total = (ids.len() * steps).max(1) as f64;
    let mut seen = 0usize;
    for _ in 0..steps {
        for pos in 0..ids.len() {
            let lr = learning_rate * (1.0 - seen as f64 / total).max(MIN_LR_FRACTION);
            seen += 1;
            let ex = PvExample {
                doc: 0,
                context: context_of(&ids, pos, model.window),
                center: ids[pos],
                negatives: draw_negatives(&noise, ids[pos], model.negative_samples, &mut rng),
            };
            let g = model.gradient_with_doc(&doc, &ex);
            for (d, v) in doc.iter_mut().zip(&g.doc) {
                *d -= lr * v;
            }
        }
    }
    (doc, true)
}
