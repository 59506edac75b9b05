//! Word-level n-gram featurization with binary (presence) encoding.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::features::SparseBinaryMatrix;

/// Lowercases and splits on every run of non-alphanumeric characters.
///
/// No stemming and no stopword removal. Symbols are separators, so `"C++"`
/// becomes `"c"`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sliding window of width `n`, space-joined.
pub fn extract_ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens
        .windows(n)
        .map(|w| {
            w.iter()
                .map(AsRef::as_ref)
                .collect::<Vec<&str>>()
                .join(" ")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NGramConfig {
    pub n: usize,
    pub min_doc_freq: usize,
}

impl NGramConfig {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_min_doc_freq(n, 1)
    }

    pub fn with_min_doc_freq(n: usize, min_doc_freq: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::invalid(format!("n-gram order must be 1, 2 or 3, got {n}")));
        }
        if min_doc_freq == 0 {
            return Err(Error::invalid("min_doc_freq must be at least 1"));
        }
        Ok(NGramConfig { n, min_doc_freq })
    }
}

/// N-gram to column index, columns assigned in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    n: usize,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    /// Entries in column order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        // BTreeMap order is lexicographic, which is also index order.
        self.index.iter().map(|(k, &v)| (v, k.as_str()))
    }

    /// One `"<index>\t<ngram>"` line per entry.
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        for (i, g) in self.iter() {
            writeln!(sink, "{i}\t{g}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(source: R, n: usize) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (lineno, line) in source.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let (i, g) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected <index>\\t<ngram>".into()))?;
            let i: usize = i.parse().map_err(|_| parse_err(format!("bad index {i:?}")))?;
            if i != index.len() {
                return Err(parse_err(format!("index {i} out of sequence")));
            }
            index.insert(g.to_string(), i);
        }
        let vocab = Vocabulary { n, index };
        if vocab.iter().enumerate().any(|(pos, (i, _))| pos != i) {
            return Err(Error::Format("vocabulary entries are not in lexicographic order".into()));
        }
        Ok(vocab)
    }
}

/// Keeps every n-gram occurring in at least `min_doc_freq` documents.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[Vec<S>], config: NGramConfig) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: HashSet<String> = extract_ngrams(doc, config.n).into_iter().collect();
        for g in distinct {
            *doc_freq.entry(g).or_insert(0) += 1;
        }
    }
    let index: BTreeMap<String, usize> = doc_freq
        .into_iter()
        .filter(|&(_, df)| df >= config.min_doc_freq)
        .enumerate()
        .map(|(i, (g, _))| (g, i))
        .collect();
    if index.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_doc_freq: config.min_doc_freq,
        });
    }
    Ok(Vocabulary { n: config.n, index })
}

/// Sorted column indices of the vocabulary n-grams present in a document.
pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<u32> {
    let cols: BTreeSet<u32> = extract_ngrams(tokens, vocab.n)
        .iter()
        .filter_map(|g| vocab.get(g))
        .map(|c| c as u32)
        .collect();
    cols.into_iter().collect()
}

pub fn vectorize_corpus<S: AsRef<str>>(corpus: &[Vec<S>], vocab: &Vocabulary) -> SparseBinaryMatrix {
    let rows = corpus.iter().map(|doc| vectorize(doc, vocab)).collect();
    SparseBinaryMatrix::from_rows(rows, vocab.len()).expect("vectorize yields sorted in-range columns")
}
