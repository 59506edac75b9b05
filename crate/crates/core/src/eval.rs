//! Binary classification metrics and fit timing.

use std::time::Instant;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// A ratio whose denominator may be zero; 0/0 is reported as 0 with
/// `undefined` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub undefined: bool,
}

fn ratio(num: u64, den: u64) -> Metric {
    if den == 0 {
        Metric { value: 0.0, undefined: true }
    } else {
        Metric { value: num as f64 / den as f64, undefined: false }
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Metric {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Metric {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> Metric {
        ratio(self.tp + self.tn, self.total())
    }
}

/// Tallies predictions against truth with 1 as the positive class.
pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::invalid("confusion matrix of zero examples"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn precision(cm: &ConfusionMatrix) -> f64 {
    cm.precision().value
}

pub fn recall(cm: &ConfusionMatrix) -> f64 {
    cm.recall().value
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.accuracy().value
}

/// Unweighted mean.
pub fn macro_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("macro average of an empty list"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Runs `f` and returns its output with the elapsed wall-clock seconds,
/// measured on a monotonic clock.
pub fn time_fit<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Ranks examples by descending score (ties by index) and returns
/// `(precision@n, recall@n)` for the top `n`.
pub fn precision_recall_at_n(scores: &[f64], truth: &[u8], n: usize) -> Result<(f64, f64)> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: scores.len() });
    }
    if n == 0 || n > scores.len() {
        return Err(Error::invalid(format!("n = {n} out of range 1..={}", scores.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let hits = order[..n].iter().filter(|&&i| truth[i] != 0).count() as u64;
    let positives = truth.iter().filter(|&&t| t != 0).count() as u64;
    Ok((hits as f64 / n as f64, ratio(hits, positives).value))
}
