//! Report files: per-cell CSV, timings, macro summary, text tables and a
//! manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::grid::{CellKey, CellResult, EvalReport, CF_REPRESENTATION};
use super::config::Representation;
use crate::cf::CfMode;
use crate::classify::Algorithm;
use crate::error::{Error, Result};
use crate::eval::{macro_average, ConfusionMatrix};

pub const RESULTS_HEADER: [&str; 25] = [
    "seed",
    "title",
    "representation",
    "subset",
    "method",
    "dimred",
    "k_effective",
    "train_size",
    "n_train",
    "n_test",
    "n_features",
    "tp",
    "fp",
    "tn",
    "fn",
    "precision",
    "precision_undefined",
    "recall",
    "recall_undefined",
    "accuracy",
    "precision_at_n",
    "recall_at_n",
    "config_hash",
    "note",
    "error",
];

pub const MACRO_HEADER: [&str; 10] = [
    "seed",
    "representation",
    "subset",
    "method",
    "dimred",
    "train_size",
    "n_titles",
    "macro_precision",
    "macro_recall",
    "best",
];

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn size_label(f: f64) -> String {
    format!("{f}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn key_fields(k: &CellKey) -> [String; 6] {
    [
        k.seed.to_string(),
        k.title.clone(),
        k.representation.clone(),
        k.subset.clone(),
        k.method.clone(),
        k.dimred_label(),
    ]
}

fn result_record(c: &CellResult, hash: &str) -> Vec<String> {
    let mut r: Vec<String> = key_fields(&c.key).into();
    r.push(c.k_effective.map(|k| k.to_string()).unwrap_or_default());
    r.push(size_label(c.key.train_size));
    r.push(c.n_train.to_string());
    r.push(c.n_test.to_string());
    r.push(c.n_features.to_string());
    match &c.confusion {
        Some(cm) => {
            let p = cm.precision();
            let rc = cm.recall();
            r.extend([cm.tp, cm.fp, cm.tn, cm.fn_].map(|v| v.to_string()));
            r.push(f6(p.value));
            r.push(u8::from(p.undefined).to_string());
            r.push(f6(rc.value));
            r.push(u8::from(rc.undefined).to_string());
            r.push(f6(cm.accuracy().value));
        }
        None => r.extend(std::iter::repeat_n(String::new(), 9)),
    }
    match c.at_n {
        Some((p, rc)) => r.extend([f6(p), f6(rc)]),
        None => r.extend([String::new(), String::new()]),
    }
    r.push(hash.to_string());
    r.push(c.note.clone());
    r.push(c.error.clone().unwrap_or_default());
    r
}

pub fn write_results<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for c in &report.cells {
        out.write_record(result_record(c, &report.config_hash)).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timings<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["seed", "title", "representation", "subset", "method", "dimred", "train_size", "training_seconds"])
        .map_err(csv_err)?;
    for c in &report.cells {
        let mut r: Vec<String> = key_fields(&c.key).into();
        r.push(size_label(c.key.train_size));
        r.push(format!("{:.9}", c.training_seconds));
        out.write_record(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a results file back. Titles and seeds come from the rows in first
/// appearance order; timings are zero.
pub fn read_results<R: std::io::Read>(r: R) -> Result<EvalReport> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Format("results header does not match".into()));
    }
    let mut report = EvalReport {
        config_hash: String::new(),
        titles: Vec::new(),
        seeds: Vec::new(),
        cells: Vec::new(),
        skipped: Vec::new(),
        data_notes: Vec::new(),
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
        let get = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize, what: &str| -> Result<u64> { get(j).parse().map_err(|_| bad(what)) };
        let opt_f = |j: usize, what: &str| -> Result<Option<f64>> {
            if get(j).is_empty() {
                Ok(None)
            } else {
                get(j).parse().map(Some).map_err(|_| bad(what))
            }
        };
        let dimred = match get(5) {
            "off" => None,
            s => Some(s.strip_prefix('k').and_then(|k| k.parse().ok()).ok_or_else(|| bad("dimred"))?),
        };
        let key = CellKey {
            seed: num(0, "seed")?,
            title: get(1).to_string(),
            representation: get(2).to_string(),
            subset: get(3).to_string(),
            method: get(4).to_string(),
            dimred,
            train_size: get(7).parse().map_err(|_| bad("train_size"))?,
        };
        let confusion = if get(11).is_empty() {
            None
        } else {
            Some(ConfusionMatrix {
                tp: num(11, "tp")?,
                fp: num(12, "fp")?,
                tn: num(13, "tn")?,
                fn_: num(14, "fn")?,
            })
        };
        let at_n = match (opt_f(20, "precision_at_n")?, opt_f(21, "recall_at_n")?) {
            (Some(p), Some(r)) => Some((p, r)),
            _ => None,
        };
        if !report.titles.contains(&key.title) {
            report.titles.push(key.title.clone());
        }
        if !report.seeds.contains(&key.seed) {
            report.seeds.push(key.seed);
        }
        report.config_hash = get(22).to_string();
        report.cells.push(CellResult {
            key,
            k_effective: if get(6).is_empty() { None } else { Some(num(6, "k_effective")? as usize) },
            n_train: num(8, "n_train")? as usize,
            n_test: num(9, "n_test")? as usize,
            n_features: num(10, "n_features")? as usize,
            confusion,
            at_n,
            training_seconds: 0.0,
            note: get(23).to_string(),
            error: if get(24).is_empty() { None } else { Some(get(24).to_string()) },
        });
    }
    Ok(report)
}

/// Group of cells averaged over titles.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroRow {
    pub seed: u64,
    pub representation: String,
    pub subset: String,
    pub method: String,
    pub dimred: Option<usize>,
    pub train_size: f64,
    /// Titles with a successful cell.
    pub n_titles: usize,
    /// `None` unless every configured title succeeded.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Highest macro precision in its table (ties all marked).
    pub best: bool,
}

impl MacroRow {
    fn table_key(&self) -> (u64, bool, String, Option<usize>, String) {
        let cf = self.representation == CF_REPRESENTATION;
        (self.seed, cf, self.subset.clone(), self.dimred, size_label(self.train_size))
    }
}

/// Macro averages over the report's titles, one row per group in first
/// appearance order, with the best marker set per table.
pub fn macro_rows(report: &EvalReport) -> Vec<MacroRow> {
    let mut order: Vec<MacroRow> = Vec::new();
    let mut values: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for c in &report.cells {
        let k = &c.key;
        let pos = order.iter().position(|m| {
            m.seed == k.seed
                && m.representation == k.representation
                && m.subset == k.subset
                && m.method == k.method
                && m.dimred == k.dimred
                && m.train_size == k.train_size
        });
        let idx = pos.unwrap_or_else(|| {
            order.push(MacroRow {
                seed: k.seed,
                representation: k.representation.clone(),
                subset: k.subset.clone(),
                method: k.method.clone(),
                dimred: k.dimred,
                train_size: k.train_size,
                n_titles: 0,
                precision: None,
                recall: None,
                best: false,
            });
            values.push((Vec::new(), Vec::new()));
            order.len() - 1
        });
        if let (Some(cm), None) = (&c.confusion, &c.error) {
            order[idx].n_titles += 1;
            values[idx].0.push(cm.precision().value);
            values[idx].1.push(cm.recall().value);
        }
    }
    for (row, (p, r)) in order.iter_mut().zip(&values) {
        if row.n_titles == report.titles.len() && row.n_titles > 0 {
            row.precision = macro_average(p).ok();
            row.recall = macro_average(r).ok();
        }
    }
    let mut best: BTreeMap<(u64, bool, String, Option<usize>, String), f64> = BTreeMap::new();
    for row in &order {
        if let Some(p) = row.precision {
            let e = best.entry(row.table_key()).or_insert(f64::NEG_INFINITY);
            *e = e.max(p);
        }
    }
    for row in &mut order {
        row.best = row.precision.is_some_and(|p| best.get(&row.table_key()) == Some(&p));
    }
    order
}

pub fn write_macro_summary<W: Write>(rows: &[MacroRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MACRO_HEADER).map_err(csv_err)?;
    for m in rows {
        out.write_record([
            m.seed.to_string(),
            m.representation.clone(),
            m.subset.clone(),
            m.method.clone(),
            m.dimred.map_or("off".to_string(), |k| format!("k{k}")),
            size_label(m.train_size),
            m.n_titles.to_string(),
            m.precision.map(f6).unwrap_or_default(),
            m.recall.map(f6).unwrap_or_default(),
            if m.best { "*".to_string() } else { String::new() },
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn representation_label(name: &str) -> String {
    name.parse::<Representation>().map(|r| r.label().to_string()).unwrap_or_else(|_| name.to_string())
}

fn method_label(name: &str) -> String {
    if let Ok(a) = name.parse::<Algorithm>() {
        return a.label().to_string();
    }
    name.parse::<CfMode>().map(|m| m.label().to_string()).unwrap_or_else(|_| name.to_string())
}

/// Aligned text grid: first column left-aligned, the rest right-aligned.
fn render_grid(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (j, cell) in r.iter().enumerate() {
            if j == 0 {
                line.push_str(&format!("{cell:<w$}", w = widths[0]));
            } else {
                line.push_str(&format!("  {cell:>w$}", w = widths[j]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn metric_cell(v: Option<f64>, best: bool) -> String {
    match v {
        None => "-".to_string(),
        Some(v) if best => format!("{v:.4}*"),
        Some(v) => format!("{v:.4} "),
    }
}

/// One text table per (seed, subset, dimred, train size): rows are
/// representations, columns methods. Returns (file stem, contents).
pub fn render_tables(report: &EvalReport, rows: &[MacroRow]) -> Vec<(String, String)> {
    let multi_seed = report.seeds.len() > 1;
    let mut tables: Vec<((u64, bool, String, Option<usize>, String), Vec<&MacroRow>)> = Vec::new();
    for m in rows {
        let k = m.table_key();
        match tables.iter_mut().find(|(key, _)| *key == k) {
            Some((_, v)) => v.push(m),
            None => tables.push((k, vec![m])),
        }
    }
    let mut out = Vec::new();
    for ((seed, is_cf, subset, dimred, size), members) in tables {
        let mut stem = if is_cf { "cf".to_string() } else { subset.clone() };
        if let Some(k) = dimred {
            stem.push_str(&format!("_k{k}"));
        }
        if size != "1" {
            stem.push_str(&format!("_size{size}"));
        }
        if multi_seed {
            stem.push_str(&format!("_seed{seed}"));
        }
        let mut reps: Vec<&str> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for m in &members {
            if !reps.contains(&m.representation.as_str()) {
                reps.push(&m.representation);
            }
            if !methods.contains(&m.method.as_str()) {
                methods.push(&m.method);
            }
        }
        let find = |r: &str, me: &str| members.iter().find(|m| m.representation == r && m.method == me);
        let mut text = String::new();
        let subset_text = if is_cf { "collaborative filtering".to_string() } else { format!("field subset {subset}") };
        text.push_str(&format!(
            "Macro metrics, {subset_text}, dimred {}, train size {size}, seed {seed}\n",
            dimred.map_or("off".to_string(), |k| format!("k={k}")),
        ));
        text.push_str(&format!("titles: {}\n", report.titles.join(", ")));
        text.push_str("* marks the highest macro precision in the table\n");
        for (name, pick) in [("Precision", 0), ("Recall", 1)] {
            let mut grid = vec![std::iter::once(name.to_string()).chain(methods.iter().map(|m| method_label(m))).collect()];
            for r in &reps {
                let mut line = vec![representation_label(r)];
                for me in &methods {
                    line.push(match find(r, me) {
                        None => String::new(),
                        Some(m) if pick == 0 => metric_cell(m.precision, m.best),
                        Some(m) => metric_cell(m.recall, false),
                    });
                }
                grid.push(line);
            }
            text.push('\n');
            text.push_str(&render_grid(&grid));
        }
        out.push((stem, text));
    }
    out
}

/// Writes macro_summary.csv and tables/ from the report.
pub fn write_tables(report: &EvalReport, dir: &Path) -> Result<()> {
    let rows = macro_rows(report);
    write_macro_summary(&rows, BufWriter::new(File::create(dir.join("macro_summary.csv"))?))?;
    let tables = dir.join("tables");
    fs::create_dir_all(&tables)?;
    for (stem, text) in render_tables(report, &rows) {
        fs::write(tables.join(format!("{stem}.txt")), text)?;
    }
    Ok(())
}

/// Writes every report file into `dir`. `timestamp` goes only into the
/// manifest; `config_text` is stored as config.cfg when given.
pub fn write_report(report: &EvalReport, dir: &Path, timestamp: u64, config_text: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results(report, BufWriter::new(File::create(dir.join("results.csv"))?))?;
    write_timings(report, BufWriter::new(File::create(dir.join("timings.csv"))?))?;
    write_tables(report, dir)?;
    if let Some(text) = config_text {
        fs::write(dir.join("config.cfg"), text)?;
    }
    let mut m = BufWriter::new(File::create(dir.join("manifest.txt"))?);
    writeln!(m, "config_hash = {}", report.config_hash)?;
    writeln!(m, "seeds = {}", report.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(", "))?;
    writeln!(m, "titles = {}", report.titles.join(", "))?;
    writeln!(m, "cells = {}", report.cells.len())?;
    writeln!(m, "failed_cells = {}", report.failures())?;
    writeln!(m, "timestamp_unix = {timestamp}")?;
    for note in &report.data_notes {
        writeln!(m, "data: {note}")?;
    }
    for s in &report.skipped {
        writeln!(m, "skipped: {s}")?;
    }
    for c in report.cells.iter().filter(|c| c.error.is_some()) {
        let k = &c.key;
        writeln!(
            m,
            "failed: seed {} / {} / {} / {} / {} / {} / size {}: {}",
            k.seed,
            k.title,
            k.representation,
            k.subset,
            k.method,
            k.dimred_label(),
            k.train_size,
            c.error.as_deref().unwrap_or("")
        )?;
    }
    m.flush()?;
    Ok(())
}
