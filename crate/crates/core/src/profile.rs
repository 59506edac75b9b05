//! Structured user profiles: the 67-column CSV schema, duration parsing,
//! labelling by first work-experience title, balanced sampling and the
//! train/test split.
//!
//! A profile always has seven work-experience slots (the current job plus six
//! past jobs) and four education slots. Empty slots are `None`, never dropped,
//! so slot positions stay meaningful for the rating matrix built from them.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const N_PAST_JOBS: usize = 6;
pub const N_OTHER_EDUCATIONS: usize = 3;
pub const N_COLUMNS: usize = 67;

const JOB_FIELDS: [&str; 6] = [
    "title",
    "org_summary",
    "org_detail",
    "duration",
    "location",
    "description",
];
const EDU_FIELDS: [&str; 5] = ["university_name", "degree", "major", "end_date", "detail"];

/// The six titles the experiments target by default.
pub const DEFAULT_TARGET_TITLES: [&str; 6] = [
    "account manager",
    "software engineer",
    "research assistant",
    "project manager",
    "process engineer",
    "consultant",
];

/// Column names of the CSV schema, in order.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = vec!["id".into(), "name".into(), "connections".into()];
    cols.extend(JOB_FIELDS.iter().map(|f| f.to_string()));
    for k in 1..=N_PAST_JOBS {
        cols.extend(JOB_FIELDS.iter().map(|f| format!("past_job_{f}{k}")));
    }
    cols.extend(EDU_FIELDS.iter().map(|f| format!("highest_level_{f}")));
    for k in 1..=N_OTHER_EDUCATIONS {
        cols.extend(EDU_FIELDS.iter().map(|f| format!("other_level_{f}{k}")));
    }
    cols.push("skills".into());
    cols.push("languages".into());
    debug_assert_eq!(cols.len(), N_COLUMNS);
    cols
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkExperience {
    pub job_title: String,
    pub org_summary: String,
    pub org_detail: String,
    pub location: String,
    pub description: String,
    pub duration_months: Option<u32>,
    /// Present iff `duration_months` is, once [`normalize_durations`] ran.
    pub duration_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Education {
    pub university_name: String,
    pub degree: String,
    pub major: String,
    pub detail: String,
    /// Parsed but never used as a feature.
    pub end_date: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Profile {
    pub id: String,
    pub name: String,
    pub connections: Option<u32>,
    pub current_job: Option<WorkExperience>,
    pub past_jobs: [Option<WorkExperience>; N_PAST_JOBS],
    pub highest_education: Option<Education>,
    pub other_educations: [Option<Education>; N_OTHER_EDUCATIONS],
    pub skills: Vec<String>,
    pub languages: Vec<String>,
}

impl Profile {
    /// All seven work-experience slots, current job first.
    pub fn work_slots(&self) -> impl Iterator<Item = Option<&WorkExperience>> {
        std::iter::once(self.current_job.as_ref()).chain(self.past_jobs.iter().map(Option::as_ref))
    }

    /// All four education slots, highest level first.
    pub fn education_slots(&self) -> impl Iterator<Item = Option<&Education>> {
        std::iter::once(self.highest_education.as_ref())
            .chain(self.other_educations.iter().map(Option::as_ref))
    }

    fn work_slots_mut(&mut self) -> impl Iterator<Item = &mut WorkExperience> {
        std::iter::once(&mut self.current_job)
            .chain(self.past_jobs.iter_mut())
            .filter_map(Option::as_mut)
    }
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_title(title: &str) -> String {
    title
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses `"<x> year(s) <y> month(s)"`, `"<x> year(s)"` or `"<y> month(s)"`
/// (case-insensitive) into a month count.
pub fn parse_duration(text: &str) -> Option<u32> {
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    let mut years: Option<u32> = None;
    let mut months: Option<u32> = None;
    let mut i = 0;
    while i < tokens.len() {
        let Ok(value) = tokens[i].parse::<u32>() else {
            i += 1;
            continue;
        };
        let Some(unit) = tokens.get(i + 1) else { break };
        let unit = unit.trim_end_matches(|c: char| !c.is_alphabetic());
        match unit {
            "year" | "years" | "yr" | "yrs" if years.is_none() && months.is_none() => {
                years = Some(value)
            }
            "month" | "months" | "mo" | "mos" if months.is_none() => months = Some(value),
            _ => {}
        }
        i += 2;
    }
    if years.is_none() && months.is_none() {
        return None;
    }
    years
        .unwrap_or(0)
        .checked_mul(12)?
        .checked_add(months.unwrap_or(0))
}

/// Canonical text for a month count; [`parse_duration`] inverts it.
pub fn format_duration(months: u32) -> String {
    let (y, m) = (months / 12, months % 12);
    let plural = |n: u32, unit: &str| {
        if n == 1 {
            format!("{n} {unit}")
        } else {
            format!("{n} {unit}s")
        }
    };
    match (y, m) {
        (0, m) => plural(m, "month"),
        (y, 0) => plural(y, "year"),
        (y, m) => format!("{} {}", plural(y, "year"), plural(m, "month")),
    }
}

fn split_list(cell: &str) -> Vec<String> {
    cell.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_connections(cell: &str) -> Option<u32> {
    let digits: String = cell
        .trim()
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok()
}

fn work_from_cells(cells: &[&str]) -> Option<WorkExperience> {
    if cells.iter().all(|c| c.trim().is_empty()) {
        return None;
    }
    Some(WorkExperience {
        job_title: normalize_title(cells[0]),
        org_summary: cells[1].to_string(),
        org_detail: cells[2].to_string(),
        duration_months: parse_duration(cells[3]),
        location: cells[4].to_string(),
        description: cells[5].to_string(),
        duration_norm: None,
    })
}

fn education_from_cells(cells: &[&str]) -> Option<Education> {
    if cells.iter().all(|c| c.trim().is_empty()) {
        return None;
    }
    Some(Education {
        university_name: cells[0].to_string(),
        degree: cells[1].to_string(),
        major: cells[2].to_string(),
        end_date: cells[3].to_string(),
        detail: cells[4].to_string(),
    })
}

fn profile_from_cells(cells: &[&str]) -> Profile {
    debug_assert_eq!(cells.len(), N_COLUMNS);
    let job = |slot: usize| {
        let start = 3 + slot * JOB_FIELDS.len();
        work_from_cells(&cells[start..start + JOB_FIELDS.len()])
    };
    let edu_base = 3 + (1 + N_PAST_JOBS) * JOB_FIELDS.len();
    let edu = |slot: usize| {
        let start = edu_base + slot * EDU_FIELDS.len();
        education_from_cells(&cells[start..start + EDU_FIELDS.len()])
    };
    Profile {
        id: cells[0].to_string(),
        name: cells[1].to_string(),
        connections: parse_connections(cells[2]),
        current_job: job(0),
        past_jobs: std::array::from_fn(|k| job(k + 1)),
        highest_education: edu(0),
        other_educations: std::array::from_fn(|k| edu(k + 1)),
        skills: split_list(cells[N_COLUMNS - 2]),
        languages: split_list(cells[N_COLUMNS - 1]),
    }
}

/// A data row that could not be turned into a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub profiles: Vec<Profile>,
    pub row_errors: Vec<RowError>,
    pub rows_read: usize,
}

/// Parses the 67-column profile CSV.
///
/// Rows with the wrong number of columns are skipped and reported in
/// [`ParseOutcome::row_errors`]. Cells that fail to parse (a duration such as
/// `"intern"`, a non-numeric connection count) are treated as empty and the
/// row is kept. Invalid UTF-8 anywhere is fatal.
pub fn parse_profiles<R: Read>(source: R) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let header = reader.byte_headers().map_err(csv_error)?.clone();
    if header.len() != N_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!("header has {} columns, expected {N_COLUMNS}", header.len()),
        });
    }
    if std::str::from_utf8(header.as_slice()).is_err() {
        return Err(Error::NonUtf8 { byte_offset: 0 });
    }

    let mut outcome = ParseOutcome::default();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e)),
        }
        outcome.rows_read += 1;
        let (line, byte) = record
            .position()
            .map_or((0, 0), |p| (p.line() as usize, p.byte()));
        let mut cells = Vec::with_capacity(record.len());
        for field in record.iter() {
            match std::str::from_utf8(field) {
                Ok(s) => cells.push(s),
                Err(_) => {
                    return Err(Error::NonUtf8 { byte_offset: byte })
                }
            }
        }
        if cells.len() != N_COLUMNS {
            outcome.row_errors.push(RowError {
                line,
                message: format!("expected {N_COLUMNS} columns, found {}", cells.len()),
            });
            continue;
        }
        outcome.profiles.push(profile_from_cells(&cells));
    }
    if !outcome.row_errors.is_empty() {
        log::warn!(
            "skipped {} malformed row(s) out of {}",
            outcome.row_errors.len(),
            outcome.rows_read
        );
    }
    Ok(outcome)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Utf8 { pos, .. } => Error::NonUtf8 {
            byte_offset: pos.map(|p| p.byte()).unwrap_or(0),
        },
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn profile_cells(p: &Profile) -> Vec<String> {
    let mut cells = Vec::with_capacity(N_COLUMNS);
    cells.push(p.id.clone());
    cells.push(p.name.clone());
    cells.push(p.connections.map(|c| c.to_string()).unwrap_or_default());
    for slot in p.work_slots() {
        match slot {
            Some(w) => {
                cells.push(w.job_title.clone());
                cells.push(w.org_summary.clone());
                cells.push(w.org_detail.clone());
                cells.push(w.duration_months.map(format_duration).unwrap_or_default());
                cells.push(w.location.clone());
                cells.push(w.description.clone());
            }
            None => cells.extend(std::iter::repeat_n(String::new(), JOB_FIELDS.len())),
        }
    }
    for slot in p.education_slots() {
        match slot {
            Some(e) => {
                cells.push(e.university_name.clone());
                cells.push(e.degree.clone());
                cells.push(e.major.clone());
                cells.push(e.end_date.clone());
                cells.push(e.detail.clone());
            }
            None => cells.extend(std::iter::repeat_n(String::new(), EDU_FIELDS.len())),
        }
    }
    cells.push(p.skills.join(", "));
    cells.push(p.languages.join(", "));
    cells
}

/// Writes profiles in the same schema [`parse_profiles`] reads.
///
/// A present slot whose cells would all be empty cannot be told apart from an
/// absent slot once written; such slots do not occur in parsed input.
pub fn write_profiles<W: Write>(profiles: &[Profile], sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(sink);
    writer.write_record(csv_header()).map_err(csv_error)?;
    for p in profiles {
        writer.write_record(profile_cells(p)).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Fills `duration_norm` as months divided by the corpus maximum.
pub fn normalize_durations(profiles: &mut [Profile]) {
    let max = profiles
        .iter()
        .flat_map(|p| p.work_slots().flatten().filter_map(|w| w.duration_months))
        .max()
        .unwrap_or(0);
    for p in profiles.iter_mut() {
        for w in p.work_slots_mut() {
            w.duration_norm = match (w.duration_months, max) {
                (Some(m), max) if max > 0 => Some(f64::from(m) / f64::from(max)),
                _ => None,
            };
        }
    }
}

/// 1 iff the current job's title matches `target_title` after normalization.
pub fn label_for_title(profile: &Profile, target_title: &str) -> u8 {
    let target = normalize_title(target_title);
    match &profile.current_job {
        Some(job) if !target.is_empty() && normalize_title(&job.job_title) == target => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub profile_index: usize,
    pub label: u8,
}

/// Positions into [`LabeledDataset::examples`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub target_title: String,
    pub examples: Vec<Example>,
    pub split: Option<Split>,
}

impl LabeledDataset {
    pub fn count_label(&self, label: u8) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    pub fn train_examples(&self) -> Vec<Example> {
        self.split
            .as_ref()
            .map(|s| s.train.iter().map(|&i| self.examples[i]).collect())
            .unwrap_or_default()
    }

    pub fn test_examples(&self) -> Vec<Example> {
        self.split
            .as_ref()
            .map(|s| s.test.iter().map(|&i| self.examples[i]).collect())
            .unwrap_or_default()
    }
}

/// Draws exactly `n_pos` positive and `n_neg` negative profiles for a title,
/// uniformly without replacement. Examples come back ordered by profile index.
pub fn balanced_sample(
    profiles: &[Profile],
    target_title: &str,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let target = normalize_title(target_title);
    if target.is_empty() {
        return Err(Error::invalid("target title is empty"));
    }
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..profiles.len()).partition(|&i| label_for_title(&profiles[i], &target) == 1);
    if pos.len() < n_pos || neg.len() < n_neg {
        return Err(Error::InsufficientSamples {
            title: target,
            requested_pos: n_pos,
            requested_neg: n_neg,
            available_pos: pos.len(),
            available_neg: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen_pos, _) = pos.partial_shuffle(&mut rng, n_pos);
    let (chosen_neg, _) = neg.partial_shuffle(&mut rng, n_neg);
    let mut examples: Vec<Example> = chosen_pos
        .iter()
        .map(|&i| Example { profile_index: i, label: 1 })
        .chain(chosen_neg.iter().map(|&i| Example { profile_index: i, label: 0 }))
        .collect();
    examples.sort_by_key(|e| e.profile_index);
    Ok(LabeledDataset {
        target_title: target,
        examples,
        split: None,
    })
}

/// Stratified split: each label's examples go to train in proportion
/// `train_fraction` (rounded, with at least one example left on each side).
pub fn train_test_split(
    mut dataset: LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    for label in [0u8, 1] {
        let mut positions: Vec<usize> = dataset
            .examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect();
        if positions.len() < 2 {
            return Err(Error::invalid(format!(
                "label {label} has {} example(s); at least 2 are needed to split",
                positions.len()
            )));
        }
        positions.shuffle(&mut rng);
        let n = positions.len();
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        split.train.extend_from_slice(&positions[..n_train]);
        split.test.extend_from_slice(&positions[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    dataset.split = Some(split);
    Ok(dataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldSubset {
    All,
    WorkExperience,
    Education,
    Skills,
}

impl FieldSubset {
    pub const ALL: [FieldSubset; 4] = [
        FieldSubset::All,
        FieldSubset::WorkExperience,
        FieldSubset::Education,
        FieldSubset::Skills,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldSubset::All => "all",
            FieldSubset::WorkExperience => "work_experience",
            FieldSubset::Education => "education",
            FieldSubset::Skills => "skills",
        }
    }
}

impl fmt::Display for FieldSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "all" => Ok(FieldSubset::All),
            "work_experience" | "work" => Ok(FieldSubset::WorkExperience),
            "education" => Ok(FieldSubset::Education),
            "skills" => Ok(FieldSubset::Skills),
            other => Err(Error::invalid(format!(
                "unknown field subset {other:?} (expected all, work_experience, education, skills)"
            ))),
        }
    }
}

fn push_nonempty<'a>(parts: &mut Vec<&'a str>, s: &'a str) {
    let s = s.trim();
    if !s.is_empty() {
        parts.push(s);
    }
}

fn work_parts<'a>(profile: &'a Profile, parts: &mut Vec<&'a str>) {
    for (slot, w) in profile.work_slots().enumerate() {
        let Some(w) = w else { continue };
        // The current job's title is the label; it never becomes a feature.
        if slot > 0 {
            push_nonempty(parts, &w.job_title);
        }
        push_nonempty(parts, &w.org_summary);
        push_nonempty(parts, &w.org_detail);
        push_nonempty(parts, &w.location);
        push_nonempty(parts, &w.description);
    }
}

fn education_parts<'a>(profile: &'a Profile, parts: &mut Vec<&'a str>) {
    for e in profile.education_slots().flatten() {
        push_nonempty(parts, &e.university_name);
        push_nonempty(parts, &e.degree);
        push_nonempty(parts, &e.major);
        push_nonempty(parts, &e.detail);
    }
}

/// The text a field subset contributes to featurization, single-space joined.
///
/// Identity, name, connections, durations and education end dates never
/// appear. Languages only appear under [`FieldSubset::All`].
pub fn assemble_field_text(profile: &Profile, subset: FieldSubset) -> String {
    let mut parts: Vec<&str> = Vec::new();
    match subset {
        FieldSubset::WorkExperience => work_parts(profile, &mut parts),
        FieldSubset::Education => education_parts(profile, &mut parts),
        FieldSubset::Skills => profile.skills.iter().for_each(|s| push_nonempty(&mut parts, s)),
        FieldSubset::All => {
            work_parts(profile, &mut parts);
            education_parts(profile, &mut parts);
            profile.skills.iter().for_each(|s| push_nonempty(&mut parts, s));
            profile.languages.iter().for_each(|s| push_nonempty(&mut parts, s));
        }
    }
    parts.join(" ")
}

/// Distinct normalized titles of the current jobs, for corpus statistics.
pub fn distinct_first_titles(profiles: &[Profile]) -> HashSet<String> {
    profiles
        .iter()
        .filter_map(|p| p.current_job.as_ref().map(|j| j.job_title.clone()))
        .filter(|t| !t.is_empty())
        .collect()
}
