//! Synthetic profile corpora.
//!
//! Each user gets a first-job title drawn by weight. With probability
//! `signal_strength` the rest of the profile is drawn from that title's
//! pools (skill phrases, description keywords, majors, related past
//! titles); otherwise everything comes from title-independent background
//! pools.
//!
//! Skill phrases are three words `A_i B_j C_k`. With the built-in 20
//! titles, phrase `(i, j, k)` belongs to title `s + 10 p` where
//! `s = (i + j + k) mod 10` and `p = (i + k) mod 2`: every title owns 50
//! phrases, and every word and every adjacent word pair occurs under at
//! least 10 titles. Only the full phrase pins down the title.

use std::collections::BTreeSet;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};

use crate::error::{Error, Result};
use crate::kv::{fmt_f64, KvFile};
use crate::profile::{
    normalize_title, Education, Profile, WorkExperience, DEFAULT_TARGET_TITLES,
    N_OTHER_EDUCATIONS, N_PAST_JOBS,
};
use crate::text::tokenize;

const SKILL_A: [&str; 10] = [
    "advanced", "applied", "strategic", "technical", "digital", "global", "quantitative",
    "operational", "clinical", "industrial",
];
const SKILL_B: [&str; 10] = [
    "data", "process", "client", "software", "project", "research", "account", "quality", "system",
    "market",
];
const SKILL_C: [&str; 10] = [
    "analysis", "management", "design", "development", "planning", "testing", "modeling",
    "reporting", "optimization", "engineering",
];

const GENERIC_WORDS: [&str; 16] = [
    "team", "worked", "responsible", "daily", "projects", "support", "various", "helped", "managed",
    "improved", "company", "role", "tasks", "coordinated", "delivered", "across",
];

const COMPANIES: [&str; 12] = [
    "acme corp", "globex", "initech", "umbrella group", "stark industries", "wayne enterprises",
    "hooli", "vandelay industries", "soylent", "tyrell systems", "cyberdyne", "wonka foods",
];
const INDUSTRIES: [&str; 8] = [
    "information technology", "manufacturing", "financial services", "healthcare", "retail",
    "higher education", "energy", "professional services",
];
const CITIES: [&str; 10] = [
    "london", "berlin", "new york", "toronto", "sydney", "singapore", "dublin", "amsterdam",
    "chicago", "melbourne",
];
const UNIVERSITIES: [&str; 10] = [
    "northfield university", "east coast institute of technology", "riverside college",
    "university of westland", "central state university", "lakeside polytechnic",
    "royal academy of sciences", "southern metropolitan university", "hillcrest university",
    "pacific institute",
];
const DEGREES: [&str; 4] = ["bachelor", "master", "phd", "diploma"];
const EDU_DETAIL: [&str; 8] = [
    "honours", "exchange semester", "student society", "dean list", "thesis", "scholarship",
    "sports club", "volunteer tutor",
];
const LANGUAGES: [&str; 8] = [
    "english", "german", "french", "spanish", "mandarin", "hindi", "arabic", "portuguese",
];
const FIRST_NAMES: [&str; 10] = [
    "alex", "sam", "jordan", "taylor", "morgan", "casey", "riley", "jamie", "robin", "avery",
];
const LAST_NAMES: [&str; 10] = [
    "smith", "chen", "garcia", "khan", "mueller", "rossi", "silva", "kim", "novak", "brown",
];

/// Built-in titles: (title, description keywords, typical major).
const TITLE_TABLE: [(&str, [&str; 4], &str); 20] = [
    ("account manager", ["renewal", "upsell", "portfolio", "accounts"], "business administration"),
    ("software engineer", ["backend", "api", "deploy", "codebase"], "computer science"),
    ("research assistant", ["lab", "experiment", "literature", "samples"], "biology"),
    ("project manager", ["stakeholder", "milestone", "roadmap", "scope"], "management"),
    ("process engineer", ["yield", "plant", "throughput", "reactor"], "chemical engineering"),
    ("consultant", ["advisory", "engagement", "workshop", "recommendations"], "economics"),
    ("data analyst", ["dashboard", "sql", "metrics", "spreadsheets"], "statistics"),
    ("sales representative", ["leads", "territory", "prospects", "quota"], "marketing"),
    ("teacher", ["classroom", "curriculum", "pupils", "lessons"], "education"),
    ("nurse", ["patients", "ward", "medication", "triage"], "nursing"),
    ("accountant", ["ledger", "audit", "tax", "reconciliation"], "accounting"),
    ("graphic designer", ["branding", "layout", "illustration", "typography"], "fine arts"),
    ("mechanical engineer", ["cad", "prototype", "tolerances", "assembly"], "mechanical engineering"),
    ("marketing manager", ["campaign", "brand", "seo", "content"], "marketing"),
    ("hr specialist", ["recruiting", "onboarding", "payroll", "benefits"], "human resources"),
    ("product manager", ["feature", "backlog", "launch", "personas"], "business"),
    ("financial analyst", ["forecast", "valuation", "budget", "variance"], "finance"),
    ("customer service representative", ["tickets", "helpdesk", "calls", "escalations"], "communications"),
    ("operations manager", ["logistics", "inventory", "staffing", "vendors"], "operations management"),
    ("intern", ["assisted", "shadowed", "learning", "errands"], "general studies"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct TitleWeight {
    pub title: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n_users: usize,
    pub titles: Vec<TitleWeight>,
    /// Titles that must reach `required_positives` first-job holders.
    pub target_titles: Vec<String>,
    pub required_positives: usize,
    pub signal_strength: f64,
    pub mean_work_experiences: f64,
    pub mean_educations: f64,
    pub mean_skills: f64,
    /// Signal users: chance that a past job repeats the first-job title.
    pub past_title_affinity: f64,
    /// Signal users: chance that a description word is a title keyword.
    pub keyword_rate: f64,
    /// Signal users: chance that a degree's major is the title's major.
    pub major_affinity: f64,
    /// Signal users: chance that a skill comes from the first-job title's
    /// pool rather than from the pool of one of their other past titles.
    pub skill_purity: f64,
    /// Chance that a user lists no skills at all; the others' count is
    /// scaled so the overall mean stays `mean_skills`.
    pub no_skills_rate: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        let background = (1.0 - 0.07 * 6.0) / 14.0;
        let titles = TITLE_TABLE
            .iter()
            .map(|(t, _, _)| TitleWeight {
                title: t.to_string(),
                weight: if DEFAULT_TARGET_TITLES.contains(t) { 0.07 } else { background },
            })
            .collect();
        GenSpec {
            n_users: 12_000,
            titles,
            target_titles: DEFAULT_TARGET_TITLES.iter().map(|s| s.to_string()).collect(),
            required_positives: 500,
            signal_strength: 0.9,
            mean_work_experiences: 2.19,
            mean_educations: 1.76,
            mean_skills: 19.72,
            past_title_affinity: 0.3,
            keyword_rate: 0.15,
            major_affinity: 0.5,
            skill_purity: 1.0,
            no_skills_rate: 0.0,
            seed: 42,
        }
    }
}

/// Keys accepted by [`GenSpec::from_kv`], all under `datagen.`.
pub const SPEC_KEYS: [&str; 15] = [
    "n_users",
    "titles",
    "weights",
    "target_titles",
    "required_positives",
    "signal_strength",
    "mean_work_experiences",
    "mean_educations",
    "mean_skills",
    "past_title_affinity",
    "keyword_rate",
    "major_affinity",
    "skill_purity",
    "no_skills_rate",
    "seed",
];

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::config("datagen.n_users", "must be at least 1"));
        }
        if self.titles.is_empty() {
            return Err(Error::config("datagen.titles", "title pool is empty"));
        }
        if self.titles.iter().any(|t| !(t.weight >= 0.0) || !t.weight.is_finite())
            || self.titles.iter().all(|t| t.weight == 0.0)
        {
            return Err(Error::config("datagen.weights", "weights must be non-negative with a positive sum"));
        }
        for (key, v) in [
            ("datagen.signal_strength", self.signal_strength),
            ("datagen.past_title_affinity", self.past_title_affinity),
            ("datagen.keyword_rate", self.keyword_rate),
            ("datagen.major_affinity", self.major_affinity),
            ("datagen.skill_purity", self.skill_purity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.mean_work_experiences >= 1.0 && self.mean_work_experiences < 7.0) {
            return Err(Error::config("datagen.mean_work_experiences", "must lie in [1, 7)"));
        }
        if !(self.mean_educations > 0.0 && self.mean_educations < 4.0) {
            return Err(Error::config("datagen.mean_educations", "must lie in (0, 4)"));
        }
        if !(0.0..1.0).contains(&self.no_skills_rate) {
            return Err(Error::config("datagen.no_skills_rate", format!("must lie in [0, 1), got {}", self.no_skills_rate)));
        }
        if !(self.mean_skills > 0.0) {
            return Err(Error::config("datagen.mean_skills", "must be positive"));
        }
        let pool: BTreeSet<String> = self.titles.iter().map(|t| normalize_title(&t.title)).collect();
        if pool.len() != self.titles.len() {
            return Err(Error::config("datagen.titles", "titles must be distinct"));
        }
        for t in &self.target_titles {
            if !pool.contains(&normalize_title(t)) {
                return Err(Error::config("datagen.target_titles", format!("{t:?} is not in the title pool")));
            }
        }
        Ok(())
    }

    /// Reads `datagen.*` keys over the defaults. `titles` and `weights` are
    /// parallel lists; giving titles without weights weighs them equally.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut s = GenSpec::default();
        let key = |k: &str| format!("datagen.{k}");
        if let Some(v) = kv.parse_value(&key("n_users"))? {
            s.n_users = v;
        }
        let titles: Option<Vec<String>> = kv.parse_list(&key("titles"))?;
        let weights: Option<Vec<f64>> = kv.parse_list(&key("weights"))?;
        match (titles, weights) {
            (Some(t), w) => {
                let w = w.unwrap_or_else(|| vec![1.0; t.len()]);
                if w.len() != t.len() {
                    return Err(Error::config(key("weights"), "needs one weight per title"));
                }
                s.titles = t
                    .into_iter()
                    .zip(w)
                    .map(|(title, weight)| TitleWeight { title: normalize_title(&title), weight })
                    .collect();
            }
            (None, Some(w)) => {
                if w.len() != s.titles.len() {
                    return Err(Error::config(key("weights"), "needs one weight per title"));
                }
                s.titles.iter_mut().zip(w).for_each(|(t, w)| t.weight = w);
            }
            (None, None) => {}
        }
        if let Some(v) = kv.parse_list(&key("target_titles"))? {
            s.target_titles = v;
        }
        macro_rules! field {
            ($($name:ident),*) => {$(
                if let Some(v) = kv.parse_value(&key(stringify!($name)))? {
                    s.$name = v;
                }
            )*};
        }
        field!(
            required_positives,
            signal_strength,
            mean_work_experiences,
            mean_educations,
            mean_skills,
            past_title_affinity,
            keyword_rate,
            major_affinity,
            skill_purity,
            no_skills_rate,
            seed
        );
        s.validate()?;
        Ok(s)
    }

    /// The spec as `datagen.*` lines that [`GenSpec::from_kv`] reads back.
    pub fn to_kv_lines(&self) -> Vec<String> {
        let titles: Vec<&str> = self.titles.iter().map(|t| t.title.as_str()).collect();
        let weights: Vec<String> = self.titles.iter().map(|t| fmt_f64(t.weight)).collect();
        vec![
            format!("datagen.n_users = {}", self.n_users),
            format!("datagen.titles = {}", titles.join(", ")),
            format!("datagen.weights = {}", weights.join(", ")),
            format!("datagen.target_titles = {}", self.target_titles.join(", ")),
            format!("datagen.required_positives = {}", self.required_positives),
            format!("datagen.signal_strength = {}", fmt_f64(self.signal_strength)),
            format!("datagen.mean_work_experiences = {}", fmt_f64(self.mean_work_experiences)),
            format!("datagen.mean_educations = {}", fmt_f64(self.mean_educations)),
            format!("datagen.mean_skills = {}", fmt_f64(self.mean_skills)),
            format!("datagen.past_title_affinity = {}", fmt_f64(self.past_title_affinity)),
            format!("datagen.keyword_rate = {}", fmt_f64(self.keyword_rate)),
            format!("datagen.major_affinity = {}", fmt_f64(self.major_affinity)),
            format!("datagen.skill_purity = {}", fmt_f64(self.skill_purity)),
            format!("datagen.no_skills_rate = {}", fmt_f64(self.no_skills_rate)),
            format!("datagen.seed = {}", self.seed),
        ]
    }
}

/// `E[min(offset + Poisson(λ), cap)]`.
fn capped_poisson_mean(lambda: f64, offset: u32, cap: u32) -> f64 {
    let mut pmf = (-lambda).exp();
    let mut mean = 0.0;
    let mut mass = 0.0;
    for k in 0..(cap - offset) {
        mean += pmf * f64::from(offset + k);
        mass += pmf;
        pmf *= lambda / f64::from(k + 1);
    }
    mean + (1.0 - mass) * f64::from(cap)
}

/// λ with `E[min(offset + Poisson(λ), cap)] = target`, by bisection.
pub fn solve_capped_poisson(target: f64, offset: u32, cap: u32) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 64.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if capped_poisson_mean(mid, offset, cap) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct TitleInfo {
    title: String,
    keywords: Vec<String>,
    major: String,
}

fn title_info(title: &str) -> TitleInfo {
    let norm = normalize_title(title);
    match TITLE_TABLE.iter().find(|(t, _, _)| *t == norm) {
        Some((t, kw, major)) => TitleInfo {
            title: t.to_string(),
            keywords: kw.iter().map(|s| s.to_string()).collect(),
            major: major.to_string(),
        },
        None => TitleInfo {
            keywords: tokenize(&norm),
            major: format!("{norm} studies"),
            title: norm,
        },
    }
}

/// Every skill phrase with the index of the title that owns it.
fn skill_phrases(n_titles: usize) -> Vec<(String, usize)> {
    let mut out = Vec::with_capacity(1000);
    for (i, a) in SKILL_A.iter().enumerate() {
        for (j, b) in SKILL_B.iter().enumerate() {
            for (k, c) in SKILL_C.iter().enumerate() {
                let owner = (i + j + k) % 10 + 10 * ((i + k) % 2);
                out.push((format!("{a} {b} {c}"), owner % n_titles));
            }
        }
    }
    out
}

/// A generated corpus and each user's true first-job title.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub profiles: Vec<Profile>,
    pub truth: Vec<(String, String)>,
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    spec: &'a GenSpec,
    info: Vec<TitleInfo>,
    by_weight: WeightedIndex<f64>,
    phrases_by_title: Vec<Vec<String>>,
    all_phrases: Vec<String>,
    work_count: Poisson<f64>,
    edu_count: Poisson<f64>,
    skill_count: Poisson<f64>,
}

fn pick<'b, T>(rng: &mut ChaCha8Rng, xs: &'b [T]) -> &'b T {
    xs.choose(rng).expect("nonempty pool")
}

impl Sampler<'_> {
    fn description(&mut self, title: usize, signal: bool) -> String {
        let n = self.rng.random_range(4..=8);
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            let kw = &self.info[title].keywords;
            if signal && !kw.is_empty() && self.rng.random_bool(self.spec.keyword_rate) {
                words.push(pick(&mut self.rng, kw).clone());
            } else {
                words.push(pick(&mut self.rng, &GENERIC_WORDS).to_string());
            }
        }
        words.join(" ")
    }

    fn job(&mut self, title: usize, signal: bool) -> WorkExperience {
        let months = self.rng.random_range(2..=120u32);
        let duration = (!self.rng.random_bool(0.05)).then_some(months);
        WorkExperience {
            job_title: self.info[title].title.clone(),
            org_summary: pick(&mut self.rng, &COMPANIES).to_string(),
            org_detail: pick(&mut self.rng, &INDUSTRIES).to_string(),
            location: pick(&mut self.rng, &CITIES).to_string(),
            description: self.description(title, signal),
            duration_months: duration,
            duration_norm: None,
        }
    }

    fn education(&mut self, title: usize, signal: bool) -> Education {
        let major = if signal && self.rng.random_bool(self.spec.major_affinity) {
            self.info[title].major.clone()
        } else {
            let t = self.rng.random_range(0..self.info.len());
            self.info[t].major.clone()
        };
        Education {
            university_name: pick(&mut self.rng, &UNIVERSITIES).to_string(),
            degree: pick(&mut self.rng, &DEGREES).to_string(),
            major,
            detail: pick(&mut self.rng, &EDU_DETAIL).to_string(),
            end_date: self.rng.random_range(1985..=2017u32).to_string(),
        }
    }

    /// Own-pool phrases at rate `skill_purity`; the rest come from the
    /// pools of the user's other past titles, if any. No phrase repeats.
    fn signal_skills(&mut self, title: usize, past_titles: &[usize], n: usize) -> Vec<String> {
        let others: Vec<usize> = past_titles.iter().copied().filter(|&t| t != title).collect();
        let own = &self.phrases_by_title[title];
        let n_own = if self.spec.skill_purity >= 1.0 || others.is_empty() {
            n
        } else {
            (0..n).filter(|_| self.rng.random_bool(self.spec.skill_purity)).count()
        };
        let mut out: Vec<String> = own.choose_multiple(&mut self.rng, n_own.min(own.len())).cloned().collect();
        if n_own >= n {
            return out;
        }
        let available: usize = {
            let mut distinct = others.clone();
            distinct.sort_unstable();
            distinct.dedup();
            distinct.iter().map(|&t| self.phrases_by_title[t].len()).sum()
        };
        let target = n.min(out.len() + available);
        while out.len() < target {
            let t = *pick(&mut self.rng, &others);
            let p = pick(&mut self.rng, &self.phrases_by_title[t]);
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }

    fn user(&mut self, idx: usize) -> (Profile, String) {
        let title = self.by_weight.sample(&mut self.rng);
        let signal = self.rng.random_bool(self.spec.signal_strength);
        let n_work = (1 + self.work_count.sample(&mut self.rng) as usize).min(1 + N_PAST_JOBS);
        let n_edu = (self.edu_count.sample(&mut self.rng) as usize).min(1 + N_OTHER_EDUCATIONS);
        let n_skills = if self.spec.no_skills_rate > 0.0 && self.rng.random_bool(self.spec.no_skills_rate) {
            0
        } else {
            self.skill_count.sample(&mut self.rng) as usize
        };

        let current = self.job(title, signal);
        let mut past: [Option<WorkExperience>; N_PAST_JOBS] = Default::default();
        let mut past_titles = Vec::with_capacity(n_work - 1);
        for slot in past.iter_mut().take(n_work - 1) {
            let t = if signal && self.rng.random_bool(self.spec.past_title_affinity) {
                title
            } else {
                self.by_weight.sample(&mut self.rng)
            };
            past_titles.push(t);
            *slot = Some(self.job(t, signal));
        }
        let mut edus: Vec<Education> = (0..n_edu).map(|_| self.education(title, signal)).collect();
        let highest = (!edus.is_empty()).then(|| edus.remove(0));
        let mut others: [Option<Education>; N_OTHER_EDUCATIONS] = Default::default();
        for (slot, e) in others.iter_mut().zip(edus) {
            *slot = Some(e);
        }
        let skills = if signal {
            self.signal_skills(title, &past_titles, n_skills)
        } else {
            let n = n_skills.min(self.all_phrases.len());
            self.all_phrases.choose_multiple(&mut self.rng, n).cloned().collect()
        };
        let n_lang = self.rng.random_range(1..=3);
        let languages: Vec<String> = LANGUAGES
            .choose_multiple(&mut self.rng, n_lang)
            .map(|s| s.to_string())
            .collect();
        let name = format!(
            "{} {}",
            pick(&mut self.rng, &FIRST_NAMES),
            pick(&mut self.rng, &LAST_NAMES)
        );
        let profile = Profile {
            id: format!("u{:06}", idx + 1),
            name,
            connections: Some(self.rng.random_range(0..=500)),
            current_job: Some(current),
            past_jobs: past,
            highest_education: highest,
            other_educations: others,
            skills,
            languages,
        };
        (profile, self.info[title].title.clone())
    }
}

pub fn generate_corpus(spec: &GenSpec) -> Result<Corpus> {
    spec.validate()?;
    let info: Vec<TitleInfo> = spec.titles.iter().map(|t| title_info(&t.title)).collect();
    let by_weight = WeightedIndex::new(spec.titles.iter().map(|t| t.weight))
        .map_err(|e| Error::config("datagen.weights", e.to_string()))?;
    let phrases = skill_phrases(info.len());
    let mut phrases_by_title = vec![Vec::new(); info.len()];
    for (p, t) in &phrases {
        phrases_by_title[*t].push(p.clone());
    }
    let poisson = |lambda: f64, key: &str| {
        Poisson::new(lambda.max(1e-9)).map_err(|e| Error::config(key, e.to_string()))
    };
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec,
        by_weight,
        phrases_by_title,
        all_phrases: phrases.into_iter().map(|(p, _)| p).collect(),
        work_count: poisson(
            solve_capped_poisson(spec.mean_work_experiences, 1, 1 + N_PAST_JOBS as u32),
            "datagen.mean_work_experiences",
        )?,
        edu_count: poisson(
            solve_capped_poisson(spec.mean_educations, 0, 1 + N_OTHER_EDUCATIONS as u32),
            "datagen.mean_educations",
        )?,
        skill_count: poisson(spec.mean_skills / (1.0 - spec.no_skills_rate), "datagen.mean_skills")?,
        info,
    };
    let mut corpus = Corpus { profiles: Vec::with_capacity(spec.n_users), truth: Vec::with_capacity(spec.n_users) };
    for i in 0..spec.n_users {
        let (p, t) = s.user(i);
        corpus.truth.push((p.id.clone(), t));
        corpus.profiles.push(p);
    }
    for target in &spec.target_titles {
        let norm = normalize_title(target);
        let n = corpus.truth.iter().filter(|(_, t)| *t == norm).count();
        if n < spec.required_positives {
            return Err(Error::InsufficientSamples {
                title: norm,
                requested_pos: spec.required_positives,
                requested_neg: 0,
                available_pos: n,
                available_neg: spec.n_users - n,
            });
        }
    }
    Ok(corpus)
}

/// `id,first_title` rows under a header.
pub fn write_truth<W: Write>(truth: &[(String, String)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Format(e.to_string());
    out.write_record(["id", "first_title"]).map_err(err)?;
    for (id, t) in truth {
        out.write_record([id, t]).map_err(err)?;
    }
    out.flush()?;
    Ok(())
}

/// A word-vector table over the generator's vocabulary in the text format
/// `load_embeddings` reads. Words tied to one title share a direction.
/// Seeded and deterministic; written with fixed precision.
pub fn write_synthetic_embeddings<W: Write>(spec: &GenSpec, dim: usize, mut w: W) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_e4be);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let info: Vec<TitleInfo> = spec.titles.iter().map(|t| title_info(&t.title)).collect();
    let centroids: Vec<Vec<f64>> = info
        .iter()
        .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let mut owner: std::collections::BTreeMap<String, Option<usize>> = Default::default();
    let mut claim = |word: String, t: Option<usize>| {
        owner.entry(word).and_modify(|o| if *o != t { *o = None }).or_insert(t);
    };
    for (t, i) in info.iter().enumerate() {
        for word in i.keywords.iter().chain(&tokenize(&i.title)).chain(&tokenize(&i.major)) {
            claim(word.clone(), Some(t));
        }
    }
    let shared = SKILL_A.iter().chain(&SKILL_B).chain(&SKILL_C).chain(&GENERIC_WORDS);
    let places = COMPANIES.iter().chain(&INDUSTRIES).chain(&CITIES).chain(&UNIVERSITIES);
    let misc = DEGREES.iter().chain(&EDU_DETAIL).chain(&LANGUAGES);
    for s in shared.chain(places).chain(misc) {
        for word in tokenize(s) {
            claim(word, None);
        }
    }
    for (word, t) in owner {
        let mut v: Vec<f64> = (0..dim).map(|_| 0.5 * normal.sample(&mut rng)).collect();
        if let Some(t) = t {
            v.iter_mut().zip(&centroids[t]).for_each(|(a, c)| *a += c);
        }
        let cells: Vec<String> = v.iter().map(|x| format!("{x:.5}")).collect();
        writeln!(w, "{word} {}", cells.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{parse_profiles, write_profiles};
    use std::collections::HashMap;

    fn small(n: usize) -> GenSpec {
        GenSpec { n_users: n, required_positives: 0, ..Default::default() }
    }

    #[test]
    fn capped_poisson_solver() {
        let lam = solve_capped_poisson(2.19, 1, 7);
        assert!((capped_poisson_mean(lam, 1, 7) - 2.19).abs() < 1e-9);
        let lam = solve_capped_poisson(1.76, 0, 4);
        assert!((capped_poisson_mean(lam, 0, 4) - 1.76).abs() < 1e-9);
    }

    #[test]
    fn phrases_partition_evenly() {
        let p = skill_phrases(20);
        assert_eq!(p.len(), 1000);
        for t in 0..20 {
            assert_eq!(p.iter().filter(|(_, o)| *o == t).count(), 50);
        }
        let owners = |pred: &dyn Fn(&str) -> bool| -> BTreeSet<usize> {
            p.iter().filter(|(s, _)| pred(s)).map(|&(_, o)| o).collect()
        };
        assert_eq!(owners(&|s| s.starts_with("advanced data ")).len(), 10);
        assert_eq!(owners(&|s| s.ends_with(" data analysis")).len(), 10);
        assert_eq!(owners(&|s| s.contains(" client ")).len(), 10);
        assert_eq!(owners(&|s| s.starts_with("global ")).len(), 20);
    }

    #[test]
    fn calibrated_means() {
        let c = generate_corpus(&small(1000)).unwrap();
        let n = c.profiles.len() as f64;
        let work: usize = c.profiles.iter().map(|p| p.work_slots().flatten().count()).sum();
        let edu: usize = c.profiles.iter().map(|p| p.education_slots().flatten().count()).sum();
        let skills: usize = c.profiles.iter().map(|p| p.skills.len()).sum();
        assert!((work as f64 / n - 2.19).abs() <= 0.15);
        assert!((edu as f64 / n - 1.76).abs() <= 0.15);
        assert!((skills as f64 / n - 19.72).abs() <= 1.0);
    }

    #[test]
    fn skill_knobs() {
        let spec = GenSpec { no_skills_rate: 0.3, ..small(2000) };
        let c = generate_corpus(&spec).unwrap();
        let n = c.profiles.len() as f64;
        let empty = c.profiles.iter().filter(|p| p.skills.is_empty()).count() as f64;
        let skills: usize = c.profiles.iter().map(|p| p.skills.len()).sum();
        assert!((empty / n - 0.3).abs() < 0.04, "{}", empty / n);
        assert!((skills as f64 / n - 19.72).abs() <= 1.0);

        // With purity 0 and no past jobs, skills still come from the own pool.
        let spec = GenSpec { skill_purity: 0.0, signal_strength: 1.0, ..small(500) };
        let c = generate_corpus(&spec).unwrap();
        let owner: HashMap<String, usize> = skill_phrases(spec.titles.len()).into_iter().collect();
        let title_idx = |t: &str| spec.titles.iter().position(|w| w.title == t).unwrap();
        let mut mixed = 0;
        for p in &c.profiles {
            let first = title_idx(&p.current_job.as_ref().unwrap().job_title);
            let past: Vec<usize> = p.past_jobs.iter().flatten().map(|j| title_idx(&j.job_title)).collect();
            for s in &p.skills {
                let o = owner[s];
                if past.iter().all(|&t| t == first) {
                    assert_eq!(o, first);
                } else {
                    assert!(past.contains(&o) && o != first, "{s}");
                    mixed += 1;
                }
            }
        }
        assert!(mixed > 0);
    }

    #[test]
    fn csv_parses_cleanly_and_is_deterministic() {
        let c = generate_corpus(&small(300)).unwrap();
        let mut a = Vec::new();
        write_profiles(&c.profiles, &mut a).unwrap();
        let mut b = Vec::new();
        write_profiles(&generate_corpus(&small(300)).unwrap().profiles, &mut b).unwrap();
        assert_eq!(a, b);
        let parsed = parse_profiles(&a[..]).unwrap();
        assert!(parsed.row_errors.is_empty());
        assert_eq!(parsed.profiles.len(), 300);
        assert_eq!(parsed.profiles, c.profiles);
    }

    #[test]
    fn positives_requirement_is_checked() {
        let spec = GenSpec { n_users: 200, ..Default::default() };
        assert!(matches!(generate_corpus(&spec), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn spec_round_trips_through_kv() {
        let mut spec = GenSpec::default();
        spec.signal_strength = 0.25;
        spec.seed = 7;
        let text = spec.to_kv_lines().join("\n");
        let back = GenSpec::from_kv(&KvFile::parse(&text).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn invalid_specs() {
        let mut s = small(10);
        s.signal_strength = 1.5;
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.titles.clear();
        assert!(s.validate().is_err());
        let mut s = small(10);
        s.target_titles = vec!["astronaut".into()];
        assert!(s.validate().is_err());
    }

    #[test]
    fn embeddings_file_loads() {
        let mut buf = Vec::new();
        write_synthetic_embeddings(&small(1), 8, &mut buf).unwrap();
        let t = crate::embed::load_embeddings(&buf[..]).unwrap();
        assert_eq!(t.dim, 8);
        assert!(t.vectors.contains_key("backend"));
        assert_eq!(t.duplicates, 0);
    }
}
