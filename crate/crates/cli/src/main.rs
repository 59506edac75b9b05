//! `jobrec` command-line front end.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::info;

use jobrec::classify::write_feature_matrix;
use jobrec::datagen::{generate_corpus, write_synthetic_embeddings, write_truth, GenSpec};
use jobrec::harness::{
    featurize, load_data, make_dataset, read_results, run_grid, write_report, write_tables, ExperimentConfig,
};
use jobrec::harness::grid::{FeatureContext, Featurized};
use jobrec::embed::{load_embeddings, train_paragraph_vectors};
use jobrec::kv::KvFile;
use jobrec::profile::write_profiles;
use jobrec::tensor::{Tensor, TensorFile};
use jobrec::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CELLS: u8 = 3;

/// Dimension of the word vectors written next to a generated corpus.
const SYNTHETIC_EMBEDDING_DIM: usize = 50;

#[derive(Parser, Debug)]
#[command(name = "jobrec", version, about = "Candidate-for-job recommendation experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Replaces the seed list of the config (or the datagen seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cells run concurrently.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic profile corpus.
    Datagen {
        /// Generator spec (`datagen.*` keys or bare keys); defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment grid of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the features of the first grid unit (debugging aid).
    Featurize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run only the collaborative-filtering cells of a config.
    Cf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render tables and the macro summary from results.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, message: format!("config error: {e}") }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_DATA, message: format!("data error: {e}") }
    }
}

/// Config and argument problems exit 1, everything else 2.
fn classify_error(e: Error) -> Failure {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => Failure::config(e),
        other => Failure::data(other),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("jobrec: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Datagen { spec, out } => datagen(spec.as_deref(), out, &cli.global),
        Command::Run { config, out } => run(config, out, &cli.global, false),
        Command::Cf { config, out } => run(config, out, &cli.global, true),
        Command::Featurize { config, out } => featurize_dump(config, out, &cli.global),
        Command::Report { input } => report(input),
    }
}

fn load_config(path: &Path, opts: &GlobalOpts) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::load(path).map_err(Failure::config)?;
    if let Some(seed) = opts.seed {
        config.seeds = vec![seed];
    }
    if let Some(jobs) = opts.jobs {
        config.jobs = jobs;
    }
    config.validate().map_err(Failure::config)?;
    Ok(config)
}

fn io_data(e: std::io::Error) -> Failure {
    Failure::data(e)
}

fn datagen(spec_path: Option<&Path>, out: &Path, opts: &GlobalOpts) -> Result<u8, Failure> {
    let mut spec = match spec_path {
        None => GenSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            let kv = KvFile::parse(&text).map_err(Failure::config)?;
            GenSpec::from_kv(&kv).map_err(Failure::config)?
        }
    };
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(Failure::config)?;
    let corpus = generate_corpus(&spec).map_err(classify_error)?;
    fs::create_dir_all(out).map_err(io_data)?;
    let create = |name: &str| File::create(out.join(name)).map(BufWriter::new).map_err(io_data);
    write_profiles(&corpus.profiles, create("profiles.csv")?).map_err(classify_error)?;
    write_truth(&corpus.truth, create("truth.csv")?).map_err(classify_error)?;
    write_synthetic_embeddings(&spec, SYNTHETIC_EMBEDDING_DIM, create("embeddings.txt")?).map_err(classify_error)?;
    let mut text = spec.to_kv_lines().join("\n");
    text.push('\n');
    fs::write(out.join("spec.cfg"), text).map_err(io_data)?;
    println!("wrote {} profiles to {}", corpus.profiles.len(), out.display());
    Ok(0)
}

fn run(config_path: &Path, out: &Path, opts: &GlobalOpts, cf_only: bool) -> Result<u8, Failure> {
    let mut config = load_config(config_path, opts)?;
    if cf_only {
        config.content_enabled = false;
        config.cf.enabled = true;
        config.validate().map_err(Failure::config)?;
    }
    let report = run_grid(&config).map_err(classify_error)?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_report(&report, out, timestamp, Some(&config.dump())).map_err(classify_error)?;
    let failures = report.failures();
    println!(
        "{} cells, {} failed; config hash {}; results in {}",
        report.cells.len(),
        failures,
        report.config_hash,
        out.display()
    );
    Ok(if failures > 0 { EXIT_CELLS } else { 0 })
}

/// Featurizes (first seed, first title, first representation, first subset)
/// and writes the matrices and labels as a tensor file, plus the vocabulary
/// for n-gram representations.
fn featurize_dump(config_path: &Path, out: &Path, opts: &GlobalOpts) -> Result<u8, Failure> {
    let config = load_config(config_path, opts)?;
    let data = load_data(&config.data).map_err(classify_error)?;
    let seed = config.seeds[0];
    let title = &config.titles[0];
    let rep = config.representations[0];
    let subset = config.subsets[0];
    let dataset = make_dataset(&data.profiles, &config, title, seed).map_err(classify_error)?;
    let embeddings = match &config.embeddings {
        Some(p) => {
            let f = File::open(p).map_err(io_data)?;
            Some(load_embeddings(std::io::BufReader::new(f)).map_err(classify_error)?)
        }
        None => None,
    };
    let pv_corpus = if config.pv_scope == jobrec::harness::PvScope::Corpus
        && rep == jobrec::harness::Representation::ParagraphVector
    {
        let docs: Vec<Vec<String>> = data
            .profiles
            .iter()
            .map(|p| jobrec::text::tokenize(&jobrec::profile::assemble_field_text(p, subset)))
            .collect();
        let mut cfg = config.pv.clone();
        cfg.seed = seed;
        Some(train_paragraph_vectors(&docs, &cfg).map_err(classify_error)?)
    } else {
        None
    };
    let ctx = FeatureContext {
        min_doc_freq: config.min_doc_freq,
        embeddings: embeddings.as_ref(),
        pv: &config.pv,
        pv_corpus: pv_corpus.as_ref(),
    };
    let Featurized { train, test, y_train, y_test, vocabulary, .. } =
        featurize(&data.profiles, &dataset, rep, subset, &ctx, seed).map_err(classify_error)?;
    let mut tf = TensorFile::default();
    write_feature_matrix(&mut tf, "train", &train);
    write_feature_matrix(&mut tf, "test", &test);
    tf.push("train.labels", Tensor::u32(y_train.iter().map(|&l| u32::from(l)).collect()));
    tf.push("test.labels", Tensor::u32(y_test.iter().map(|&l| u32::from(l)).collect()));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_data)?;
    }
    tf.write_to(BufWriter::new(File::create(out).map_err(io_data)?)).map_err(classify_error)?;
    if let Some(v) = vocabulary {
        let mut path = out.as_os_str().to_owned();
        path.push(".vocab");
        v.write_to(BufWriter::new(File::create(PathBuf::from(path)).map_err(io_data)?))
            .map_err(classify_error)?;
    }
    info!("featurized {title} / {rep} / {subset} with seed {seed}");
    println!(
        "{title} / {rep} / {subset}: train {}x{}, test {}x{}; written to {}",
        train.n_rows(),
        train.n_cols(),
        test.n_rows(),
        test.n_cols(),
        out.display()
    );
    Ok(0)
}

fn report(dir: &Path) -> Result<u8, Failure> {
    let path = dir.join("results.csv");
    let file = File::open(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let report = read_results(file).map_err(classify_error)?;
    write_tables(&report, dir).map_err(classify_error)?;
    println!("{} cells re-rendered into {}", report.cells.len(), dir.join("tables").display());
    Ok(0)
}
