//! `seqlab`: command-line front end for the sequence-labeling toolkit.
//!
//! One binary, ten subcommands covering the full workflow: `validate`,
//! `kappa`, `cluster`, `split`, `train`, `search`, `cv`, `tag`, `eval`,
//! `xeval`. Exit codes: 0 success, 1 usage error, 2 data or validation
//! error, 3 numeric error. All randomness flows from the single `--seed`
//! flag; `--threads` defaults to 1 so runs are reproducible byte for byte.
//! Options may also come from a `key = value` config file (`--config`),
//! with explicit flags taking precedence; environment variables are never
//! consulted.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use seqlab::agreement::{cohens_kappa, AgreementError, AnnotationPair};
use seqlab::corpus::{
    parse_conll, parse_conll_indexed, parse_conll_raw, parse_conll_tokens, render_stats, split,
    stats, tokenize_raw, validate_bio, write_conll, Corpus, CorpusError, SplitRatios,
    TaggedSentence, ValidationMode,
};
use seqlab::crf::{
    cross_validate, load_model, random_search, render_search_log, render_training_log, save_model,
    train, CrfError, CrfModel, Featurizer, SearchSpace, TrainConfig,
};
use seqlab::eval::{crosslingual_eval, error_dump, token_report, EvalError, TagMapping};
use seqlab::features::{cluster_embeddings, load_clusters, load_embeddings, FeatureError};

// ---------------------------------------------------------------------------
// Errors and exit codes

enum AppError {
    /// Bad input data, failed validation, unusable files: exit 2.
    Data(String),
    /// Numeric failure (overflow to non-finite values): exit 3.
    Numeric(String),
}

impl AppError {
    fn code(&self) -> i32 {
        match self {
            AppError::Data(_) => 2,
            AppError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Data(m) | AppError::Numeric(m) => m,
        }
    }

    fn data(message: impl Into<String>) -> AppError {
        AppError::Data(message.into())
    }
}

impl From<CorpusError> for AppError {
    fn from(e: CorpusError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<AgreementError> for AppError {
    fn from(e: AgreementError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<FeatureError> for AppError {
    fn from(e: FeatureError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<CrfError> for AppError {
    fn from(e: CrfError) -> Self {
        match e {
            CrfError::NonFinite(_) => AppError::Numeric(e.to_string()),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(inner) => AppError::from(inner),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(format!("i/o error: {e}"))
    }
}

// ---------------------------------------------------------------------------
// Config file: `key = value` lines, `#` comments, flags take precedence.

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "threads",
    "c1",
    "c2",
    "max_iterations",
    "tolerance",
    "memory",
    "min_frequency",
    "candidates",
    "c1_min",
    "c1_max",
    "c2_min",
    "c2_max",
    "folds",
    "k",
    "max_iters",
    "train_ratio",
    "dev_ratio",
    "test_ratio",
];

#[derive(Default)]
struct FileConfig {
    values: HashMap<String, String>,
    origin: String,
}

impl FileConfig {
    fn load(path: &Path) -> Result<FileConfig, AppError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::data(format!("cannot read config {origin}: {e}")))?;
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AppError::data(format!(
                    "config {origin} line {}: expected `key = value`, got `{raw}`",
                    idx + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(AppError::data(format!(
                    "config {origin} line {}: unknown key `{key}`",
                    idx + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values, origin })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, AppError>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                AppError::data(format!(
                    "config {}: key `{key}`: cannot parse `{raw}`: {e}",
                    self.origin
                ))
            }),
        }
    }

    /// Flag value if given, else config-file value, else the default.
    fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, AppError>
    where
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }
}

// ---------------------------------------------------------------------------
// Argument surface

#[derive(Parser)]
#[command(
    name = "seqlab",
    version,
    about = "Sequence-labeling toolkit: BIO corpora, agreement, CRF training, evaluation"
)]
struct Cli {
    /// Seed for every randomized step (clustering, splitting, training, search).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker thread count; the default 1 is fully sequential.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// `key = value` config file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check (or repair) BIO label chains in a two-column CoNLL file.
    Validate(ValidateArgs),
    /// Cohen's kappa between two annotations of the same text.
    Kappa(KappaArgs),
    /// Build k-means word clusters from an embedding table.
    Cluster(ClusterArgs),
    /// Deterministic train/dev/test split of a corpus.
    Split(SplitArgs),
    /// Train a CRF tagger and save the model file.
    Train(TrainArgs),
    /// Randomized hyperparameter search scored on a dev set.
    Search(SearchArgs),
    /// K-fold cross-validation of one configuration.
    Cv(CvArgs),
    /// Tag CoNLL tokens or raw text with a trained model.
    Tag(TagArgs),
    /// Score a prediction file against a gold file.
    Eval(EvalArgs),
    /// Evaluate a model on a foreign-language CoNLL file.
    Xeval(XevalArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Two-column CoNLL input.
    input: PathBuf,
    /// Rewrite orphan I- labels to B- instead of failing.
    #[arg(long)]
    repair: bool,
    /// Where to write the repaired corpus (requires --repair).
    #[arg(long, value_name = "FILE", requires = "repair")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct KappaArgs {
    /// First annotator's CoNLL file.
    file_a: PathBuf,
    /// Second annotator's CoNLL file over the same tokens.
    file_b: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Embedding table: `word v1 v2 ...` per line, optional count/dim header.
    embeddings: PathBuf,
    /// Number of clusters (default 64).
    #[arg(long, value_name = "N")]
    k: Option<u32>,
    /// Lloyd-iteration cap (default 100).
    #[arg(long, value_name = "N")]
    max_iters: Option<usize>,
    /// Output cluster file: `word<TAB>id` per line.
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Two-column CoNLL input.
    input: PathBuf,
    /// Training fraction (default 0.8).
    #[arg(long, value_name = "R")]
    train_ratio: Option<f64>,
    /// Development fraction (default 0.1).
    #[arg(long, value_name = "R")]
    dev_ratio: Option<f64>,
    /// Test fraction (default 0.1).
    #[arg(long, value_name = "R")]
    test_ratio: Option<f64>,
    /// Directory for train.tsv, dev.tsv, test.tsv.
    #[arg(long, value_name = "DIR")]
    output_dir: PathBuf,
}

/// Hyperparameter flags shared by train, search, and cv.
#[derive(Args)]
struct TrainFlags {
    /// L1 (lasso) coefficient; 0 disables it.
    #[arg(long, value_name = "X")]
    c1: Option<f64>,
    /// L2 (ridge) coefficient.
    #[arg(long, value_name = "X")]
    c2: Option<f64>,
    /// Optimizer iteration cap.
    #[arg(long, value_name = "N")]
    max_iterations: Option<usize>,
    /// Relative objective-decrease stopping threshold.
    #[arg(long, value_name = "X")]
    tolerance: Option<f64>,
    /// L-BFGS memory (retained correction pairs).
    #[arg(long, value_name = "N")]
    memory: Option<usize>,
    /// Drop features seen fewer than N times.
    #[arg(long, value_name = "N")]
    min_frequency: Option<u32>,
    /// Word-cluster file (`word<TAB>id`) for cluster features.
    #[arg(long, value_name = "FILE")]
    clusters: Option<PathBuf>,
    /// Repair orphan I- labels in the input instead of failing.
    #[arg(long)]
    repair: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training corpus.
    input: PathBuf,
    /// Where to save the trained model.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Write the iteration log here instead of stdout.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct SearchArgs {
    /// Labeled training corpus.
    train: PathBuf,
    /// Labeled development corpus for scoring candidates.
    dev: PathBuf,
    /// Number of candidate configurations (default 100).
    #[arg(long, value_name = "N")]
    candidates: Option<usize>,
    /// Lower bound of the log-uniform c1 range (default 1e-3).
    #[arg(long, value_name = "X")]
    c1_min: Option<f64>,
    /// Upper bound of the log-uniform c1 range (default 10).
    #[arg(long, value_name = "X")]
    c1_max: Option<f64>,
    /// Lower bound of the log-uniform c2 range (default 1e-3).
    #[arg(long, value_name = "X")]
    c2_min: Option<f64>,
    /// Upper bound of the log-uniform c2 range (default 10).
    #[arg(long, value_name = "X")]
    c2_max: Option<f64>,
    /// Save the best model here.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct CvArgs {
    /// Labeled corpus to cross-validate on.
    input: PathBuf,
    /// Number of folds (default 5).
    #[arg(long, value_name = "K")]
    folds: Option<usize>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct TagArgs {
    /// Input file: CoNLL tokens (first column) or raw text with --raw.
    input: PathBuf,
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Word-cluster file; must match the one used at training time.
    #[arg(long, value_name = "FILE")]
    clusters: Option<PathBuf>,
    /// Treat the input as raw text, one sentence per line.
    #[arg(long)]
    raw: bool,
    /// Forbid label sequences that violate the BIO chain constraint.
    #[arg(long)]
    constrained: bool,
    /// Write tagged CoNLL output here instead of stdout.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold-labeled CoNLL file.
    gold: PathBuf,
    /// Predicted CoNLL file over the same tokens.
    pred: PathBuf,
    /// Write the per-error dump (with context windows) to this file.
    #[arg(long, value_name = "FILE")]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct XevalArgs {
    /// Foreign-language CoNLL file (tags may use a foreign scheme).
    foreign: PathBuf,
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Word-cluster file; must match the one used at training time.
    #[arg(long, value_name = "FILE")]
    clusters: Option<PathBuf>,
    /// Tag mapping file: `FOREIGN_TYPE<TAB>LOCAL_TYPE` per line.
    #[arg(long, value_name = "FILE")]
    mapping: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Entry point

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are not usage errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = file.resolve(cli.seed, "seed", 0u64)?;
    let threads = file.resolve(cli.threads, "threads", 1usize)?;
    if threads == 0 {
        return Err(AppError::data("threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| AppError::data(format!("cannot build thread pool: {e}")))?;

    match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Kappa(args) => cmd_kappa(args),
        Command::Cluster(args) => cmd_cluster(args, &file, seed),
        Command::Split(args) => cmd_split(args, &file, seed),
        Command::Train(args) => cmd_train(args, &file, seed),
        Command::Search(args) => cmd_search(args, &file, seed),
        Command::Cv(args) => cmd_cv(args, &file, seed),
        Command::Tag(args) => cmd_tag(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Xeval(args) => cmd_xeval(args),
    }
}

// ---------------------------------------------------------------------------
// File helpers

fn open_reader(path: &Path) -> Result<BufReader<File>, AppError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::data(format!("cannot open {}: {e}", path.display())))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, AppError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<Corpus, AppError> {
    Ok(parse_conll(open_reader(path)?, &path.display().to_string())?)
}

/// Parses and BIO-checks a training/evaluation corpus. With `repair`,
/// orphan I- labels are fixed and counted; otherwise they fail the run.
fn read_checked_corpus(path: &Path, repair: bool) -> Result<Corpus, AppError> {
    let corpus = read_corpus(path)?;
    let mode = if repair {
        ValidationMode::Repair
    } else {
        ValidationMode::Strict
    };
    let validated = validate_bio(&corpus, mode)?;
    if !validated.repairs.is_empty() {
        println!("repairs\t{}", validated.repairs.len());
    }
    Ok(validated.corpus)
}

fn load_featurizer(clusters: &Option<PathBuf>) -> Result<Featurizer, AppError> {
    match clusters {
        None => Ok(Featurizer::without_clusters()),
        Some(path) => {
            let loaded = load_clusters(open_reader(path)?)?;
            for (word, line) in &loaded.duplicates {
                eprintln!(
                    "warning: {} line {line}: duplicate word `{word}` (last entry wins)",
                    path.display()
                );
            }
            Ok(Featurizer::new(loaded.map))
        }
    }
}

fn read_model(path: &Path) -> Result<CrfModel, AppError> {
    let mut reader = open_reader(path)?;
    Ok(load_model(&mut reader)?)
}

fn resolve_train_config(
    flags: &TrainFlags,
    file: &FileConfig,
    seed: u64,
) -> Result<TrainConfig, AppError> {
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        c1: file.resolve(flags.c1, "c1", defaults.c1)?,
        c2: file.resolve(flags.c2, "c2", defaults.c2)?,
        max_iterations: file.resolve(flags.max_iterations, "max_iterations", defaults.max_iterations)?,
        tolerance: file.resolve(flags.tolerance, "tolerance", defaults.tolerance)?,
        memory: file.resolve(flags.memory, "memory", defaults.memory)?,
        min_frequency: file.resolve(flags.min_frequency, "min_frequency", defaults.min_frequency)?,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_validate(args: ValidateArgs) -> Result<(), AppError> {
    let source = args.input.display().to_string();
    let (corpus, lines) = parse_conll_indexed(open_reader(&args.input)?, &source)?;
    let mode = if args.repair {
        ValidationMode::Repair
    } else {
        ValidationMode::Strict
    };
    match validate_bio(&corpus, mode) {
        Ok(validated) => {
            println!("sentences\t{}", validated.corpus.len());
            println!("tokens\t{}", validated.corpus.token_count());
            print!("{}", render_stats(&stats(&validated.corpus)));
            for r in &validated.repairs {
                println!(
                    "repair\t{}\t{}\t{}\t{}",
                    lines[r.sentence][r.token], r.sentence, r.token, r.label
                );
            }
            println!("repairs\t{}", validated.repairs.len());
            if let Some(output) = &args.output {
                let mut writer = create_writer(output)?;
                write_conll(&validated.corpus, &mut writer)?;
                writer.flush()?;
                println!("output\t{}", output.display());
            }
            Ok(())
        }
        Err(CorpusError::BioViolations(violations)) => {
            for v in &violations {
                println!(
                    "violation\t{}\t{}\t{}\t{}",
                    lines[v.sentence][v.token], v.sentence, v.token, v.label
                );
            }
            let first = violations[0];
            Err(AppError::data(format!(
                "{source} line {}: orphan {} (sentence {}, token {}); {} violation(s) total",
                lines[first.sentence][first.token],
                first.label,
                first.sentence,
                first.token,
                violations.len()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_kappa(args: KappaArgs) -> Result<(), AppError> {
    let a = read_corpus(&args.file_a)?;
    let b = read_corpus(&args.file_b)?;
    let pair = AnnotationPair::from_corpora(&a, &b)?;
    let report = cohens_kappa(&pair)?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_cluster(args: ClusterArgs, file: &FileConfig, seed: u64) -> Result<(), AppError> {
    let k = file.resolve(args.k, "k", 64u32)?;
    let max_iters = file.resolve(args.max_iters, "max_iters", 100usize)?;
    let table = load_embeddings(open_reader(&args.embeddings)?)?;
    let clusters = cluster_embeddings(&table, k as usize, seed, max_iters)?;

    let mut writer = create_writer(&args.output)?;
    for (word, id) in clusters.entries() {
        writeln!(writer, "{word}\t{id}")?;
    }
    writer.flush()?;

    println!("vocab\t{}", table.len());
    println!("k\t{}", clusters.cluster_count());
    println!("fingerprint\t{:016x}", clusters.fingerprint());
    println!("output\t{}", args.output.display());
    Ok(())
}

fn cmd_split(args: SplitArgs, file: &FileConfig, seed: u64) -> Result<(), AppError> {
    let ratios = SplitRatios::new(
        file.resolve(args.train_ratio, "train_ratio", 0.8)?,
        file.resolve(args.dev_ratio, "dev_ratio", 0.1)?,
        file.resolve(args.test_ratio, "test_ratio", 0.1)?,
    )?;
    let corpus = read_corpus(&args.input)?;
    let (train_part, dev_part, test_part) = split(&corpus, ratios, seed)?;

    std::fs::create_dir_all(&args.output_dir)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", args.output_dir.display())))?;
    for (name, part) in [
        ("train.tsv", &train_part),
        ("dev.tsv", &dev_part),
        ("test.tsv", &test_part),
    ] {
        let path = args.output_dir.join(name);
        let mut writer = create_writer(&path)?;
        write_conll(part, &mut writer)?;
        writer.flush()?;
        println!(
            "{}\t{}\t{}",
            name.trim_end_matches(".tsv"),
            part.len(),
            path.display()
        );
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, file: &FileConfig, seed: u64) -> Result<(), AppError> {
    let config = resolve_train_config(&args.flags, file, seed)?;
    let corpus = read_checked_corpus(&args.input, args.flags.repair)?;
    let featurizer = load_featurizer(&args.flags.clusters)?;

    let output = train(&corpus, &featurizer, &config)?;

    let mut writer = create_writer(&args.model)?;
    save_model(&output.model, &mut writer)?;
    writer.flush()?;

    let log_text = render_training_log(&output.log);
    match &args.log {
        Some(path) => {
            let mut writer = create_writer(path)?;
            writer.write_all(log_text.as_bytes())?;
            writer.flush()?;
        }
        None => print!("{log_text}"),
    }

    println!("sentences\t{}", corpus.len());
    println!("tokens\t{}", corpus.token_count());
    println!("labels\t{}", output.model.num_labels());
    println!("features\t{}", output.model.num_features());
    println!("iterations\t{}", output.log.len());
    if let Some(last) = output.log.last() {
        println!("final_objective\t{}", last.objective);
    }
    println!("model\t{}", args.model.display());
    Ok(())
}

fn cmd_search(args: SearchArgs, file: &FileConfig, seed: u64) -> Result<(), AppError> {
    let base = resolve_train_config(&args.flags, file, seed)?;
    let defaults = SearchSpace::default();
    let space = SearchSpace {
        c1_range: (
            file.resolve(args.c1_min, "c1_min", defaults.c1_range.0)?,
            file.resolve(args.c1_max, "c1_max", defaults.c1_range.1)?,
        ),
        c2_range: (
            file.resolve(args.c2_min, "c2_min", defaults.c2_range.0)?,
            file.resolve(args.c2_max, "c2_max", defaults.c2_range.1)?,
        ),
        candidates: file.resolve(args.candidates, "candidates", defaults.candidates)?,
        seed,
    };
    let train_set = read_checked_corpus(&args.train, args.flags.repair)?;
    let dev_set = read_checked_corpus(&args.dev, args.flags.repair)?;
    let featurizer = load_featurizer(&args.flags.clusters)?;

    let outcome = random_search(&train_set, &dev_set, &featurizer, &space, &base)?;
    print!("{}", render_search_log(&outcome));
    println!("best_c1\t{}", outcome.config.c1);
    println!("best_c2\t{}", outcome.config.c2);
    println!("best_dev_f1\t{}", outcome.dev_f1);
    if let Some(path) = &args.model {
        let mut writer = create_writer(path)?;
        save_model(&outcome.model, &mut writer)?;
        writer.flush()?;
        println!("model\t{}", path.display());
    }
    Ok(())
}

fn cmd_cv(args: CvArgs, file: &FileConfig, seed: u64) -> Result<(), AppError> {
    let config = resolve_train_config(&args.flags, file, seed)?;
    let folds = file.resolve(args.folds, "folds", 5usize)?;
    let corpus = read_checked_corpus(&args.input, args.flags.repair)?;
    let featurizer = load_featurizer(&args.flags.clusters)?;
    let report = cross_validate(&corpus, folds, &featurizer, &config)?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_tag(args: TagArgs) -> Result<(), AppError> {
    let model = read_model(&args.model)?;
    let featurizer = load_featurizer(&args.clusters)?;

    let sentences: Vec<TaggedSentence> = if args.raw {
        let mut out = Vec::new();
        for (idx, line) in open_reader(&args.input)?.lines().enumerate() {
            let line = line
                .map_err(|e| AppError::data(format!("line {}: {e}", idx + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let tokens = tokenize_raw(&line)?;
            if !tokens.is_empty() {
                out.push(TaggedSentence::from_unlabeled(tokens)?);
            }
        }
        if out.is_empty() {
            return Err(AppError::data("input contains no sentences"));
        }
        out
    } else {
        parse_conll_tokens(open_reader(&args.input)?)?
            .into_iter()
            .map(TaggedSentence::from_unlabeled)
            .collect::<Result<_, _>>()?
    };

    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(create_writer(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    for sentence in &sentences {
        let labels = model.tag_sentence(&featurizer, sentence, args.constrained)?;
        for (token, label) in sentence.tokens().iter().zip(&labels) {
            writeln!(out, "{}\t{label}", token.as_str())?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    let gold = read_corpus(&args.gold)?;
    let pred = read_corpus(&args.pred)?;
    if gold.len() != pred.len() {
        return Err(AppError::data(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.sentences().iter().zip(pred.sentences()).enumerate() {
        if g.tokens() != p.tokens() {
            return Err(AppError::data(format!(
                "sentence {i}: token surfaces differ between gold and prediction files"
            )));
        }
    }
    let labels: Vec<Vec<_>> = pred
        .sentences()
        .iter()
        .map(|s| s.labels().to_vec())
        .collect();
    let report = token_report(&gold, &labels)?;
    print!("{}", report.render());
    if let Some(path) = &args.dump {
        let dump = error_dump(&gold, &labels)?;
        let mut writer = create_writer(path)?;
        writer.write_all(dump.as_bytes())?;
        writer.flush()?;
        println!("dump\t{}", path.display());
    }
    Ok(())
}

fn cmd_xeval(args: XevalArgs) -> Result<(), AppError> {
    let raw = parse_conll_raw(
        open_reader(&args.foreign)?,
        &args.foreign.display().to_string(),
    )?;
    let mapping = match &args.mapping {
        Some(path) => TagMapping::load(open_reader(path)?)?,
        None => TagMapping::identity(),
    };
    let foreign = mapping.map_corpus(&raw)?;
    let model = read_model(&args.model)?;
    let clusters = match &args.clusters {
        Some(path) => {
            let loaded = load_clusters(open_reader(path)?)?;
            loaded.map
        }
        None => seqlab::features::ClusterMap::empty(),
    };
    let report = crosslingual_eval(&model, &foreign, &clusters)?;
    print!("{}", report.render());
    Ok(())
}
