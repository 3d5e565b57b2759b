//! Command-line driver: batch pipeline steps over files plus server launch.
//! Exit codes are 0 on success, 1 for contract errors and 2 for I/O errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{AppConfig, ConfigError};
use crate::corpus::{self, CorpusError, IngestOptions, SourceFormat};
use crate::pipeline::{self, PipelineError, ReviewAnalyzer};
use crate::ranking::{self, RankError, RankOptions};
use crate::service::{self, ServiceError, ServiceState};
use crate::store::{EventStore, StoreError};
use crate::study::{aggregate_report, StudyError, StudyState};
use crate::summarizer::{SummaryBackend, SummaryError, SummaryRequest, Summarizer};

pub const CLEANED_HEADER: [&str; 3] = ["review_id", "customer_id", "cleaned_review"];
pub const SENTIMENT_HEADER: [&str; 3] = ["review_id", "sentiment_score", "sentiment_label"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{code}: {message}")]
    Contract { code: String, message: String },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Contract { .. } => 1,
            CliError::Io(_) => 2,
        }
    }

    fn contract(code: &str, message: impl ToString) -> Self {
        CliError::Contract { code: code.to_string(), message: message.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::contract(e.code(), &e)
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::contract(e.code(), &e),
        }
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::Pipeline(p) => p.into(),
            other => CliError::contract(other.code(), &other),
        }
    }
}

impl From<SummaryError> for CliError {
    fn from(e: SummaryError) -> Self {
        CliError::contract(e.code(), &e)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::contract(other.code(), &other),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Store(s) => s.into(),
            StudyError::Pipeline(p) => p.into(),
            other => CliError::contract(other.code(), &other),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Config(c) => c.into(),
            ServiceError::Pipeline(p) => p.into(),
            ServiceError::Store(s) => s.into(),
            ServiceError::Study(s) => s.into(),
            ServiceError::Io(io) => io.into(),
            ServiceError::InvalidBind(b) => CliError::contract("InvalidConfig", format!("invalid bind address `{b}`")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "revrank", version, about = "Personalized review ranking and summarization")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Review corpus (TSV) to use instead of the configured one.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Remote,
    Extractive,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a review dump and report corpus statistics and rejections.
    Ingest {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "tsv")]
        format: FormatArg,
        /// Fail on the first invalid row.
        #[arg(long)]
        strict: bool,
    },
    /// Clean review text into `review_id, customer_id, cleaned_review`.
    Clean {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score reviews into `review_id, sentiment_score, sentiment_label`.
    Sentiment {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print a user's preference profile built from their reviews.
    Profile {
        #[arg(long)]
        user: String,
        #[arg(long)]
        category: Option<String>,
    },
    /// Rank a product's reviews for a user.
    Rank {
        #[arg(long)]
        user: String,
        #[arg(long)]
        product: String,
        #[arg(long)]
        k: Option<usize>,
        /// Rank even if the user already reviewed the product.
        #[arg(long)]
        allow_reviewed: bool,
    },
    /// Summarize the top-ranked reviews of a product for a user.
    Summarize {
        #[arg(long)]
        user: String,
        #[arg(long)]
        product: String,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        allow_reviewed: bool,
    },
    /// Aggregate study responses from the event store.
    Report {
        #[arg(long)]
        csv: bool,
    },
    /// Run the HTTP service.
    Serve,
}

fn load_config(global: &GlobalArgs) -> Result<AppConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(corpus) = &global.corpus {
        cfg.corpus_path = Some(corpus.clone());
    }
    if let Some(dir) = &global.data_dir {
        cfg.data_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_string(&mut text))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(text)
}

fn print_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn excerpt(text: &str, max: usize) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max {
        flat
    } else {
        format!("{}...", flat.chars().take(max).collect::<String>().trim_end())
    }
}

#[derive(Serialize)]
struct IngestStats {
    records: usize,
    users: usize,
    products: usize,
    categories: Vec<String>,
    rejected: Vec<corpus::RejectedRow>,
}

fn cmd_ingest(file: &Path, format: FormatArg, strict: bool, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let format = match format {
        FormatArg::Tsv => SourceFormat::Tsv,
        FormatArg::Csv => SourceFormat::Csv,
    };
    let source = File::open(file).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
    let ingested = corpus::ingest(BufReader::new(source), IngestOptions { format, strict })?;
    let c = &ingested.corpus;
    let stats = IngestStats {
        records: c.len(),
        users: c.user_count(),
        products: c.product_count(),
        categories: c.categories(),
        rejected: ingested.rejected,
    };
    if json {
        return print_json(&stats, out);
    }
    writeln!(out, "records:    {}", stats.records)?;
    writeln!(out, "users:      {}", stats.users)?;
    writeln!(out, "products:   {}", stats.products)?;
    writeln!(out, "categories: {}", stats.categories.join(", "))?;
    writeln!(out, "rejected:   {}", stats.rejected.len())?;
    for r in &stats.rejected {
        writeln!(out, "  line {}: {}", r.row, r.reason)?;
    }
    Ok(())
}

/// Cleans a corpus TSV, or re-cleans an already cleaned TSV, so the command
/// can be applied to its own output.
pub fn clean_tsv(text: &str, analyzer: &ReviewAnalyzer) -> Result<String, CliError> {
    let first = text.lines().next().unwrap_or_default();
    let fields: Vec<&str> = first.trim_end_matches('\r').split('\t').collect();
    let rows: Vec<(String, String, Vec<String>)> = if fields == CLEANED_HEADER {
        text.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let cols: Vec<&str> = l.trim_end_matches('\r').splitn(3, '\t').collect();
                match cols.as_slice() {
                    [id, customer, body] => Ok((id.to_string(), customer.to_string(), analyzer.clean(body))),
                    [id, customer] => Ok((id.to_string(), customer.to_string(), Vec::new())),
                    _ => Err(CliError::contract("MalformedRow", format!("expected 3 columns: {l}"))),
                }
            })
            .collect::<Result<_, _>>()?
    } else {
        let ingested = corpus::ingest_tsv(text.as_bytes(), false)?;
        ingested
            .corpus
            .records()
            .iter()
            .map(|r| {
                let c = analyzer.clean_review(r);
                (c.review_id, c.customer_id, c.tokens)
            })
            .collect()
    };
    let mut out = CLEANED_HEADER.join("\t");
    out.push('\n');
    for (id, customer, tokens) in rows {
        out.push_str(&format!("{id}\t{customer}\t{}\n", tokens.join(" ")));
    }
    Ok(out)
}

/// `review_id, sentiment_score, sentiment_label` rows, scores to 4 places.
pub fn sentiment_tsv(text: &str, analyzer: &ReviewAnalyzer) -> Result<String, CliError> {
    let corpus = corpus::ingest_tsv(text.as_bytes(), false)?.corpus;
    let mut out = SENTIMENT_HEADER.join("\t");
    out.push('\n');
    for r in corpus.records() {
        let s = analyzer
            .score(&r.review_id, r.star_rating as i64, &r.review_body)
            .map_err(|e| CliError::contract(e.code(), &e))?;
        out.push_str(&format!("{}\t{:.4}\t{}\n", s.review_id, s.sentiment_score, s.sentiment_label));
    }
    Ok(out)
}

/// Runs one parsed command, writing normal output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let global = &cli.global;
    if let Command::Ingest { file, format, strict } = &cli.command {
        return cmd_ingest(file, *format, *strict, global.json, out);
    }
    let cfg = load_config(global)?;
    match cli.command {
        Command::Ingest { .. } => unreachable!("handled above"),
        Command::Clean { file, output } => {
            let analyzer = ReviewAnalyzer::from_config(&cfg)?;
            let text = clean_tsv(&read_file(&file)?, &analyzer)?;
            write_output(output.as_deref(), &text, out)
        }
        Command::Sentiment { file, output } => {
            let analyzer = ReviewAnalyzer::from_config(&cfg)?;
            let text = sentiment_tsv(&read_file(&file)?, &analyzer)?;
            write_output(output.as_deref(), &text, out)
        }
        Command::Profile { user, category } => {
            let analyzer = ReviewAnalyzer::from_config(&cfg)?;
            let corpus = pipeline::load_corpus(&cfg)?.corpus;
            let profile = analyzer.historical_profile(&corpus, &user, category.as_deref())?;
            print_json(&profile, out)
        }
        Command::Rank { user, product, k, allow_reviewed } => {
            let analyzer = ReviewAnalyzer::from_config(&cfg)?;
            let corpus = pipeline::load_corpus(&cfg)?.corpus;
            let profile = analyzer.historical_profile(&corpus, &user, None)?;
            let opts = RankOptions { weights: cfg.weights, allow_reviewed };
            let ranked = ranking::rank_reviews(&profile, &product, &corpus, &analyzer, &opts)?;
            let shown = match k {
                Some(k) => ranking::top_k(&ranked, k),
                None => ranked,
            };
            if global.json {
                return print_json(&shown, out);
            }
            writeln!(out, "{:<5} {:<12} {:>11}  Review", "Rank", "Review ID", "Final Score")?;
            for (i, s) in shown.iter().enumerate() {
                let body = corpus.get(&s.review_id).map(|r| r.review_body.as_str()).unwrap_or_default();
                writeln!(out, "{:<5} {:<12} {:>11.4}  {}", i + 1, s.review_id, s.final_score, excerpt(body, 70))?;
            }
            Ok(())
        }
        Command::Summarize { user, product, backend, k, allow_reviewed } => {
            let analyzer = ReviewAnalyzer::from_config(&cfg)?;
            let corpus = pipeline::load_corpus(&cfg)?.corpus;
            let profile = analyzer.historical_profile(&corpus, &user, None)?;
            let opts = RankOptions { weights: cfg.weights, allow_reviewed };
            let ranked = ranking::rank_reviews(&profile, &product, &corpus, &analyzer, &opts)?;
            let title = corpus.product(&product).map(|p| p.product_title).unwrap_or_default();
            let request = SummaryRequest::from_ranking(&title, &profile, &ranked, &corpus, k.unwrap_or(cfg.summarizer.k));
            let summarizer = Summarizer::new(cfg.summarizer.clone(), analyzer.catalog().clone()).with_tau(analyzer.tau());
            let backend = match backend {
                Some(BackendArg::Remote) => SummaryBackend::Remote,
                Some(BackendArg::Extractive) => SummaryBackend::Extractive,
                None => cfg.summarizer.backend,
            };
            let result = summarizer.summarize_with(&request, backend)?;
            if global.json {
                return print_json(&result, out);
            }
            writeln!(out, "{}", result.text)?;
            Ok(())
        }
        Command::Report { csv } => {
            let dir = cfg.data_dir.join(service::EVENTS_DIR);
            if !dir.is_dir() {
                return Err(CliError::Io(format!("no event store at {}", dir.display())));
            }
            let (_, events) = EventStore::open(&dir)?;
            let state = StudyState::replay(&events)?;
            let report = aggregate_report(state.responses())?;
            if global.json {
                print_json(&report, out)
            } else if csv {
                Ok(out.write_all(report.to_csv().as_bytes())?)
            } else {
                Ok(out.write_all(report.to_table().as_bytes())?)
            }
        }
        Command::Serve => {
            let state = ServiceState::open(cfg)?;
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(service::serve(state))?;
            Ok(())
        }
    }
}

/// Parses `args` and runs the command. Usage errors exit through clap.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    execute(Cli::parse_from(args), out)
}

/// Entry point for the binary: runs the process arguments and returns the
/// exit code, printing any error as one line on stderr.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
