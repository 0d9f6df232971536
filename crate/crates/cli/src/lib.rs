//! `daoclass` command line: ingest proposals, classify them, evaluate
//! against gold labels and export statistics.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error. Every run ends
//! with one JSON summary line on stdout.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use daoclass_core::analytics::{aggregate_with_failures, export_stats, ExportFormat};
use daoclass_core::evaluation::{
    confusion_csv, evaluate, load_gold_labels, meets_ending_condition, report_json, report_text,
};
use daoclass_core::gateway::{
    Gateway, OpenAiProvider, Provider, RecordingProvider, ReplayProvider, DEFAULT_CHAT_ENDPOINT,
    DEFAULT_CONTEXT_TOKENS,
};
use daoclass_core::http::{HttpClient, ReplayClient, ReqwestClient};
use daoclass_core::ingest::{load_proposals_file, write_proposals_file, Ingestor};
use daoclass_core::model::{LlmParameters, Proposal};
use daoclass_core::par;
use daoclass_core::pipeline::{BatchSummary, Pipeline, PipelineOptions};
use daoclass_core::prompt::DEFAULT_BODY_BUDGET;
use daoclass_core::retry::{RetryPolicy, ThreadSleeper};
use daoclass_core::store::Store;
use daoclass_core::taxonomy::{
    builtin_taxonomy_v7, load_taxonomy, taxonomy_document, Taxonomy, BUILTIN_VERSION,
};
use serde_json::{json, Map, Value};

pub use config::Config;

#[derive(Debug, Parser)]
#[command(
    name = "daoclass",
    version,
    about = "Classify DAO governance proposals with an LLM"
)]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, default_value = "daoclass-store")]
    store: PathBuf,
    /// TOML config with endpoints, budgets and concurrency.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch proposals into the store.
    Ingest(IngestArgs),
    /// Classify stored (or given) proposals.
    Classify(ClassifyArgs),
    /// Score records against gold labels.
    Evaluate(EvaluateArgs),
    /// Export per-space category statistics.
    Report(ReportArgs),
    /// Inspect the taxonomy.
    Taxonomy {
        #[command(subcommand)]
        command: TaxonomyCommand,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceKind {
    Snapshot,
    Discourse,
    File,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    source: SourceKind,
    /// Space to fetch (repeatable). Defaults to the seven built-in spaces.
    #[arg(long)]
    space: Vec<String>,
    /// Proposals file for `--source file`.
    #[arg(long, required_if_eq("source", "file"))]
    input: Option<PathBuf>,
    /// Also write the fetched proposals to this file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Stop Discourse listings after this many pages.
    #[arg(long)]
    max_pages: Option<u32>,
    /// Serve HTTP from recorded exchanges instead of the network.
    #[arg(long)]
    http_replay: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Live,
    Replay,
    Record,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Proposals file; stored first, then classified. Without it, every
    /// stored proposal is classified.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Only proposals of this space (repeatable).
    #[arg(long)]
    space: Vec<String>,
    #[arg(long, value_enum, default_value = "live")]
    provider: ProviderKind,
    /// Replay store to read (replay) or append to (record).
    #[arg(long, required_if_eq_any([("provider", "replay"), ("provider", "record")]))]
    replay_file: Option<PathBuf>,
    /// Taxonomy TOML; the built-in taxonomy when absent.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    frequency_penalty: Option<f64>,
    #[arg(long)]
    presence_penalty: Option<f64>,
    /// Maximum body characters before truncation.
    #[arg(long)]
    body_budget: Option<usize>,
    /// Requests in flight.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Chat-completion endpoint for the live provider.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    no_corrective_retry: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Gold labels CSV (proposal_id,category,labeler); stored for later runs.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the confusion matrix as CSV.
    #[arg(long)]
    confusion_csv: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    taxonomy_version: Option<u32>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    taxonomy_version: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum TaxonomyCommand {
    /// Print the taxonomy as TOML.
    Show {
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Write the document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A problem with how the command was invoked rather than with the work.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn run(cli: Cli) -> anyhow::Result<Value> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(args) => ingest(&cli.store, &config, args),
        Command::Classify(args) => classify(&cli.store, &config, args),
        Command::Evaluate(args) => evaluate_cmd(&cli.store, &config, args),
        Command::Report(args) => report(&cli.store, &config, args),
        Command::Taxonomy {
            command: TaxonomyCommand::Show { taxonomy, out },
        } => taxonomy_show(taxonomy.as_deref(), out.as_deref()),
    }
}

fn summary(command: &str, classified: usize, failed: usize, cached: usize, extra: Value) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("classified".into(), json!(classified));
    m.insert("failed".into(), json!(failed));
    m.insert("cached".into(), json!(cached));
    if let Value::Object(extra) = extra {
        m.extend(extra);
    }
    Value::Object(m)
}

fn ingest(store_dir: &Path, config: &Config, args: IngestArgs) -> anyhow::Result<Value> {
    let proposals = match args.source {
        SourceKind::File => {
            let input = args
                .input
                .as_deref()
                .ok_or_else(|| usage("--input is required for --source file"))?;
            load_proposals_file(input)?
        }
        kind => {
            let mut source = config.source_config();
            if let Some(endpoint) = &args.endpoint {
                match kind {
                    SourceKind::Snapshot => source.snapshot_endpoint = endpoint.clone(),
                    _ => return Err(usage("--endpoint applies to --source snapshot only")),
                }
            }
            let client: Box<dyn HttpClient> = match &args.http_replay {
                Some(path) => Box::new(
                    ReplayClient::from_file(path)
                        .with_context(|| format!("reading {}", path.display()))?,
                ),
                None => Box::new(ReqwestClient::new(source.request_timeout)?),
            };
            let ingestor = Ingestor::new(source, client.as_ref(), &ThreadSleeper)?;
            let spaces: Vec<String> = if args.space.is_empty() {
                daoclass_core::ingest::DEFAULT_SPACES
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            } else {
                args.space.clone()
            };
            // one worker per space; pages within a space stay sequential
            let fetched = par::map_bounded(&spaces, spaces.len(), |space| match kind {
                SourceKind::Snapshot => ingestor.fetch_all_snapshot(space),
                _ => ingestor.fetch_all_discourse(space, args.max_pages),
            });
            let mut all = Vec::new();
            for (space, result) in spaces.iter().zip(fetched) {
                all.extend(result.with_context(|| format!("fetching {space}"))?);
            }
            all
        }
    };
    if let Some(out) = &args.output {
        write_proposals_file(out, &proposals)?;
    }
    let mut store = Store::open(store_dir)?;
    let counts = store.upsert_proposals(&proposals)?;
    Ok(summary(
        "ingest",
        0,
        0,
        0,
        json!({"fetched": proposals.len(), "inserted": counts.inserted, "updated": counts.updated}),
    ))
}

fn load_taxonomy_arg(path: Option<&Path>) -> anyhow::Result<Taxonomy> {
    match path {
        None => Ok(builtin_taxonomy_v7()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading taxonomy {}", p.display()))?;
            Ok(load_taxonomy(&text).with_context(|| format!("taxonomy {}", p.display()))?)
        }
    }
}

fn parameters(config: &Config, args: &ClassifyArgs) -> anyhow::Result<LlmParameters> {
    let mut p = LlmParameters::default();
    let llm = &config.llm;
    p.model = args
        .model
        .clone()
        .or_else(|| llm.model.clone())
        .unwrap_or(p.model);
    p.max_tokens = args.max_tokens.or(llm.max_tokens).unwrap_or(p.max_tokens);
    p.temperature = args
        .temperature
        .or(llm.temperature)
        .unwrap_or(p.temperature);
    p.frequency_penalty = args
        .frequency_penalty
        .or(llm.frequency_penalty)
        .unwrap_or(p.frequency_penalty);
    p.presence_penalty = args
        .presence_penalty
        .or(llm.presence_penalty)
        .unwrap_or(p.presence_penalty);
    p.validate().map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

fn live_provider(config: &Config, endpoint: Option<&str>) -> anyhow::Result<OpenAiProvider> {
    let endpoint = endpoint
        .map(str::to_string)
        .or_else(|| config.llm.endpoint.clone())
        .unwrap_or_else(|| DEFAULT_CHAT_ENDPOINT.to_string());
    let timeout = Duration::from_secs(config.llm.request_timeout_secs.unwrap_or(120));
    let http: Arc<dyn HttpClient> = Arc::new(ReqwestClient::new(timeout)?);
    Ok(OpenAiProvider::from_env(endpoint, http)?)
}

fn classify(store_dir: &Path, config: &Config, args: ClassifyArgs) -> anyhow::Result<Value> {
    let params = parameters(config, &args)?;
    let taxonomy = load_taxonomy_arg(args.taxonomy.as_deref())?;
    let options = PipelineOptions {
        body_budget: args
            .body_budget
            .or(config.classify.body_budget)
            .unwrap_or(DEFAULT_BODY_BUDGET),
        concurrency: args
            .concurrency
            .or(config.classify.concurrency)
            .unwrap_or(PipelineOptions::default().concurrency),
        corrective_retry: !args.no_corrective_retry
            && config.classify.corrective_retry.unwrap_or(true),
    };
    if options.body_budget == 0 || options.concurrency == 0 {
        return Err(usage("--body-budget and --concurrency must be at least 1"));
    }

    let provider: Box<dyn Provider> = match args.provider {
        ProviderKind::Replay => {
            let path = args
                .replay_file
                .as_deref()
                .ok_or_else(|| usage("--replay-file is required"))?;
            Box::new(
                ReplayProvider::from_file(path)
                    .with_context(|| format!("reading replay file {}", path.display()))?,
            )
        }
        ProviderKind::Record => {
            let path = args
                .replay_file
                .clone()
                .ok_or_else(|| usage("--replay-file is required"))?;
            Box::new(RecordingProvider::new(
                live_provider(config, args.endpoint.as_deref())?,
                path,
            ))
        }
        ProviderKind::Live => Box::new(live_provider(config, args.endpoint.as_deref())?),
    };

    let mut store = Store::open(store_dir)?;
    let mut proposals: Vec<Proposal> = match &args.input {
        Some(input) => {
            let proposals = load_proposals_file(input)?;
            store.upsert_proposals(&proposals)?;
            proposals
        }
        None => store.proposals(),
    };
    if !args.space.is_empty() {
        proposals.retain(|p| args.space.contains(&p.space));
    }

    let cache = store.load_cache()?;
    let retry = RetryPolicy {
        max_retries: config
            .llm
            .max_retries
            .unwrap_or(RetryPolicy::default().max_retries),
        ..RetryPolicy::default()
    };
    let gateway = Gateway::new(provider.as_ref(), &ThreadSleeper)
        .with_retry(retry)
        .with_context_tokens(config.llm.context_tokens.unwrap_or(DEFAULT_CONTEXT_TOKENS));
    let result = Pipeline::new(&gateway, &taxonomy, params, &cache)
        .with_options(options)
        .classify_all(&proposals);
    // keep whatever was fetched even if the batch was aborted
    store.save_cache(&cache)?;
    let outcomes = result?;

    let stats = BatchSummary::from_outcomes(&outcomes);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o.result {
            Ok(r) => records.push(r),
            Err(f) => {
                tracing::warn!(proposal = %f.proposal_id, stage = ?f.stage, detail = %f.detail, "classification failed");
                failures.push(f);
            }
        }
    }
    store.upsert_records(records)?;
    if !failures.is_empty() {
        store.record_failures(failures)?;
    }
    Ok(summary(
        "classify",
        stats.classified,
        stats.failed,
        stats.cached,
        json!({"provider_calls": stats.provider_calls, "truncated": stats.truncated}),
    ))
}

fn model_and_version(
    config: &Config,
    model: Option<String>,
    version: Option<u32>,
) -> (String, u32) {
    let model = model
        .or_else(|| config.llm.model.clone())
        .unwrap_or_else(|| LlmParameters::default().model);
    (model, version.unwrap_or(BUILTIN_VERSION))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f =
        std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    f.write_all(text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn evaluate_cmd(store_dir: &Path, config: &Config, args: EvaluateArgs) -> anyhow::Result<Value> {
    // read the gold file before touching the store so a bad path leaves it alone
    let gold = match &args.gold {
        Some(path) => Some(load_gold_labels(path)?),
        None => None,
    };
    let mut store = Store::open(store_dir)?;
    let gold = match gold {
        Some(gold) => {
            store.set_gold_labels(gold.clone())?;
            gold
        }
        None if store.gold_labels().is_empty() => bail!("no gold labels: pass --gold"),
        None => store.gold_labels().to_vec(),
    };
    let (model, version) = model_and_version(config, args.model, args.taxonomy_version);
    let records = store.records_for(&model, version);
    let failed = store
        .failures()
        .iter()
        .filter(|f| f.model == model && f.taxonomy_version == version)
        .count();
    let report = evaluate(&records, &gold)
        .with_context(|| format!("evaluating {model} / taxonomy v{version}"))?;
    print!("{}", report_text(&report));
    if let Some(path) = &args.report {
        write_text(path, &report_json(&report))?;
    }
    if let Some(path) = &args.confusion_csv {
        write_text(path, &confusion_csv(&report))?;
    }
    Ok(summary(
        "evaluate",
        records.len(),
        failed,
        0,
        json!({
            "total": report.total,
            "correct": report.correct,
            "accuracy": report.accuracy,
            "ending_condition_met": meets_ending_condition(&report),
        }),
    ))
}

fn report(store_dir: &Path, config: &Config, args: ReportArgs) -> anyhow::Result<Value> {
    let store = Store::open(store_dir)?;
    let (model, version) = model_and_version(config, args.model, args.taxonomy_version);
    let records = store.records_for(&model, version);
    let failed: Vec<String> = store
        .failures()
        .into_iter()
        .filter(|f| f.model == model && f.taxonomy_version == version)
        .map(|f| f.proposal_id)
        .collect();
    let stats = aggregate_with_failures(&records, &store.proposals(), &failed)?;
    let format = match args.format {
        FormatArg::Csv => ExportFormat::Csv,
        FormatArg::Json => ExportFormat::Json,
    };
    let written = export_stats(&stats, &args.out, format)?;
    Ok(summary(
        "report",
        records.len(),
        failed.len(),
        0,
        json!({"spaces": stats.counts.len(), "files": written}),
    ))
}

fn taxonomy_show(path: Option<&Path>, out: Option<&Path>) -> anyhow::Result<Value> {
    let taxonomy = load_taxonomy_arg(path)?;
    let document = taxonomy_document(&taxonomy);
    match out {
        Some(out) => write_text(out, &document)?,
        None => print!("{document}"),
    }
    if taxonomy.definitions.is_empty() {
        return Err(anyhow!("taxonomy has no categories"));
    }
    Ok(summary(
        "taxonomy show",
        0,
        0,
        0,
        json!({"version": taxonomy.version, "categories": taxonomy.definitions.len()}),
    ))
}
