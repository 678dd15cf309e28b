//! `xcal`: batch front end over campaign bundle directories.
//!
//! A bundle directory holds `campaign.json`, `items.jsonl` and, once
//! judgments exist, `judgments.jsonl`. Every command reads files and
//! writes JSONL, JSON or aligned text to stdout or `--out`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;
use xcal_core::assembly::{assemble_task, write_task_jsonl};
use xcal_core::calibmath::{AdjustmentFunction, AggregateScore, Method};
use xcal_core::ingest::{latest_wins, Ingestor};
use xcal_core::io::{self as xio, Bundle, IoError, JUDGMENTS_FILE, TRUTH_FILE};
use xcal_core::metrics::{
    bleu, chrf, levenshtein, sentence_bleu, BuiltinTokenizer, Granularity, MetricKind,
    MetricRecord, MetricScore, BLEU_MAX_N, CHRF_BETA, CHRF_ORDER,
};
use xcal_core::model::{validate_campaign, Campaign, JudgmentRecord, RawJudgment};
use xcal_core::pipeline::{
    aggregate_by_evaluator, aggregate_by_lp, calibrate, check_coverage, fit_from_aggregates,
    Dataset, Level, Targets,
};
use xcal_core::protocols::{rubric, Protocol};
use xcal_core::report::{compute_report_with, render, Precomputed, ReportFormat, ReportOptions};
use xcal_core::simulator::{evaluate_calibration, simulate, SimConfig};
use xcal_core::stats::DEFAULT_RESAMPLES;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_parse() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "xcal",
    version,
    about = "Calibrated human evaluation of machine translation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Campaign definition checks.
    #[command(subcommand)]
    Campaign(CampaignCmd),
    /// Evaluator task files.
    #[command(subcommand)]
    Task(TaskCmd),
    /// Validate judgment files and append the valid records to the bundle.
    Ingest(IngestArgs),
    /// Mean-of-medians aggregates per (pair, source).
    Aggregate(AggregateArgs),
    /// Fit adjustment functions.
    Calibrate(CalibrateArgs),
    /// Full campaign report.
    Report(ReportArgs),
    /// Automatic metrics over line-aligned text files.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Simulated campaigns with known ground truth.
    Simulate(SimulateArgs),
    /// Print a protocol's scoring rubric.
    Rubric(RubricArgs),
}

#[derive(Subcommand)]
enum CampaignCmd {
    /// Check a bundle's campaign and items; violations go to stderr.
    Validate { dir: PathBuf },
}

#[derive(Subcommand)]
enum TaskCmd {
    /// Blinded, deterministically ordered item list for an evaluator.
    Assemble {
        dir: PathBuf,
        #[arg(long, required_unless_present = "all")]
        evaluator: Option<String>,
        /// One file per evaluator, `<out-dir>/<evaluator>.jsonl`.
        #[arg(long, requires = "out_dir", conflicts_with = "evaluator")]
        all: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    dir: PathBuf,
    /// JSONL files of judgment records.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    dir: PathBuf,
    #[arg(long, default_value = "lp")]
    level: Level,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Bundle directory. Optional when `--aggregates` and `--consensus`
    /// are both given.
    dir: Option<PathBuf>,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = xcal_core::calibmath::DEFAULT_HT_TARGET)]
    ht_target: f64,
    /// Consensus target; defaults to the mean consensus of the calibration set.
    #[arg(long)]
    consensus: Option<f64>,
    #[arg(long, default_value = "lp")]
    level: Level,
    /// Fit from an `aggregate` output instead of the bundle's judgments.
    #[arg(long, conflicts_with = "level")]
    aggregates: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    dir: PathBuf,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Methods to include, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "raw,cs,ht,cs+ht")]
    method: Vec<Method>,
    #[arg(long, default_value = "lp")]
    level: Level,
    #[arg(long, default_value_t = xcal_core::calibmath::DEFAULT_HT_TARGET)]
    ht_target: f64,
    /// Use these aggregates instead of recomputing them.
    #[arg(long)]
    aggregates: Option<PathBuf>,
    /// `method=path` with functions from `calibrate`; repeatable.
    #[arg(long, value_parser = parse_functions_arg)]
    functions: Vec<(Method, PathBuf)>,
    /// Expected descending source order for separation, comma separated.
    #[arg(long, value_delimiter = ',')]
    order: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_functions_arg(s: &str) -> std::result::Result<(Method, PathBuf), String> {
    let (method, path) = s.split_once('=').ok_or("expected method=path")?;
    Ok((method.parse()?, PathBuf::from(path)))
}

#[derive(Args)]
struct TextPair {
    /// Candidate sentences, one per line.
    #[arg(long)]
    candidates: PathBuf,
    /// Reference sentences, line-aligned with the candidates.
    #[arg(long)]
    references: PathBuf,
    /// Item ids, line-aligned; defaults to 1-based line numbers.
    #[arg(long)]
    ids: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// BLEU in [0, 1]; per sentence (smoothed) or `--corpus`.
    Bleu {
        #[command(flatten)]
        text: TextPair,
        #[arg(long, default_value = "whitespace")]
        tokenizer: BuiltinTokenizer,
        #[arg(long, default_value_t = BLEU_MAX_N)]
        max_n: usize,
        #[arg(long)]
        corpus: bool,
    },
    /// chrF in [0, 100] per sentence.
    Chrf {
        #[command(flatten)]
        text: TextPair,
        #[arg(long, default_value_t = CHRF_ORDER)]
        order: usize,
        #[arg(long, default_value_t = CHRF_BETA)]
        beta: f64,
    },
    /// Character edit distance per sentence.
    Lev {
        #[command(flatten)]
        text: TextPair,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulator config; omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of consecutive seeds starting at the config's seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Write each campaign bundle to `<out>/seed-<n>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = xcal_core::calibmath::DEFAULT_HT_TARGET)]
    ht_target: f64,
}

#[derive(Args)]
struct RubricArgs {
    #[arg(long, default_value = "xsts")]
    protocol: Protocol,
    #[arg(long, value_enum, default_value_t = RubricFormat::Text)]
    format: RubricFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum RubricFormat {
    Text,
    Json,
}

/// Writes to `--out` or stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

struct Loaded {
    bundle: Bundle,
    campaign: Campaign,
}

impl Loaded {
    fn judgments(&self) -> Result<Vec<RawJudgment>> {
        self.bundle
            .judgments
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, r)| {
                RawJudgment::try_from(r)
                    .map_err(|e| invalid(format!("{JUDGMENTS_FILE}:{}: {e}", i + 1)))
            })
            .collect()
    }
}

fn load(dir: &Path) -> Result<Loaded> {
    let bundle = Bundle::load(dir)?;
    let campaign = bundle
        .manifest
        .clone()
        .into_campaign(bundle.items.clone())
        .map_err(invalid)?;
    let report = validate_campaign(&campaign);
    if !report.is_valid() {
        return Err(invalid(format!("invalid campaign: {report}")));
    }
    Ok(Loaded { bundle, campaign })
}

fn dataset(loaded: &Loaded) -> Result<Dataset> {
    let judgments = latest_wins(loaded.judgments()?);
    let ds = Dataset::build(&loaded.campaign, &judgments);
    check_coverage(&loaded.campaign, &ds).map_err(invalid)?;
    Ok(ds)
}

fn campaign_validate(dir: &Path) -> Result<()> {
    let bundle = Bundle::load(dir)?;
    let campaign = bundle
        .manifest
        .into_campaign(bundle.items)
        .map_err(invalid)?;
    let report = validate_campaign(&campaign);
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!(
                "{}",
                serde_json::to_string(v).expect("violation serializes")
            );
        }
        return Err(invalid(format!("{} violation(s)", report.violations.len())));
    }
    println!(
        "ok: {} items, {} calibration items, {} evaluators",
        campaign.items.len(),
        campaign.calibration_items.len(),
        campaign.evaluators.len()
    );
    Ok(())
}

fn task_assemble(
    dir: &Path,
    evaluator: Option<&str>,
    out_dir: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let loaded = load(dir)?;
    let render_one = |id: &str| -> Result<String> {
        let task = assemble_task(&loaded.campaign, id).map_err(invalid)?;
        let mut buf = Vec::new();
        write_task_jsonl(&task, &mut buf).expect("writing to memory");
        Ok(String::from_utf8(buf).expect("utf-8 json"))
    };
    match evaluator {
        Some(id) => emit(out, &render_one(id)?),
        None => {
            let out_dir = out_dir.expect("clap requires --out-dir with --all");
            fs::create_dir_all(out_dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
            for e in &loaded.campaign.evaluators {
                emit(
                    Some(&out_dir.join(format!("{}.jsonl", e.id))),
                    &render_one(&e.id)?,
                )?;
            }
            Ok(())
        }
    }
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let mut loaded = load(&args.dir)?;
    let ingestor = Ingestor::new(&loaded.campaign);
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for input in &args.inputs {
        let records: Vec<JudgmentRecord> = xio::read_jsonl(input)?;
        let outcome = ingestor.ingest(records);
        for e in &outcome.errors {
            let line = serde_json::json!({ "file": input.display().to_string(), "index": e.index, "item_id": e.item_id, "error": e.error });
            eprintln!("{line}");
        }
        rejected += outcome.errors.len();
        accepted.extend(outcome.accepted.iter().map(JudgmentRecord::from));
    }
    let n = accepted.len();
    loaded.bundle.judgments.extend(accepted);
    xio::write_jsonl(&args.dir.join(JUDGMENTS_FILE), &loaded.bundle.judgments)?;
    println!("accepted {n}, rejected {rejected}");
    if rejected > 0 {
        return Err(invalid(format!("{rejected} record(s) rejected")));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluatorAggregate<'a> {
    evaluator: &'a str,
    #[serde(flatten)]
    aggregate: &'a AggregateScore,
}

fn aggregate(args: &AggregateArgs) -> Result<()> {
    let loaded = load(&args.dir)?;
    let ds = dataset(&loaded)?;
    let text = match args.level {
        Level::LanguagePair => xio::to_jsonl(&aggregate_by_lp(&ds)),
        Level::Evaluator => {
            let by_evaluator = aggregate_by_evaluator(&ds);
            let rows: Vec<EvaluatorAggregate> = by_evaluator
                .iter()
                .flat_map(|((_, e), aggs)| {
                    aggs.iter().map(move |a| EvaluatorAggregate {
                        evaluator: e,
                        aggregate: a,
                    })
                })
                .collect();
            xio::to_jsonl(&rows)
        }
    };
    emit(args.out.as_deref(), &text)
}

fn calibrate_cmd(args: &CalibrateArgs) -> Result<()> {
    let loaded = args.dir.as_deref().map(load).transpose()?;
    let consensus = match (args.consensus, &loaded) {
        (Some(c), _) => c,
        (None, Some(l)) => {
            Targets::for_campaign(&l.campaign, args.ht_target)
                .map_err(invalid)?
                .consensus
        }
        (None, None) => return Err(invalid("give a bundle directory or --consensus")),
    };
    let targets = Targets {
        consensus,
        ht: args.ht_target,
    };
    let mut warnings = Vec::new();
    let functions = match (&args.aggregates, &loaded) {
        (Some(path), _) => {
            let aggs: Vec<AggregateScore> = xio::read_jsonl(path)?;
            fit_from_aggregates(args.method, &aggs, targets, &mut warnings).map_err(invalid)?
        }
        (None, Some(l)) => {
            let ds = dataset(l)?;
            let raw = aggregate_by_lp(&ds);
            let c = calibrate(args.method, args.level, &ds, &raw, targets).map_err(invalid)?;
            warnings = c.warnings;
            c.functions
        }
        (None, None) => return Err(invalid("give a bundle directory or --aggregates")),
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    emit(args.out.as_deref(), &xio::to_jsonl(&functions))
}

fn report_cmd(args: &ReportArgs) -> Result<()> {
    let loaded = load(&args.dir)?;
    let judgments = loaded.judgments()?;
    let mut pre = Precomputed::default();
    if let Some(path) = &args.aggregates {
        pre.aggregates = Some(xio::read_jsonl(path)?);
    }
    for (method, path) in &args.functions {
        let functions: Vec<AdjustmentFunction> = xio::read_jsonl(path)?;
        pre.functions.insert(*method, functions);
    }
    let options = ReportOptions {
        methods: args.method.clone(),
        level: args.level,
        ht_target: args.ht_target,
        order: args.order.clone(),
        resamples: args.resamples,
        seed: args.seed,
    };
    let report = compute_report_with(
        &loaded.campaign,
        &judgments,
        &loaded.bundle.manifest.automatic_scores,
        &options,
        &pre,
    )
    .map_err(invalid)?;
    emit(args.out.as_deref(), &render(&report, args.format))
}

struct Lines {
    ids: Vec<String>,
    candidates: Vec<String>,
    references: Vec<String>,
}

fn read_lines(text: &TextPair) -> Result<Lines> {
    let split = |s: String| s.lines().map(str::to_string).collect::<Vec<_>>();
    let candidates = split(read_text(&text.candidates)?);
    let references = split(read_text(&text.references)?);
    if candidates.len() != references.len() {
        return Err(invalid(format!(
            "{} candidate lines but {} reference lines",
            candidates.len(),
            references.len()
        )));
    }
    let ids = match &text.ids {
        Some(path) => {
            let ids = split(read_text(path)?);
            if ids.len() != candidates.len() {
                return Err(invalid(format!(
                    "{} ids for {} lines",
                    ids.len(),
                    candidates.len()
                )));
            }
            ids
        }
        None => (1..=candidates.len()).map(|i| i.to_string()).collect(),
    };
    Ok(Lines {
        ids,
        candidates,
        references,
    })
}

fn per_line(
    text: &TextPair,
    metric: MetricKind,
    f: impl Fn(&str, &str) -> std::result::Result<f64, xcal_core::metrics::MetricError>,
) -> Result<()> {
    let lines = read_lines(text)?;
    let records = lines
        .ids
        .iter()
        .zip(lines.candidates.iter().zip(&lines.references))
        .map(|(id, (c, r))| {
            f(c, r)
                .map(|value| MetricRecord {
                    item_id: id.clone(),
                    metric,
                    value,
                })
                .map_err(|e| invalid(format!("item {id}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    emit(text.out.as_deref(), &xio::to_jsonl(&records))
}

fn metrics_cmd(cmd: &MetricsCmd) -> Result<()> {
    match cmd {
        MetricsCmd::Bleu {
            text,
            tokenizer,
            max_n,
            corpus,
        } => {
            let tok = tokenizer.get();
            if *corpus {
                let lines = read_lines(text)?;
                let value =
                    bleu(&lines.candidates, &lines.references, tok, *max_n).map_err(invalid)?;
                let score = MetricScore {
                    metric: MetricKind::Bleu,
                    value,
                    granularity: Granularity::Corpus,
                };
                let mut line = serde_json::to_string(&score).expect("score serializes");
                line.push('\n');
                emit(text.out.as_deref(), &line)
            } else {
                per_line(text, MetricKind::Bleu, |c, r| {
                    sentence_bleu(c, r, tok, *max_n)
                })
            }
        }
        MetricsCmd::Chrf { text, order, beta } => {
            per_line(text, MetricKind::Chrf, |c, r| chrf(c, r, *order, *beta))
        }
        MetricsCmd::Lev { text } => per_line(text, MetricKind::Levenshtein, |c, r| {
            Ok(levenshtein(c, r) as f64)
        }),
    }
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    methods: BTreeMap<&'static str, MethodSummary>,
}

#[derive(Serialize)]
struct MethodSummary {
    pearson: f64,
    kendall_tau: f64,
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let base: SimConfig = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?,
        None => SimConfig::default(),
    };
    base.validate().map_err(invalid)?;
    let mut out = String::new();
    let mut wins = 0u64;
    let mut gain = 0.0;
    for k in 0..args.seeds {
        let config = SimConfig {
            seed: base.seed.wrapping_add(k),
            ..base.clone()
        };
        let sim = simulate(&config).map_err(invalid)?;
        if let Some(root) = &args.out {
            let dir = root.join(format!("seed-{}", config.seed));
            sim.to_bundle().save(&dir)?;
            xio::write_json(&dir.join(TRUTH_FILE), &sim.truth)?;
        }
        let evals = evaluate_calibration(&sim, &Method::ALL, args.ht_target).map_err(invalid)?;
        let methods: BTreeMap<&'static str, MethodSummary> = evals
            .iter()
            .map(|e| {
                (
                    e.method.name(),
                    MethodSummary {
                        pearson: e.pearson,
                        kendall_tau: e.kendall_tau,
                    },
                )
            })
            .collect();
        let (raw, cs) = (methods["raw"].pearson, methods["cs"].pearson);
        if cs >= raw {
            wins += 1;
        }
        gain += cs - raw;
        out.push_str(
            &serde_json::to_string(&SeedSummary {
                seed: config.seed,
                methods,
            })
            .expect("summary serializes"),
        );
        out.push('\n');
    }
    emit(None, &out)?;
    eprintln!(
        "cs >= raw pearson in {wins}/{} seeds, mean gain {:.4}",
        args.seeds,
        gain / args.seeds.max(1) as f64
    );
    Ok(())
}

fn rubric_cmd(args: &RubricArgs) -> Result<()> {
    let entries = rubric(args.protocol).map_err(invalid)?;
    let text = match args.format {
        RubricFormat::Json => {
            let mut s = serde_json::to_string_pretty(&entries).expect("rubric serializes");
            s.push('\n');
            s
        }
        RubricFormat::Text => {
            let mut s = String::new();
            for e in &entries {
                s.push_str(&format!("{}  {}\n    {}\n", e.score, e.title, e.guidance));
                for ex in &e.examples {
                    s.push_str(&format!(
                        "    - ({}) {} / {}\n",
                        ex.note, ex.text_1, ex.text_2
                    ));
                }
            }
            s
        }
    };
    emit(None, &text)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Campaign(CampaignCmd::Validate { dir }) => campaign_validate(&dir),
        Command::Task(TaskCmd::Assemble {
            dir,
            evaluator,
            all: _,
            out_dir,
            out,
        }) => task_assemble(
            &dir,
            evaluator.as_deref(),
            out_dir.as_deref(),
            out.as_deref(),
        ),
        Command::Ingest(args) => ingest(&args),
        Command::Aggregate(args) => aggregate(&args),
        Command::Calibrate(args) => calibrate_cmd(&args),
        Command::Report(args) => report_cmd(&args),
        Command::Metrics(cmd) => metrics_cmd(&cmd),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Rubric(args) => rubric_cmd(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
