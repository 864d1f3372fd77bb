//! Command-line front end. [`run`] parses arguments, loads the layered
//! configuration and dispatches to the pipeline stages and experiments.
//!
//! Exit status: 0 on success, 1 on operational errors (missing files,
//! schema violations, backend failures), 2 on usage errors.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::client::{Backend, ChatBackend, ChatConfig, RetryPolicy, ScriptedModel};
use crate::curation::{
    annotate_domains, deduplicate, diversity_sample, filter_by_verdicts, format_sft_example,
    generate_traces, grade_pool, remove_eval_overlap, validate_traces, CurationReport,
    DecontamConfig, EvalIndex, GradeOptions, Lexicon, SamplingPlan, StageKind, StageRow,
    TraceOptions, TraceRecord, VerdictRow, COLLECTION_STAGE, DECONTAM_STAGE, RNG_ALGORITHM,
};
use crate::eval::{
    budget_sweep, budget_sweep_truncated, emit_plot, evaluate, fit_sweep, forcing_sweep,
    macro_average, weighted_average, EvalError, EvalOptions, EvalOutcome, PlotFormat,
    RegressionFit, SweepResult, DEFAULT_BUDGET_GRID,
};
use crate::io::{self, IoError};
use crate::prompt::McqQuestion;

pub use config::{
    load_config, BackendSection, Config, ConfigError, ConfigFlags, CurationSection,
    PolicySection, RunSection,
};

#[derive(Debug, Parser)]
#[command(name = "ttscale", version, about = "Thinking-budget control, curation and evaluation sweeps")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigFlags,
    /// Scripted mock backend (JSON) used in place of the HTTP endpoint
    #[arg(long, global = true, value_name = "SCRIPT")]
    pub mock: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Training-data curation stages
    #[command(subcommand)]
    Curate(Curate),
    /// Evaluate one or more datasets under the configured policy
    Eval(EvalArgs),
    /// Accuracy over a grid of thinking budgets
    Sweep(SweepArgs),
    /// Accuracy over forcing counts 0..=max
    ForceSweep(ForceSweepArgs),
    /// Render a saved sweep as CSV or SVG
    Plot(PlotArgs),
    /// Validate and print a curation ledger
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum Curate {
    /// Keep questions every grader answers incorrectly
    Filter(FilterArgs),
    /// Generate reasoning traces with the teacher model
    Generate(IoArgs),
    /// Keep traces whose extracted answer matches the gold letter
    Validate(IoArgs),
    /// Drop questions overlapping evaluation sets
    Decontaminate(DecontamArgs),
    /// Drop repeated stems
    Dedup(IoArgs),
    /// Label question domains from a term lexicon
    Annotate(AnnotateArgs),
    /// Domain/dataset balanced sample
    Sample(SampleArgs),
    /// Format verified traces as SFT text
    FormatSft(IoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IoArgs {
    /// Input records (JSONL)
    #[arg(long)]
    pub input: PathBuf,
    /// Output records (JSONL)
    #[arg(long)]
    pub out: PathBuf,
    /// Curation ledger (JSON) to create or update
    #[arg(long, value_name = "LEDGER")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Replay recorded verdicts (JSONL) instead of querying graders
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Write the verdict matrix (JSONL)
    #[arg(long)]
    pub verdicts_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecontamArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Evaluation set (JSONL); repeatable
    #[arg(long = "eval", required = true)]
    pub eval_sets: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// JSON object mapping terms to domain qualifiers
    #[arg(long)]
    pub lexicon: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Target sample size
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset (JSONL); repeatable. Named after the file stem.
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<PathBuf>,
    /// Directory for results and plots
    #[arg(long, default_value = "results", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset (JSONL)
    /// Dataset (JSONL)
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated thinking budgets
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BUDGET_GRID)]
    pub budgets: Vec<usize>,
    /// Truncate one long run per question instead of re-running each budget
    #[arg(long)]
    pub fast: bool,
    /// Directory for results and plots
    #[arg(long, default_value = "results", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForceSweepArgs {
    /// Dataset (JSONL)
    #[arg(long)]
    pub dataset: PathBuf,
    /// Largest forcing count to evaluate
    #[arg(long, default_value_t = 3)]
    pub max_forcings: usize,
    /// Directory for results and plots
    #[arg(long, default_value = "results", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep summary written by `sweep` or `force-sweep`
    #[arg(long)]
    pub sweep: PathBuf,
    /// csv or svg
    #[arg(long, value_parser = parse_format)]
    pub format: PlotFormat,
    /// Output file
    #[arg(long)]
    pub out: PathBuf,
    /// Omit the fitted line and band
    #[arg(long)]
    pub no_fit: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Curation ledger (JSON)
    #[arg(long)]
    pub ledger: PathBuf,
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
}

fn parse_format(s: &str) -> Result<PlotFormat, String> {
    s.parse().map_err(|e: crate::eval::PlotError| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Op(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Op(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Op(m) => f.write_str(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Op(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Op(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidSweep(_) | EvalError::Policy(_) => CliError::Usage(e.to_string()),
            _ => CliError::Op(e.to_string()),
        }
    }
}

fn op(e: impl std::fmt::Display) -> CliError {
    CliError::Op(e.to_string())
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.config.as_deref(), |k| std::env::var(k).ok(), &cli.config)?;
    let mut ctx = Ctx::new(cfg, cli.mock.clone(), command_name(&cli.command))?;
    if let Some(p) = &cli.config.config {
        ctx.digest(p)?;
    }
    match &cli.command {
        Command::Curate(c) => curate(&mut ctx, c),
        Command::Eval(a) => cmd_eval(&mut ctx, a),
        Command::Sweep(a) => cmd_sweep(&mut ctx, a),
        Command::ForceSweep(a) => cmd_force_sweep(&mut ctx, a),
        Command::Plot(a) => cmd_plot(&mut ctx, a),
        Command::Report(a) => cmd_report(a),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Curate(c) => match c {
            Curate::Filter(_) => "curate filter",
            Curate::Generate(_) => "curate generate",
            Curate::Validate(_) => "curate validate",
            Curate::Decontaminate(_) => "curate decontaminate",
            Curate::Dedup(_) => "curate dedup",
            Curate::Annotate(_) => "curate annotate",
            Curate::Sample(_) => "curate sample",
            Curate::FormatSft(_) => "curate format-sft",
        },
        Command::Eval(_) => "eval",
        Command::Sweep(_) => "sweep",
        Command::ForceSweep(_) => "force-sweep",
        Command::Plot(_) => "plot",
        Command::Report(_) => "report",
    }
}

/// Per-invocation state: effective config, backend choice and the digests
/// of every input read so far.
struct Ctx {
    cfg: Config,
    command: &'static str,
    mock: Option<(PathBuf, Arc<ScriptedModel>)>,
    inputs: BTreeMap<String, String>,
}

impl Ctx {
    fn new(cfg: Config, mock: Option<PathBuf>, command: &'static str) -> Result<Self, CliError> {
        let mut ctx = Self {
            cfg,
            command,
            mock: None,
            inputs: BTreeMap::new(),
        };
        if let Some(path) = mock {
            ctx.digest(&path)?;
            let model = ScriptedModel::load(&path).map_err(op)?;
            ctx.mock = Some((path, Arc::new(model)));
        }
        Ok(ctx)
    }

    fn digest(&mut self, path: &Path) -> Result<(), CliError> {
        let d = io::file_digest(path)?;
        self.inputs.insert(path.display().to_string(), d);
        Ok(())
    }

    fn provenance(&self) -> Value {
        let backend = match &self.mock {
            Some((p, _)) => format!("mock:{}", p.display()),
            None => format!("chat:{}", self.cfg.backend.base_url),
        };
        json!({
            "tool": concat!("ttscale ", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "backend": backend,
            "config": self.cfg,
            "inputs": self.inputs,
        })
    }

    fn backend(&self, model: &str) -> Result<Arc<dyn Backend>, CliError> {
        if let Some((_, m)) = &self.mock {
            return Ok(m.clone());
        }
        let b = &self.cfg.backend;
        let cc = ChatConfig {
            base_url: b.base_url.clone(),
            model: model.to_owned(),
            api_key: b.api_key.clone(),
            timeout: Duration::from_secs(b.timeout_secs),
        };
        Ok(Arc::new(ChatBackend::new(cc).map_err(op)?))
    }

    fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.cfg.run.max_retries,
            ..RetryPolicy::default()
        }
    }

    fn read_questions(&mut self, path: &Path) -> Result<Vec<McqQuestion>, CliError> {
        self.digest(path)?;
        let text = io::read_to_string(path)?;
        let qs: Vec<McqQuestion> = io::parse_jsonl_checked(&text, path, |q: &McqQuestion| {
            q.validate().map_err(|e| e.to_string())
        })?;
        crate::prompt::validate_dataset(&qs).map_err(|e| op(format!("{}: {e}", path.display())))?;
        Ok(qs)
    }

    /// Reads questions or trace records (detected from the first record).
    fn read_pool(&mut self, path: &Path) -> Result<Pool, CliError> {
        let text = io::read_to_string(path)?;
        let is_trace = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .and_then(|l| serde_json::from_str::<Value>(l).ok())
            .is_some_and(|v| v.get("thinking").is_some());
        if !is_trace {
            return Ok(Pool {
                questions: self.read_questions(path)?,
                traces: None,
            });
        }
        self.digest(path)?;
        let traces: Vec<TraceRecord> = io::parse_jsonl(&text, path)?;
        let questions: Vec<McqQuestion> = traces.iter().map(|t| t.question.clone()).collect();
        crate::prompt::validate_dataset(&questions).map_err(|e| op(format!("{}: {e}", path.display())))?;
        Ok(Pool {
            questions,
            traces: Some(traces),
        })
    }

    fn write_pool(&self, path: &Path, pool: &Pool, keep: &[McqQuestion]) -> Result<(), CliError> {
        match &pool.traces {
            None => self.write_jsonl(path, keep),
            Some(traces) => {
                let by_id: BTreeMap<&str, &TraceRecord> =
                    traces.iter().map(|t| (t.question.id.as_str(), t)).collect();
                let out: Vec<TraceRecord> = keep
                    .iter()
                    .map(|q| TraceRecord {
                        question: q.clone(),
                        ..by_id[q.id.as_str()].clone()
                    })
                    .collect();
                self.write_jsonl(path, &out)
            }
        }
    }

    fn read_jsonl<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<Vec<T>, CliError> {
        self.digest(path)?;
        Ok(io::read_jsonl(path)?)
    }

    /// Writes `text` atomically plus a `<path>.provenance.json` sidecar.
    fn write_with_sidecar(&self, path: &Path, text: &str) -> Result<(), CliError> {
        io::write_atomic(path, text.as_bytes())?;
        let mut prov = self.provenance();
        prov["artifact_sha256"] = json!(io::sha256_hex(text.as_bytes()));
        let side = sidecar_path(path);
        io::write_atomic(&side, pretty(&prov).as_bytes())?;
        Ok(())
    }

    fn write_jsonl<T: Serialize>(&self, path: &Path, items: &[T]) -> Result<(), CliError> {
        self.write_with_sidecar(path, &io::to_jsonl(items))
    }

    /// Writes a JSON document with the provenance embedded under
    /// `provenance`.
    fn write_doc(&self, path: &Path, mut doc: Value) -> Result<(), CliError> {
        doc["provenance"] = self.provenance();
        io::write_atomic(path, pretty(&doc).as_bytes())?;
        Ok(())
    }

    fn update_ledger(&self, ledger: Option<&Path>, rows: Vec<StageRow>) -> Result<(), CliError> {
        self.update_ledger_with(ledger, rows, &[])
    }

    fn update_ledger_with(
        &self,
        ledger: Option<&Path>,
        rows: Vec<StageRow>,
        headers: &[(&str, Value)],
    ) -> Result<(), CliError> {
        let Some(path) = ledger else { return Ok(()) };
        let mut report: CurationReport = if path.exists() {
            serde_json::from_str(&io::read_to_string(path)?)
                .map_err(|e| op(format!("{}: {e}", path.display())))?
        } else {
            CurationReport::new()
        };
        for row in rows {
            report.push(row);
        }
        report.set_header(&format!("provenance: {}", self.command), self.provenance());
        for (k, v) in headers {
            report.set_header(k, v);
        }
        if let Err(e) = report.validate() {
            log::warn!("ledger {} is inconsistent: {e}", path.display());
        }
        io::write_atomic(path, pretty(&report).as_bytes())?;
        Ok(())
    }
}

/// Questions, optionally carried inside trace records.
struct Pool {
    questions: Vec<McqQuestion>,
    traces: Option<Vec<TraceRecord>>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn sources<'a>(qs: impl IntoIterator<Item = &'a McqQuestion>) -> impl Iterator<Item = &'a str> {
    qs.into_iter().map(|q| q.source.as_str())
}

fn curate(ctx: &mut Ctx, c: &Curate) -> Result<(), CliError> {
    match c {
        Curate::Filter(a) => {
            let pool = ctx.read_questions(&a.io.input)?;
            let verdicts: Vec<VerdictRow> = match &a.verdicts {
                Some(p) => ctx.read_jsonl(p)?,
                None => {
                    if ctx.cfg.curation.graders.is_empty() {
                        return Err(CliError::Usage("no graders configured".into()));
                    }
                    let backends = ctx
                        .cfg
                        .curation
                        .graders
                        .iter()
                        .map(|m| ctx.backend(m))
                        .collect::<Result<Vec<_>, _>>()?;
                    let refs: Vec<&dyn Backend> = backends.iter().map(|b| b.as_ref()).collect();
                    let opts = GradeOptions {
                        workers: ctx.cfg.run.workers,
                        max_new_tokens: ctx.cfg.curation.grade_max_tokens,
                        temperature: ctx.cfg.backend.temperature,
                        seed: ctx.cfg.backend.seed,
                        retry: ctx.retry(),
                        ..GradeOptions::default()
                    };
                    grade_pool(&pool, &refs, &opts)
                }
            };
            let (kept, row) = filter_by_verdicts(&pool, &verdicts);
            if let Some(p) = &a.verdicts_out {
                ctx.write_jsonl(p, &verdicts)?;
            }
            ctx.write_jsonl(&a.io.out, &kept)?;
            let collection = StageRow::from_sources(COLLECTION_STAGE, StageKind::Collection, sources(&pool));
            ctx.update_ledger(a.io.report.as_deref(), vec![collection, row])
        }
        Curate::Generate(a) => {
            let pool = ctx.read_questions(&a.input)?;
            let teacher = ctx.backend(&ctx.cfg.curation.teacher.clone())?;
            let opts = TraceOptions {
                workers: ctx.cfg.run.workers,
                max_new_tokens: ctx.cfg.curation.trace_max_tokens,
                temperature: ctx.cfg.backend.temperature,
                seed: ctx.cfg.backend.seed,
                retry: ctx.retry(),
                ..TraceOptions::default()
            };
            let traces = generate_traces(&pool, teacher.as_ref(), &opts);
            ctx.write_jsonl(&a.out, &traces)
        }
        Curate::Validate(a) => {
            let traces: Vec<TraceRecord> = ctx.read_jsonl(&a.input)?;
            let (kept, row) = validate_traces(&traces);
            ctx.write_jsonl(&a.out, &kept)?;
            ctx.update_ledger(a.report.as_deref(), vec![row])
        }
        Curate::Decontaminate(a) => {
            let pool = ctx.read_pool(&a.io.input)?;
            let mut sets = Vec::new();
            for p in &a.eval_sets {
                sets.push(ctx.read_questions(p)?);
            }
            let index = EvalIndex::from_sets(&sets, DecontamConfig { ngram: ctx.cfg.curation.ngram });
            let (clean, dropped) = remove_eval_overlap(&pool.questions, &index);
            log::info!("{} of {} items overlap evaluation sets", dropped.len(), pool.questions.len());
            ctx.write_pool(&a.io.out, &pool, &clean)?;
            let row = StageRow::from_sources(DECONTAM_STAGE, StageKind::Filter, sources(&clean));
            ctx.update_ledger(a.io.report.as_deref(), vec![row])
        }
        Curate::Dedup(a) => {
            let pool = ctx.read_pool(&a.input)?;
            let kept = deduplicate(&pool.questions);
            ctx.write_pool(&a.out, &pool, &kept)?;
            let row = StageRow::from_sources(DECONTAM_STAGE, StageKind::Filter, sources(&kept));
            ctx.update_ledger(a.report.as_deref(), vec![row])
        }
        Curate::Annotate(a) => {
            let pool = ctx.read_pool(&a.io.input)?;
            ctx.digest(&a.lexicon)?;
            let terms: BTreeMap<String, String> = serde_json::from_str(&io::read_to_string(&a.lexicon)?)
                .map_err(|e| op(format!("{}: {e}", a.lexicon.display())))?;
            let lexicon = Lexicon::new(&terms).map_err(op)?;
            let labelled = annotate_domains(&pool.questions, &lexicon);
            ctx.write_pool(&a.io.out, &pool, &labelled)
        }
        Curate::Sample(a) => {
            let pool = ctx.read_pool(&a.io.input)?;
            let plan = SamplingPlan::from_questions(&pool.questions, a.n, ctx.cfg.backend.seed);
            let out = diversity_sample(&plan).map_err(|e| CliError::Usage(e.to_string()))?;
            let by_id: BTreeMap<&str, &McqQuestion> =
                pool.questions.iter().map(|q| (q.id.as_str(), q)).collect();
            let picked: Vec<McqQuestion> = out.ids.iter().map(|id| by_id[id.as_str()].clone()).collect();
            ctx.write_pool(&a.io.out, &pool, &picked)?;
            ctx.update_ledger_with(
                a.io.report.as_deref(),
                vec![out.row],
                &[("sampler_rng", json!(RNG_ALGORITHM))],
            )
        }
        Curate::FormatSft(a) => {
            let traces: Vec<TraceRecord> = ctx.read_jsonl(&a.input)?;
            let examples = traces
                .iter()
                .map(format_sft_example)
                .collect::<Result<Vec<_>, _>>()
                .map_err(op)?;
            ctx.write_jsonl(&a.out, &examples)
        }
    }
}

fn eval_opts(ctx: &Ctx) -> EvalOptions {
    EvalOptions {
        workers: ctx.cfg.run.workers,
        retry: ctx.retry(),
        ..EvalOptions::default()
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_eval(ctx: &mut Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let policy = ctx.cfg.policy();
    let backend = ctx.backend(&ctx.cfg.backend.model.clone())?;
    let opts = eval_opts(ctx);
    let mut rows = Vec::new();
    for path in &a.datasets {
        let name = dataset_name(path);
        let qs = ctx.read_questions(path)?;
        let run = evaluate(&name, &qs, backend.as_ref(), &policy, &opts)?;
        ctx.write_jsonl(&a.out_dir.join(format!("{name}.results.jsonl")), &run.outcomes)?;
        ctx.write_jsonl(&a.out_dir.join(format!("{name}.transcripts.jsonl")), &run.transcripts)?;
        println!("{name}: {:.2}% ({}/{})", run.accuracy * 100.0, run.correct, run.n);
        rows.push(run);
    }
    let pct: Vec<f64> = rows.iter().map(|r| r.accuracy * 100.0).collect();
    let weighted: Vec<(f64, usize)> = rows.iter().map(|r| (r.accuracy * 100.0, r.n)).collect();
    let macro_avg = macro_average(&pct)?;
    println!("macro average: {macro_avg:.2}");
    let datasets: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "name": r.dataset,
                "n": r.n,
                "correct": r.correct,
                "accuracy": r.accuracy * 100.0,
                "mean_thinking_tokens": r.mean_thinking_tokens,
                "failures": r.failures,
            })
        })
        .collect();
    ctx.write_doc(
        &a.out_dir.join("summary.json"),
        json!({
            "datasets": datasets,
            "macro_average": macro_avg,
            "weighted_average": weighted_average(&weighted)?,
        }),
    )
}

/// Saved form of a sweep, read back by `plot`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepDoc {
    pub sweep: SweepResult,
    pub fit: Option<RegressionFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

#[derive(Serialize)]
struct PointRecord<'a> {
    x: usize,
    #[serde(flatten)]
    outcome: &'a EvalOutcome,
}

fn save_sweep(ctx: &Ctx, sweep: SweepResult, out_dir: &Path, stem: &str) -> Result<(), CliError> {
    let (fit, fit_error) = match fit_sweep(&sweep) {
        Ok(f) => (Some(f), None),
        Err(e) => {
            log::warn!("no regression fit: {e}");
            (None, Some(e.to_string()))
        }
    };
    let records: Vec<PointRecord> = sweep
        .points
        .iter()
        .zip(&sweep.runs)
        .flat_map(|(p, run)| run.outcomes.iter().map(move |o| PointRecord { x: p.x, outcome: o }))
        .collect();
    ctx.write_jsonl(&out_dir.join(format!("{stem}.results.jsonl")), &records)?;
    let csv = emit_plot(&sweep, fit.as_ref(), PlotFormat::Csv).map_err(op)?;
    ctx.write_with_sidecar(&out_dir.join(format!("{stem}.csv")), &csv)?;
    let svg = emit_plot(&sweep, fit.as_ref(), PlotFormat::Svg).map_err(op)?;
    ctx.write_with_sidecar(&out_dir.join(format!("{stem}.svg")), &svg)?;
    for p in &sweep.points {
        println!(
            "x={:<6} accuracy={:6.2}% mean_thinking_tokens={:.1}",
            p.x,
            p.accuracy * 100.0,
            p.mean_thinking_tokens
        );
    }
    let doc = SweepDoc { sweep, fit, fit_error };
    ctx.write_doc(
        &out_dir.join(format!("{stem}.json")),
        serde_json::to_value(&doc).expect("serializable"),
    )
}

fn cmd_sweep(ctx: &mut Ctx, a: &SweepArgs) -> Result<(), CliError> {
    let name = dataset_name(&a.dataset);
    let qs = ctx.read_questions(&a.dataset)?;
    let backend = ctx.backend(&ctx.cfg.backend.model.clone())?;
    let policy = ctx.cfg.policy();
    let opts = eval_opts(ctx);
    let sweep = if a.fast {
        budget_sweep_truncated(&name, &qs, backend.as_ref(), &a.budgets, &policy, &opts)?
    } else {
        budget_sweep(&name, &qs, backend.as_ref(), &a.budgets, &policy, &opts)?
    };
    save_sweep(ctx, sweep, &a.out_dir, "budget_sweep")
}

fn cmd_force_sweep(ctx: &mut Ctx, a: &ForceSweepArgs) -> Result<(), CliError> {
    let name = dataset_name(&a.dataset);
    let qs = ctx.read_questions(&a.dataset)?;
    let backend = ctx.backend(&ctx.cfg.backend.model.clone())?;
    let policy = ctx.cfg.policy();
    let opts = eval_opts(ctx);
    let sweep = forcing_sweep(&name, &qs, backend.as_ref(), a.max_forcings, &policy, &opts)?;
    save_sweep(ctx, sweep, &a.out_dir, "forcing_sweep")
}

fn cmd_plot(ctx: &mut Ctx, a: &PlotArgs) -> Result<(), CliError> {
    ctx.digest(&a.sweep)?;
    let text = io::read_to_string(&a.sweep)?;
    let doc: SweepDoc = serde_json::from_str(&text).map_err(|e| op(format!("{}: {e}", a.sweep.display())))?;
    let fit = if a.no_fit { None } else { doc.fit.as_ref() };
    let out = emit_plot(&doc.sweep, fit, a.format).map_err(op)?;
    ctx.write_with_sidecar(&a.out, &out)
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let text = io::read_to_string(&a.ledger)?;
    let report: CurationReport =
        serde_json::from_str(&text).map_err(|e| op(format!("{}: {e}", a.ledger.display())))?;
    if a.json {
        print!("{}", pretty(&report.stages));
    } else {
        print!("{}", report.render_table());
    }
    report.validate().map_err(|e| op(format!("{}: {e}", a.ledger.display())))
}
