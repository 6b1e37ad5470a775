//! The `lectern` command line: corpus checks, pipeline runs, quality
//! re-assessment, rating import/export, agreement reports and the review
//! service.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

pub mod service;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use lectern::backend::{
    load_mock_script, Backend, EchoBackend, HttpBackend, HttpConfig, MockBackend,
};
use lectern::config::Settings;
use lectern::corpus::{corpus_stats, load_corpus, write_corpus, write_roster};
use lectern::evalharness::{
    agreement_stats, divergence_queue, Dimension, RatingError, RatingInput, RatingStore,
};
use lectern::pipeline::{
    is_valid_run_id, list_runs, load_run, load_source, report_id, run_pipeline, write_report,
    write_run, LoadedRun, OutcomeStatus, PipelineConfig, RunPaths, Sampling,
};
use lectern::quality::{assess, summary_line, Lexicons};
use lectern::structure::parse_report;
use lectern::synth::department_corpus;
use lectern::text::sha256_hex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lectern",
    version,
    about = "Actionable lecturer feedback from student course evaluations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and print its shape
    Ingest(IngestArgs),
    /// Summarise and advise for every course in a corpus
    Run(RunArgs),
    /// Re-run the quality gates over an existing run
    Assess(AssessArgs),
    /// Import ratings into a run's log, or export the log
    Rate(RateArgs),
    /// Print inter-rater agreement for a run
    Agreement(AgreementArgs),
    /// Print reports whose ratings diverge
    Diverge(DivergeArgs),
    /// Serve the review API for the runs in a directory
    Serve(ServeArgs),
    /// Write a deterministic synthetic department corpus
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub roster: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// OpenAI-compatible chat-completions endpoint from the config file
    Live,
    /// Replay completions from a fixture script
    Mock,
    /// Deterministic first-sentence summarizer, no model needed
    Echo,
}

impl BackendKind {
    fn as_str(self) -> &'static str {
        match self {
            BackendKind::Live => "live",
            BackendKind::Mock => "mock",
            BackendKind::Echo => "echo",
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub roster: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendKind::Echo)]
    pub backend: BackendKind,
    /// Fixture script for `--backend mock`
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Fail on prompts missing from the mock script instead of echoing
    #[arg(long, requires = "mock_script")]
    pub strict: bool,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults to a UTC timestamp plus a corpus digest prefix
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunSelection {
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Defaults to the most recent run
    #[arg(long)]
    pub run: Option<String>,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[command(flatten)]
    pub selection: RunSelection,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct RateTarget {
    /// JSON-lines file of {"rater","report","dim","score","comment"} objects
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Write the run's rating log to this path
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub selection: RunSelection,
    #[command(flatten)]
    pub target: RateTarget,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub selection: RunSelection,
    /// FACTUALITY, ACTIONABILITY or APPROPRIATENESS; all when omitted
    #[arg(long, value_parser = parse_dimension)]
    pub dim: Option<Dimension>,
}

#[derive(Debug, Args)]
pub struct DivergeArgs {
    #[command(flatten)]
    pub selection: RunSelection,
    #[arg(long, default_value_t = lectern::evalharness::DEFAULT_MIN_RANGE)]
    pub min_range: u8,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `service.port`
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub roster: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

fn parse_dimension(s: &str) -> Result<Dimension, String> {
    Dimension::parse(s).ok_or_else(|| format!("unknown dimension `{s}`"))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Run(a) => run(a),
        Command::Assess(a) => reassess(a),
        Command::Rate(a) => rate(a),
        Command::Agreement(a) => agreement(a),
        Command::Diverge(a) => diverge(a),
        Command::Serve(a) => serve(a),
        Command::Synth(a) => synth(a),
    }
}

pub fn load_settings(path: Option<&Path>) -> Result<Settings, CliError> {
    match path {
        Some(p) => Settings::load(p).map_err(runtime),
        None => Ok(Settings::default()),
    }
}

pub fn load_lexicons(settings: &Settings) -> Result<Lexicons, CliError> {
    match &settings.lexicon_dir {
        Some(dir) => Lexicons::load_dir(dir).map_err(runtime),
        None => Ok(Lexicons::default()),
    }
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let bundles = load_corpus(&args.corpus, args.roster.as_deref()).map_err(runtime)?;
    let stats = corpus_stats(&bundles).map_err(runtime)?;
    println!(
        "{} courses, {} responses, min {}, max {}",
        stats.course_count,
        stats.response_count,
        stats.min_responses_per_course,
        stats.max_responses_per_course
    );
    Ok(())
}

fn build_backend(args: &RunArgs, settings: &Settings) -> Result<Box<dyn Backend>, CliError> {
    let context = settings.limits.context_tokens;
    match args.backend {
        BackendKind::Echo => Ok(Box::new(EchoBackend::with_templates(
            context,
            &[
                &settings.templates.summarise.template,
                &settings.templates.actionable.template,
            ],
        ))),
        BackendKind::Mock => {
            let path = args
                .mock_script
                .as_ref()
                .ok_or_else(|| CliError::Usage("--backend mock requires --mock-script".into()))?;
            let mut script = load_mock_script(path).map_err(runtime)?;
            script.strict = args.strict;
            Ok(Box::new(MockBackend::new(script, context)))
        }
        BackendKind::Live => {
            let url = settings.backend.url.clone().ok_or_else(|| {
                CliError::Runtime("the live backend needs `backend.url` in the config file".into())
            })?;
            let mut config = HttpConfig::new(url, settings.backend.model.clone(), context);
            config.timeout = settings.backend.timeout;
            if let Some(var) = &settings.backend.api_key_env {
                config = config.with_api_key_env(var).map_err(runtime)?;
            }
            Ok(Box::new(HttpBackend::new(config).map_err(runtime)?))
        }
    }
}

pub fn default_run_id(corpus_text: &str) -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    format!("{stamp}-{}", &sha256_hex(corpus_text)[..8])
}

fn run(args: RunArgs) -> Result<(), CliError> {
    if args.mock_script.is_some() && args.backend != BackendKind::Mock {
        return Err(CliError::Usage(
            "--mock-script only applies to --backend mock".into(),
        ));
    }
    let settings = load_settings(args.config.as_deref())?;
    let bundles = load_corpus(&args.corpus, args.roster.as_deref()).map_err(runtime)?;
    let corpus_text = fs::read_to_string(&args.corpus)
        .map_err(|e| runtime(format!("{}: {e}", args.corpus.display())))?;
    let run_id = match args.run_id.clone() {
        Some(id) if is_valid_run_id(&id) => id,
        Some(id) => {
            return Err(CliError::Usage(format!(
                "invalid run id `{id}`: use letters, digits, '.', '-', '_'"
            )))
        }
        None => default_run_id(&corpus_text),
    };
    if RunPaths::new(&args.out, &run_id).root.exists() {
        return Err(CliError::Runtime(format!(
            "run `{run_id}` already exists in {}",
            args.out.display()
        )));
    }
    let backend = build_backend(&args, &settings)?;

    let mut config = PipelineConfig::new(run_id.clone());
    config.limits = settings.limits;
    config.templates = settings.templates.clone();
    config.sampling = Sampling {
        temperature: settings.backend.temperature,
        seed: settings.backend.seed,
    };
    config.quality = settings.quality;
    config.lexicons = load_lexicons(&settings)?;
    config.max_in_flight = settings.backend.max_in_flight;
    config.snapshot = settings.snapshot();
    config
        .snapshot
        .insert("backend".into(), args.backend.as_str().into());
    config
        .snapshot
        .insert("corpus.sha256".into(), sha256_hex(&corpus_text));

    let output = run_pipeline(&bundles, &config, backend.as_ref());
    let root = write_run(&args.out, &output, &bundles).map_err(runtime)?;
    for report in &output.reports {
        println!("{}", summary_line(report));
    }
    for outcome in output
        .manifest
        .outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Error)
    {
        eprintln!(
            "warning: {}: {}",
            outcome.course_id,
            outcome.message.as_deref().unwrap_or("failed")
        );
    }
    let errors = output.manifest.count(OutcomeStatus::Error);
    println!(
        "run {run_id}: {} reports, {errors} errors, written to {}",
        output.reports.len(),
        root.display()
    );
    if output.reports.is_empty() {
        return Err(CliError::Runtime("no course produced a report".into()));
    }
    Ok(())
}

/// The most recently written run in `out_dir`, by manifest modification
/// time with the run id as tie-break.
pub fn latest_run(out_dir: &Path) -> std::io::Result<Option<String>> {
    let mut best: Option<(std::time::SystemTime, String)> = None;
    for id in list_runs(out_dir)? {
        let modified = fs::metadata(RunPaths::new(out_dir, &id).manifest())?.modified()?;
        if best.as_ref().is_none_or(|(t, b)| (modified, &id) > (*t, b)) {
            best = Some((modified, id));
        }
    }
    Ok(best.map(|b| b.1))
}

/// Resolves `requested` (or the latest run) to an existing run directory.
pub fn resolve_run(out_dir: &Path, requested: Option<&str>) -> Result<(String, PathBuf), CliError> {
    let id = match requested {
        Some(id) => {
            if !is_valid_run_id(id) {
                return Err(CliError::Usage(format!("invalid run id `{id}`")));
            }
            id.to_string()
        }
        None => latest_run(out_dir)
            .map_err(|e| runtime(format!("{}: {e}", out_dir.display())))?
            .ok_or_else(|| CliError::Runtime(format!("no runs found in {}", out_dir.display())))?,
    };
    let paths = RunPaths::new(out_dir, &id);
    if !paths.manifest().is_file() {
        return Err(CliError::Runtime(format!(
            "no run `{id}` in {}",
            out_dir.display()
        )));
    }
    Ok((id, paths.root))
}

fn open_run(selection: &RunSelection) -> Result<(String, PathBuf, LoadedRun), CliError> {
    let (id, root) = resolve_run(&selection.out, selection.run.as_deref())?;
    let loaded = load_run(&root).map_err(runtime)?;
    Ok((id, root, loaded))
}

/// The rating store of a run, restricted to the run's report ids.
pub fn open_store(
    run_id: &str,
    root: &Path,
    loaded: &LoadedRun,
) -> Result<RatingStore, RatingError> {
    let known = loaded
        .reports
        .iter()
        .map(|r| report_id(run_id, &r.course_id));
    Ok(RatingStore::open(
        &RunPaths {
            root: root.to_path_buf(),
        }
        .ratings(),
    )?
    .with_known_reports(known))
}

fn reassess(args: AssessArgs) -> Result<(), CliError> {
    let settings = load_settings(args.config.as_deref())?;
    let lexicons = load_lexicons(&settings)?;
    let (_, root, loaded) = open_run(&args.selection)?;
    let paths = RunPaths { root: root.clone() };
    for report in &loaded.reports {
        let source = load_source(&root, &report.course_id).map_err(runtime)?;
        let reparsed = parse_report(&report.raw_text, &report.course_id);
        let assessed = assess(
            &reparsed,
            &source,
            &source.roster,
            &settings.quality,
            &lexicons,
        );
        write_report(&paths, &assessed).map_err(runtime)?;
        println!("{}", summary_line(&assessed));
    }
    Ok(())
}

fn rate(args: RateArgs) -> Result<(), CliError> {
    let (run_id, root, loaded) = open_run(&args.selection)?;
    let mut store = open_store(&run_id, &root, &loaded).map_err(runtime)?;
    if let Some(path) = &args.target.export {
        let n = store.export(path).map_err(runtime)?;
        println!("exported {n} ratings to {}", path.display());
        return Ok(());
    }
    let path = args.target.file.as_ref().expect("clap enforces one target");
    let text = fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let mut inputs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let input: RatingInput = serde_json::from_str(line)
            .map_err(|e| runtime(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if !(1..=5).contains(&input.score) {
            return Err(runtime(format!(
                "{} line {}: {}",
                path.display(),
                i + 1,
                RatingError::InvalidScore(input.score)
            )));
        }
        if !store.knows_report(&input.report) {
            return Err(runtime(format!(
                "{} line {}: {}",
                path.display(),
                i + 1,
                RatingError::UnknownReport(input.report)
            )));
        }
        inputs.push(input);
    }
    let n = inputs.len();
    for input in inputs {
        store.record(input).map_err(runtime)?;
    }
    println!("imported {n} ratings into run {run_id}");
    Ok(())
}

fn agreement(args: AgreementArgs) -> Result<(), CliError> {
    let (run_id, root, loaded) = open_run(&args.selection)?;
    let store = open_store(&run_id, &root, &loaded).map_err(runtime)?;
    let dims = args
        .dim
        .map_or_else(|| Dimension::ALL.to_vec(), |d| vec![d]);
    for dim in dims {
        match agreement_stats(&store, dim) {
            Ok(s) => println!(
                "{}: reports {}, raters {}, exact agreement {:.3}, mean abs diff {:.3}, alpha {:.3}",
                dim.as_str(),
                s.n_reports,
                s.n_raters,
                s.exact_agreement_rate,
                s.mean_abs_diff,
                s.krippendorff_alpha_ordinal
            ),
            Err(e) if args.dim.is_some() => return Err(runtime(e)),
            Err(_) => println!("{}: insufficient raters", dim.as_str()),
        }
    }
    Ok(())
}

fn diverge(args: DivergeArgs) -> Result<(), CliError> {
    let (run_id, root, loaded) = open_run(&args.selection)?;
    let store = open_store(&run_id, &root, &loaded).map_err(runtime)?;
    let queue = divergence_queue(&store, args.min_range);
    if queue.is_empty() {
        println!("no divergent ratings");
    }
    for entry in queue {
        let scores: Vec<String> = entry
            .scores
            .iter()
            .map(|(r, s)| format!("{r}={s}"))
            .collect();
        println!(
            "{} {} range {}: {}",
            entry.report_id,
            entry.dimension.as_str(),
            entry.range,
            scores.join(" ")
        );
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let settings = load_settings(args.config.as_deref())?;
    let runs = list_runs(&args.out).map_err(|e| runtime(format!("{}: {e}", args.out.display())))?;
    if runs.is_empty() {
        return Err(CliError::Runtime(format!(
            "no runs found in {}",
            args.out.display()
        )));
    }
    let port = args.port.unwrap_or(settings.service.port);
    let state = service::ServiceState::new(args.out.clone(), &settings.service);
    let runtime_handle = tokio::runtime::Runtime::new().map_err(runtime)?;
    runtime_handle.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.bind.as_str(), port))
            .await
            .map_err(|e| runtime(format!("cannot listen on {}:{port}: {e}", args.bind)))?;
        let addr = listener.local_addr().map_err(runtime)?;
        println!(
            "serving {} run(s) from {} on http://{addr}",
            runs.len(),
            args.out.display()
        );
        axum::serve(listener, service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let bundles = department_corpus(args.seed);
    write_corpus(&args.corpus, &bundles)
        .map_err(|e| runtime(format!("{}: {e}", args.corpus.display())))?;
    if let Some(roster) = &args.roster {
        write_roster(roster, &bundles)
            .map_err(|e| runtime(format!("{}: {e}", roster.display())))?;
    }
    let stats = corpus_stats(&bundles).map_err(runtime)?;
    println!(
        "{} courses, {} responses, min {}, max {}",
        stats.course_count,
        stats.response_count,
        stats.min_responses_per_course,
        stats.max_responses_per_course
    );
    Ok(())
}
