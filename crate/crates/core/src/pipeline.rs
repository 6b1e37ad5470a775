//! The two-stage prompt chain.
//!
//! Stage one concatenates a course's responses and asks for a summary of at
//! most X tokens; stage two turns that summary, and only that summary, into
//! actionable feedback for the instructor. The feedback is then parsed and
//! run through the quality gates. Each course is an independent unit; a
//! failing course is recorded in the [`RunManifest`] and the run continues.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, GenerationRequest, DEFAULT_TEMPERATURE};
use crate::budget::{
    compute_summary_budget, concatenate_responses, estimate_tokens, BudgetError, ModelLimits,
    TokenBudget,
};
use crate::corpus::CourseBundle;
use crate::quality::{assess, effective_roster, Lexicons, QualityConfig};
use crate::structure::{parse_report, FeedbackReport};
use crate::text::sha256_hex;

pub const SUMMARISE_TEMPLATE: &str =
    "Summarise, to a maximum of {X} tokens this text that is based on course evaluations: {INPUT}";
pub const ACTIONABLE_TEMPLATE: &str = "You are now an actionable feedback bot. Give actionable feedback, based upon these summarised course evaluations, to the instructor of the course. Leave out names that could identify entities. Make sure that the feedback is factual, actionable, and appropriate to the instructor: {SUMMARISATION}";

/// Tokens held back from the stage-two output cap for estimator slack.
pub const FEEDBACK_SAFETY_MARGIN: usize = 16;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("missing binding for {{{0}}}")]
    MissingBinding(String),
    #[error("binding {0} has no placeholder in the template")]
    ExtraBinding(String),
    #[error("{stage:?} template must use exactly the placeholders {expected:?}, found {found:?}")]
    WrongPlaceholders {
        stage: Stage,
        expected: Vec<String>,
        found: Vec<String>,
    },
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("backend returned an empty summary")]
    EmptySummary,
    #[error("backend returned empty feedback")]
    EmptyFeedback,
    #[error("stage-two prompt leaves no room for output")]
    NoOutputRoom,
}

#[derive(Debug, Error)]
#[error("course {course_id}: {source}")]
pub struct CourseError {
    pub course_id: String,
    #[source]
    pub source: StageError,
}

impl CourseError {
    fn new(course_id: &str, source: impl Into<StageError>) -> Self {
        Self {
            course_id: course_id.to_string(),
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Summarise,
    Actionable,
}

impl Stage {
    fn placeholders(self) -> &'static [&'static str] {
        match self {
            Stage::Summarise => &["INPUT", "X"],
            Stage::Actionable => &["SUMMARISATION"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub stage: Stage,
    pub template: String,
}

/// `{NAME}` placeholders in order of appearance, as `(start, end, NAME)`.
fn placeholder_spans(template: &str) -> Vec<(usize, usize, &str)> {
    let mut spans = Vec::new();
    let bytes = template.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let name_len = bytes[i + 1..]
                .iter()
                .take_while(|b| b.is_ascii_uppercase() || **b == b'_')
                .count();
            let close = i + 1 + name_len;
            if name_len > 0 && bytes.get(close) == Some(&b'}') {
                spans.push((i, close + 1, &template[i + 1..close]));
                i = close + 1;
                continue;
            }
        }
        i += 1;
    }
    spans
}

impl PromptTemplate {
    pub fn summarise() -> Self {
        Self {
            stage: Stage::Summarise,
            template: SUMMARISE_TEMPLATE.to_string(),
        }
    }

    pub fn actionable() -> Self {
        Self {
            stage: Stage::Actionable,
            template: ACTIONABLE_TEMPLATE.to_string(),
        }
    }

    /// A custom template; it must use exactly the stage's placeholders.
    pub fn custom(stage: Stage, template: impl Into<String>) -> Result<Self, RenderError> {
        let t = Self {
            stage,
            template: template.into(),
        };
        let found: Vec<String> = t.placeholders().into_iter().collect();
        let expected: Vec<String> = stage.placeholders().iter().map(|s| s.to_string()).collect();
        if found != expected {
            return Err(RenderError::WrongPlaceholders {
                stage,
                expected,
                found,
            });
        }
        Ok(t)
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        placeholder_spans(&self.template)
            .into_iter()
            .map(|(_, _, name)| name.to_string())
            .collect()
    }
}

/// Substitutes every placeholder in one pass; bound values are inserted
/// verbatim and never rescanned.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String, RenderError> {
    let placeholders = template.placeholders();
    if let Some(missing) = placeholders.iter().find(|p| !bindings.contains_key(*p)) {
        return Err(RenderError::MissingBinding(missing.clone()));
    }
    if let Some(extra) = bindings.keys().find(|k| !placeholders.contains(*k)) {
        return Err(RenderError::ExtraBinding(extra.clone()));
    }
    let mut out = String::with_capacity(template.template.len());
    let mut cursor = 0;
    for (start, end, name) in placeholder_spans(&template.template) {
        out.push_str(&template.template[cursor..start]);
        out.push_str(&bindings[name]);
        cursor = end;
    }
    out.push_str(&template.template[cursor..]);
    Ok(out)
}

fn bind(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub summarise: PromptTemplate,
    pub actionable: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            summarise: PromptTemplate::summarise(),
            actionable: PromptTemplate::actionable(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            seed: None,
        }
    }
}

impl Sampling {
    fn request(&self, prompt: String, max_output_tokens: usize) -> GenerationRequest {
        GenerationRequest {
            prompt,
            max_output_tokens,
            temperature: self.temperature,
            seed: self.seed,
        }
    }
}

/// Stage-one output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryDraft {
    pub course_id: String,
    pub text: String,
    /// SHA-256 of the concatenated input the summary was made from.
    pub input_digest: String,
    pub budget: TokenBudget,
    pub backend_id: String,
}

pub fn summarise_course(
    bundle: &CourseBundle,
    limits: &ModelLimits,
    templates: &Templates,
    sampling: &Sampling,
    backend: &dyn Backend,
) -> Result<SummaryDraft, CourseError> {
    let course = bundle.course_id.as_str();
    let budget = compute_summary_budget(bundle, limits).map_err(|e| CourseError::new(course, e))?;
    let input = concatenate_responses(bundle, &budget);
    let prompt = render_prompt(
        &templates.summarise,
        &bind(&[
            ("X", budget.summary_budget_x.to_string()),
            ("INPUT", input.clone()),
        ]),
    )
    .map_err(|e| CourseError::new(course, e))?;
    let completion = backend
        .generate(&sampling.request(prompt, budget.summary_budget_x))
        .map_err(|e| CourseError::new(course, e))?;
    if completion.text.trim().is_empty() {
        return Err(CourseError::new(course, StageError::EmptySummary));
    }
    Ok(SummaryDraft {
        course_id: bundle.course_id.clone(),
        text: completion.text,
        input_digest: sha256_hex(&input),
        budget,
        backend_id: completion.backend_id,
    })
}

pub fn render_feedback_prompt(
    draft: &SummaryDraft,
    templates: &Templates,
) -> Result<String, RenderError> {
    render_prompt(
        &templates.actionable,
        &bind(&[("SUMMARISATION", draft.text.clone())]),
    )
}

/// Stage two. Sees only the summary text, never the raw responses.
pub fn generate_feedback(
    draft: &SummaryDraft,
    limits: &ModelLimits,
    templates: &Templates,
    sampling: &Sampling,
    backend: &dyn Backend,
) -> Result<String, CourseError> {
    let course = draft.course_id.as_str();
    let prompt =
        render_feedback_prompt(draft, templates).map_err(|e| CourseError::new(course, e))?;
    let max_output = limits
        .context_tokens
        .checked_sub(estimate_tokens(&prompt) + FEEDBACK_SAFETY_MARGIN)
        .filter(|&n| n > 0)
        .ok_or_else(|| CourseError::new(course, StageError::NoOutputRoom))?;
    let completion = backend
        .generate(&sampling.request(prompt, max_output))
        .map_err(|e| CourseError::new(course, e))?;
    if completion.text.trim().is_empty() {
        return Err(CourseError::new(course, StageError::EmptyFeedback));
    }
    Ok(completion.text)
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub run_id: String,
    pub limits: ModelLimits,
    pub templates: Templates,
    pub sampling: Sampling,
    pub quality: QualityConfig,
    pub lexicons: Lexicons,
    pub max_in_flight: usize,
    /// Recorded verbatim in the manifest.
    pub snapshot: BTreeMap<String, String>,
}

impl PipelineConfig {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            limits: ModelLimits::default(),
            templates: Templates::default(),
            sampling: Sampling::default(),
            quality: QualityConfig::default(),
            lexicons: Lexicons::default(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            snapshot: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeStatus {
    Ok,
    Skipped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseOutcome {
    pub course_id: String,
    pub status: OutcomeStatus,
    pub message: Option<String>,
    pub response_count: usize,
    pub dropped_responses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: BTreeMap<String, String>,
    pub outcomes: Vec<CourseOutcome>,
}

impl RunManifest {
    pub fn count(&self, status: OutcomeStatus) -> usize {
        self.outcomes.iter().filter(|o| o.status == status).count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<FeedbackReport>,
    pub summaries: Vec<SummaryDraft>,
    pub manifest: RunManifest,
}

type CourseResult = Result<(SummaryDraft, FeedbackReport), CourseError>;

fn run_course(
    bundle: &CourseBundle,
    config: &PipelineConfig,
    backend: &dyn Backend,
) -> CourseResult {
    let draft = summarise_course(
        bundle,
        &config.limits,
        &config.templates,
        &config.sampling,
        backend,
    )?;
    let raw = generate_feedback(
        &draft,
        &config.limits,
        &config.templates,
        &config.sampling,
        backend,
    )?;
    let parsed = parse_report(&raw, &bundle.course_id);
    let report = assess(
        &parsed,
        bundle,
        &effective_roster(bundle),
        &config.quality,
        &config.lexicons,
    );
    Ok((draft, report))
}

/// Runs every course, at most `max_in_flight` at a time. Results come back
/// in bundle order whatever order they complete in.
pub fn run_pipeline(
    bundles: &[CourseBundle],
    config: &PipelineConfig,
    backend: &dyn Backend,
) -> RunOutput {
    let results: Mutex<Vec<Option<CourseResult>>> =
        Mutex::new((0..bundles.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = config.max_in_flight.max(1).min(bundles.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(bundle) = bundles.get(i) else { break };
                let result = run_course(bundle, config, backend);
                results.lock().expect("results lock")[i] = Some(result);
            });
        }
    });

    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let mut outcomes = Vec::new();
    for (bundle, result) in bundles
        .iter()
        .zip(results.into_inner().expect("results lock"))
    {
        let mut outcome = CourseOutcome {
            course_id: bundle.course_id.clone(),
            status: OutcomeStatus::Ok,
            message: None,
            response_count: bundle.len(),
            dropped_responses: 0,
        };
        match result.expect("every course processed") {
            Ok((draft, report)) => {
                outcome.dropped_responses = draft.budget.dropped_response_count;
                if outcome.dropped_responses > 0 {
                    outcome.message = Some(format!(
                        "dropped {} trailing response(s) to fit the context window",
                        outcome.dropped_responses
                    ));
                }
                summaries.push(draft);
                reports.push(report);
            }
            Err(e) => {
                log::warn!("{e}");
                outcome.status = OutcomeStatus::Error;
                outcome.message = Some(e.source.to_string());
            }
        }
        outcomes.push(outcome);
    }
    RunOutput {
        reports,
        summaries,
        manifest: RunManifest {
            run_id: config.run_id.clone(),
            config: config.snapshot.clone(),
            outcomes,
        },
    }
}

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

/// File stem for a course id: `[A-Za-z0-9._-]` kept, other bytes `%XX`.
pub fn course_file_stem(course_id: &str) -> String {
    let mut out = String::with_capacity(course_id.len());
    for b in course_id.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_') || (b == b'.' && !out.is_empty()) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

pub fn is_valid_run_id(run_id: &str) -> bool {
    !run_id.is_empty()
        && !run_id.starts_with('.')
        && run_id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

pub fn report_id(run_id: &str, course_id: &str) -> String {
    format!("{run_id}:{course_id}")
}

/// Splits a report id at its first `:` into `(run_id, course_id)`.
pub fn split_report_id(report_id: &str) -> Option<(&str, &str)> {
    report_id
        .split_once(':')
        .filter(|(r, c)| is_valid_run_id(r) && !c.is_empty())
}

pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(out_dir: &Path, run_id: &str) -> Self {
        Self {
            root: out_dir.join(run_id),
        }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn report(&self, course_id: &str) -> PathBuf {
        self.root
            .join("reports")
            .join(format!("{}.json", course_file_stem(course_id)))
    }

    pub fn summary(&self, course_id: &str) -> PathBuf {
        self.root
            .join("summaries")
            .join(format!("{}.txt", course_file_stem(course_id)))
    }

    pub fn source(&self, course_id: &str) -> PathBuf {
        self.root
            .join("sources")
            .join(format!("{}.json", course_file_stem(course_id)))
    }

    pub fn ratings(&self) -> PathBuf {
        self.root.join("ratings.jsonl")
    }
}

pub fn report_json(report: &FeedbackReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(paths: &RunPaths, report: &FeedbackReport) -> std::io::Result<()> {
    fs::write(paths.report(&report.course_id), report_json(report))
}

/// Writes `<run_id>/{reports,summaries,sources}/` and `manifest.json` under
/// `out_dir`. Fails if the run directory already exists.
///
/// Each source file holds the course's responses with the effective
/// redaction roster, so the run can be re-assessed and reviewed later.
pub fn write_run(
    out_dir: &Path,
    output: &RunOutput,
    bundles: &[CourseBundle],
) -> std::io::Result<PathBuf> {
    let paths = RunPaths::new(out_dir, &output.manifest.run_id);
    if paths.root.exists() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("run directory {} already exists", paths.root.display()),
        ));
    }
    fs::create_dir_all(paths.root.join("reports"))?;
    fs::create_dir_all(paths.root.join("summaries"))?;
    fs::create_dir_all(paths.root.join("sources"))?;
    for bundle in bundles {
        let mut stored = bundle.clone();
        stored.roster = effective_roster(bundle);
        let mut json = serde_json::to_string_pretty(&stored).expect("bundle serializes");
        json.push('\n');
        fs::write(paths.source(&bundle.course_id), json)?;
    }
    for report in &output.reports {
        write_report(&paths, report)?;
    }
    for draft in &output.summaries {
        fs::write(paths.summary(&draft.course_id), &draft.text)?;
    }
    let mut manifest = serde_json::to_string_pretty(&output.manifest).expect("manifest serializes");
    manifest.push('\n');
    fs::write(paths.manifest(), manifest)?;
    Ok(paths.root)
}

#[derive(Debug, Error)]
pub enum RunLoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RunLoadError> {
    let text = fs::read_to_string(path).map_err(|source| RunLoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| RunLoadError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub reports: Vec<FeedbackReport>,
}

pub fn load_run(run_dir: &Path) -> Result<LoadedRun, RunLoadError> {
    let manifest: RunManifest = read_json(&run_dir.join("manifest.json"))?;
    let paths = RunPaths {
        root: run_dir.to_path_buf(),
    };
    let reports = manifest
        .outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Ok)
        .map(|o| read_json(&paths.report(&o.course_id)))
        .collect::<Result<_, _>>()?;
    Ok(LoadedRun { manifest, reports })
}

pub fn load_source(run_dir: &Path, course_id: &str) -> Result<CourseBundle, RunLoadError> {
    let paths = RunPaths {
        root: run_dir.to_path_buf(),
    };
    read_json(&paths.source(course_id))
}

/// Run directories (those holding a manifest) under `out_dir`, sorted by id.
pub fn list_runs(out_dir: &Path) -> std::io::Result<Vec<String>> {
    let mut runs = Vec::new();
    for entry in fs::read_dir(out_dir)? {
        let entry = entry?;
        if entry.path().join("manifest.json").is_file() {
            if let Some(name) = entry.file_name().to_str() {
                runs.push(name.to_string());
            }
        }
    }
    runs.sort();
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{EchoBackend, MockBackend, MockScript};
    use crate::quality::FlagKind;

    #[test]
    fn golden_summarise_prompt() {
        let out = render_prompt(
            &PromptTemplate::summarise(),
            &bind(&[("X", "300".into()), ("INPUT", "foo".into())]),
        )
        .unwrap();
        assert_eq!(
            out,
            "Summarise, to a maximum of 300 tokens this text that is based on course evaluations: foo"
        );
    }

    #[test]
    fn golden_actionable_prompt() {
        let out = render_prompt(
            &PromptTemplate::actionable(),
            &bind(&[("SUMMARISATION", "s".into())]),
        )
        .unwrap();
        assert_eq!(
            out,
            "You are now an actionable feedback bot. Give actionable feedback, based upon these \
             summarised course evaluations, to the instructor of the course. Leave out names that \
             could identify entities. Make sure that the feedback is factual, actionable, and \
             appropriate to the instructor: s"
        );
    }

    #[test]
    fn binding_errors() {
        let t = PromptTemplate::summarise();
        assert_eq!(
            render_prompt(&t, &bind(&[("X", "1".into())])),
            Err(RenderError::MissingBinding("INPUT".into()))
        );
        assert_eq!(
            render_prompt(
                &t,
                &bind(&[("X", "1".into()), ("INPUT", "a".into()), ("Y", "b".into())])
            ),
            Err(RenderError::ExtraBinding("Y".into()))
        );
    }

    #[test]
    fn values_are_not_rescanned() {
        let out = render_prompt(
            &PromptTemplate::summarise(),
            &bind(&[("X", "{INPUT}".into()), ("INPUT", "{X} and {Z}".into())]),
        )
        .unwrap();
        assert!(out.contains("maximum of {INPUT} tokens"));
        assert!(out.ends_with(": {X} and {Z}"));
    }

    #[test]
    fn custom_template_placeholder_check() {
        assert!(PromptTemplate::custom(Stage::Summarise, "Sum {INPUT} in {X}").is_ok());
        assert!(PromptTemplate::custom(Stage::Summarise, "Sum {INPUT}").is_err());
        assert!(PromptTemplate::custom(Stage::Actionable, "Advise: {SUMMARISATION} {X}").is_err());
    }

    #[test]
    fn summarise_with_fixture() {
        let bundle = CourseBundle::from_texts("C1", &["Good labs.", "Too much reading."]);
        let limits = ModelLimits::default();
        let budget = compute_summary_budget(&bundle, &limits).unwrap();
        let prompt = render_prompt(
            &PromptTemplate::summarise(),
            &bind(&[
                ("X", budget.summary_budget_x.to_string()),
                ("INPUT", concatenate_responses(&bundle, &budget)),
            ]),
        )
        .unwrap();
        let mut script = MockScript::default();
        script.insert_prompt(&prompt, "Summary S");
        let backend = MockBackend::new(script, limits.context_tokens);
        let draft = summarise_course(
            &bundle,
            &limits,
            &Templates::default(),
            &Sampling::default(),
            &backend,
        )
        .unwrap();
        assert_eq!(draft.text, "Summary S");
        assert_eq!(
            draft.input_digest,
            sha256_hex("Good labs.\n---\nToo much reading.")
        );
        assert_eq!(draft.budget.summary_budget_x, 128);
    }

    #[test]
    fn summarise_with_echo_fallback() {
        let bundle = CourseBundle::from_texts(
            "C1",
            &[
                "Lectures were clear. Slides too.",
                "Workload was heavy! Especially week 5.",
                "Exam fair",
            ],
        );
        let limits = ModelLimits::default();
        let backend = EchoBackend::new(limits.context_tokens);
        let draft = summarise_course(
            &bundle,
            &limits,
            &Templates::default(),
            &Sampling::default(),
            &backend,
        )
        .unwrap();
        assert_eq!(
            draft.text,
            "Lectures were clear. Workload was heavy! Exam fair"
        );
        assert!(estimate_tokens(&draft.text) <= draft.budget.summary_budget_x);
    }

    #[test]
    fn stage_two_receives_only_summary() {
        let draft = SummaryDraft {
            course_id: "C".into(),
            text: "The summary.".into(),
            input_digest: String::new(),
            budget: TokenBudget {
                summary_budget_x: 128,
                input_token_estimate: 3,
                dropped_response_count: 0,
            },
            backend_id: "echo".into(),
        };
        let prompt = render_feedback_prompt(&draft, &Templates::default()).unwrap();
        assert_eq!(
            prompt,
            ACTIONABLE_TEMPLATE.replace("{SUMMARISATION}", "The summary.")
        );
        let mut script = MockScript::default();
        script.insert_prompt(&prompt, "1. Do this.\n2. Do that.");
        let backend = MockBackend::new(script, 4096);
        let raw = generate_feedback(
            &draft,
            &ModelLimits::default(),
            &Templates::default(),
            &Sampling::default(),
            &backend,
        )
        .unwrap();
        assert_eq!(raw, "1. Do this.\n2. Do that.");
    }

    #[test]
    fn failing_course_is_isolated() {
        let bundles = vec![
            CourseBundle::from_texts("OK1", &["Fine course."]),
            CourseBundle::from_texts("BIG", &["x".repeat(20000)]),
            CourseBundle::from_texts("OK2", &["Another one."]),
        ];
        let config = PipelineConfig::new("r1");
        let backend = EchoBackend::new(config.limits.context_tokens);
        let out = run_pipeline(&bundles, &config, &backend);
        assert_eq!(out.reports.len(), 2);
        assert_eq!(out.manifest.outcomes.len(), 3);
        assert_eq!(out.manifest.outcomes[1].status, OutcomeStatus::Error);
        assert!(out.manifest.outcomes[1]
            .message
            .as_deref()
            .unwrap()
            .contains("tokens"));
        assert_eq!(out.reports[0].course_id, "OK1");
        assert_eq!(out.reports[1].course_id, "OK2");
        assert!(out.reports[0]
            .quality
            .as_ref()
            .unwrap()
            .has_flag(FlagKind::SparseInput));
    }

    #[test]
    fn truncation_noted_in_manifest() {
        let texts: Vec<String> = (0..8).map(|_| "y".repeat(3995)).collect();
        let bundles = vec![CourseBundle::from_texts("T", &texts)];
        let mut config = PipelineConfig::new("r");
        config.limits = ModelLimits::new(4096, 60).unwrap();
        let out = run_pipeline(&bundles, &config, &EchoBackend::new(4096));
        assert!(out.summaries[0].budget.dropped_response_count > 0);
        assert_eq!(out.manifest.outcomes[0].dropped_responses, 5);
        assert!(out.manifest.outcomes[0]
            .message
            .as_deref()
            .unwrap()
            .contains("dropped 5"));
    }

    #[test]
    fn file_stems() {
        assert_eq!(course_file_stem("CS101"), "CS101");
        assert_eq!(course_file_stem("a/b c"), "a%2Fb%20c");
        assert_eq!(course_file_stem(".."), "%2E.");
        assert!(is_valid_run_id("20261016T120000Z-abc12345"));
        assert!(!is_valid_run_id("../x"));
        assert_eq!(split_report_id("run1:C:1"), Some(("run1", "C:1")));
        assert_eq!(split_report_id("nocolon"), None);
    }

    #[test]
    fn run_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = CourseBundle::from_texts("C 1", &["Slides were late.", "Exam was fair."]);
        bundle.responses[0].respondent_name = Some("Ida Holm".into());
        bundle.roster.insert("Anna Hansen".into());
        let bundles = vec![
            bundle,
            CourseBundle::from_texts("BIG", &["x".repeat(20000)]),
        ];
        let config = PipelineConfig::new("r1");
        let out = run_pipeline(&bundles, &config, &EchoBackend::new(4096));
        let root = write_run(dir.path(), &out, &bundles).unwrap();
        assert!(root.join("reports/C%201.json").is_file());
        assert!(root.join("summaries/C%201.txt").is_file());
        assert!(write_run(dir.path(), &out, &bundles).is_err());

        let loaded = load_run(&root).unwrap();
        assert_eq!(loaded.manifest, out.manifest);
        assert_eq!(loaded.reports, out.reports);
        let source = load_source(&root, "C 1").unwrap();
        assert_eq!(source.responses[0].text, "Slides were late.");
        assert_eq!(source.responses[0].respondent_name, None);
        assert!(source.roster.contains("Ida Holm") && source.roster.contains("Anna Hansen"));
        assert_eq!(list_runs(dir.path()).unwrap(), vec!["r1".to_string()]);
    }
}
