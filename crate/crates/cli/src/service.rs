//! JSON review API over a directory of runs.
//!
//! | Route | Purpose |
//! |-------|---------|
//! | `GET /api/runs` | run ids with course and report counts |
//! | `GET /api/runs/{run}/reports` | report list with scores and flag kinds |
//! | `GET /api/reports/{id}` | report, quality and scrubbed source responses (`?raw=true` if allowed) |
//! | `GET /api/reports/{id}/ratings` | effective ratings and full history |
//! | `POST /api/reports/{id}/ratings` | record a rating, 201 with the sequence number |
//! | `GET /api/agreement?dim=&run=` | agreement statistics |
//! | `GET /api/divergence?run=&min_range=` | divergence queue |
//!
//! Report ids are `<run_id>:<course_id>`. `run` defaults to the latest run.
//! Every JSON body carries `schema_version`.

use std::collections::{BTreeSet, HashMap};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use lectern::config::ServiceSettings;
use lectern::evalharness::{
    agreement_stats, divergence_queue, Dimension, RatingError, RatingInput, RatingStore,
    DEFAULT_MIN_RANGE,
};
use lectern::pipeline::{
    is_valid_run_id, list_runs, load_run, load_source, report_id, split_report_id, LoadedRun,
    OutcomeStatus, RunPaths,
};
use lectern::quality::scrub_names;
use lectern::FeedbackReport;
use serde_json::{json, Map, Value};

use crate::latest_run;

pub const SCHEMA_VERSION: u32 = 1;

const INDEX_HTML: &str = "<!doctype html>
<html><head><meta charset=\"utf-8\"><title>lectern</title></head>
<body>
<h1>lectern review API</h1>
<p>No review UI is installed. The JSON API is available:</p>
<ul>
<li><a href=\"/api/runs\">/api/runs</a></li>
<li>/api/runs/{run}/reports</li>
<li>/api/reports/{id}</li>
<li>/api/reports/{id}/ratings</li>
<li><a href=\"/api/agreement\">/api/agreement</a></li>
<li><a href=\"/api/divergence\">/api/divergence</a></li>
</ul>
</body></html>
";

pub struct ServiceState {
    out_dir: PathBuf,
    allow_raw: bool,
    ui_dir: Option<PathBuf>,
    stores: Mutex<HashMap<String, Arc<Mutex<RatingStore>>>>,
}

impl ServiceState {
    pub fn new(out_dir: PathBuf, settings: &ServiceSettings) -> Arc<Self> {
        Arc::new(Self {
            out_dir,
            allow_raw: settings.allow_raw,
            ui_dir: settings.ui_dir.clone(),
            stores: Mutex::new(HashMap::new()),
        })
    }

    fn run_root(&self, run_id: &str) -> PathBuf {
        RunPaths::new(&self.out_dir, run_id).root
    }

    fn load(&self, run_id: &str) -> Result<LoadedRun, ApiError> {
        if !is_valid_run_id(run_id) || !RunPaths::new(&self.out_dir, run_id).manifest().is_file() {
            return Err(ApiError::not_found(format!("no run `{run_id}`")));
        }
        load_run(&self.run_root(run_id)).map_err(ApiError::internal)
    }

    fn resolve(&self, requested: Option<&String>) -> Result<String, ApiError> {
        match requested {
            Some(id) => Ok(id.clone()),
            None => latest_run(&self.out_dir)
                .map_err(ApiError::internal)?
                .ok_or_else(|| ApiError::not_found("no runs available".into())),
        }
    }

    /// One store per run, opened on first use; all writes go through it.
    fn store(&self, run_id: &str) -> Result<Arc<Mutex<RatingStore>>, ApiError> {
        let mut stores = self.stores.lock().expect("store map lock");
        if let Some(s) = stores.get(run_id) {
            return Ok(s.clone());
        }
        let loaded = self.load(run_id)?;
        let known = loaded
            .reports
            .iter()
            .map(|r| report_id(run_id, &r.course_id));
        let store = RatingStore::open(&RunPaths::new(&self.out_dir, run_id).ratings())
            .map_err(ApiError::internal)?
            .with_known_reports(known);
        let store = Arc::new(Mutex::new(store));
        stores.insert(run_id.to_string(), store.clone());
        Ok(store)
    }

    fn report(&self, id: &str) -> Result<(String, FeedbackReport), ApiError> {
        let unknown = || ApiError::not_found(format!("no report `{id}`"));
        let (run_id, course_id) = split_report_id(id).ok_or_else(unknown)?;
        let loaded = self.load(run_id).map_err(|_| unknown())?;
        let report = loaded
            .reports
            .into_iter()
            .find(|r| r.course_id == course_id)
            .ok_or_else(unknown)?;
        Ok((run_id.to_string(), report))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<&'static str>,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message,
            field: None,
        }
    }

    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
            field: Some(field),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        log::error!("{e}");
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
            field: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(field) = self.field {
            body["field"] = json!(field);
        }
        reply(self.status, body)
    }
}

fn reply(status: StatusCode, body: Value) -> Response {
    let mut map = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("data".into(), other);
            m
        }
    };
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    (status, Json(Value::Object(map))).into_response()
}

fn ok(body: Value) -> Result<Response, ApiError> {
    Ok(reply(StatusCode::OK, body))
}

type Shared = State<Arc<ServiceState>>;
type Params = Query<HashMap<String, String>>;

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/runs", get(runs))
        .route("/api/runs/{run}/reports", get(run_reports))
        .route("/api/reports/{id}", get(report_detail))
        .route(
            "/api/reports/{id}/ratings",
            get(report_ratings).post(post_rating),
        )
        .route("/api/agreement", get(agreement))
        .route("/api/divergence", get(divergence))
        .method_not_allowed_fallback(method_not_allowed)
        .fallback(fallback)
        .with_state(state)
}

async fn index(State(state): Shared) -> Response {
    if let Some(page) = state
        .ui_dir
        .as_ref()
        .and_then(|d| static_file(d, "index.html"))
    {
        return page;
    }
    Html(INDEX_HTML).into_response()
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

fn static_file(ui_dir: &Path, relative: &str) -> Option<Response> {
    let rel = Path::new(relative);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    let path = ui_dir.join(rel);
    let bytes = std::fs::read(&path).ok()?;
    Some(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn fallback(State(state): Shared, uri: Uri) -> Response {
    let path = uri.path();
    if !path.starts_with("/api/") {
        if let Some(file) = state
            .ui_dir
            .as_ref()
            .and_then(|d| static_file(d, path.trim_start_matches('/')))
        {
            return file;
        }
    }
    ApiError::not_found(format!("no route for {path}")).into_response()
}

async fn method_not_allowed(uri: Uri) -> Response {
    reply(
        StatusCode::METHOD_NOT_ALLOWED,
        json!({ "error": format!("method not allowed on {}", uri.path()) }),
    )
}

async fn runs(State(state): Shared) -> Result<Response, ApiError> {
    let ids = list_runs(&state.out_dir).map_err(ApiError::internal)?;
    let mut out = Vec::new();
    for id in ids {
        match load_run(&state.run_root(&id)) {
            Ok(run) => out.push(json!({
                "run_id": id,
                "course_count": run.manifest.outcomes.len(),
                "report_count": run.manifest.count(OutcomeStatus::Ok),
                "error_count": run.manifest.count(OutcomeStatus::Error),
            })),
            Err(e) => log::warn!("skipping run {id}: {e}"),
        }
    }
    ok(json!({ "runs": out }))
}

fn flag_kinds(report: &FeedbackReport) -> Vec<Value> {
    let kinds: BTreeSet<_> = report
        .quality
        .iter()
        .flat_map(|q| q.flags.iter().map(|f| f.kind))
        .collect();
    kinds.into_iter().map(|k| json!(k)).collect()
}

async fn run_reports(
    State(state): Shared,
    UrlPath(run): UrlPath<String>,
) -> Result<Response, ApiError> {
    let loaded = state.load(&run)?;
    let reports: Vec<Value> = loaded
        .reports
        .iter()
        .map(|r| {
            json!({
                "report_id": report_id(&run, &r.course_id),
                "course_id": r.course_id,
                "format": r.format,
                "item_count": r.items.len(),
                "action_count": r.actions().count(),
                "factuality_score": r.quality.as_ref().map(|q| q.factuality_score),
                "actionability_score": r.quality.as_ref().map(|q| q.actionability_score),
                "flags": flag_kinds(r),
            })
        })
        .collect();
    ok(json!({ "run_id": run, "reports": reports, "outcomes": loaded.manifest.outcomes }))
}

fn flag_on(params: &HashMap<String, String>, key: &str) -> bool {
    params
        .get(key)
        .is_some_and(|v| matches!(v.as_str(), "true" | "1" | "yes"))
}

async fn report_detail(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let raw = flag_on(&params, "raw");
    if raw && !state.allow_raw {
        return Err(ApiError {
            status: StatusCode::FORBIDDEN,
            message: "raw sources are disabled on this server".into(),
            field: Some("raw"),
        });
    }
    let (run_id, report) = state.report(&id)?;
    let source =
        load_source(&state.run_root(&run_id), &report.course_id).map_err(ApiError::internal)?;
    let sources: Vec<Value> = source
        .responses
        .iter()
        .map(|r| {
            let text = if raw {
                r.text.clone()
            } else {
                scrub_names(&r.text, &source.roster).text
            };
            json!({ "response_id": r.response_id, "text": text, "language_hint": r.language_hint })
        })
        .collect();
    ok(json!({
        "report_id": id,
        "run_id": run_id,
        "course_id": report.course_id,
        "report": report,
        "sources": sources,
        "raw": raw,
    }))
}

async fn report_ratings(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let (run_id, _) = state.report(&id)?;
    let store = state.store(&run_id)?;
    let store = store.lock().expect("rating store lock");
    let effective: Vec<_> = store
        .effective()
        .into_values()
        .filter(|r| r.report_id == id)
        .collect();
    let history: Vec<_> = store
        .records()
        .iter()
        .filter(|r| r.report_id == id)
        .cloned()
        .collect();
    ok(json!({ "report_id": id, "effective": effective, "history": history }))
}

fn rating_input(report: &str, body: &[u8]) -> Result<RatingInput, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::invalid("body", format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ApiError::invalid("body", "expected a JSON object"))?;
    let rater = match obj.get("rater") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        _ => {
            return Err(ApiError::invalid(
                "rater",
                "rater must be a non-empty string",
            ))
        }
    };
    let dim = obj
        .get("dim")
        .and_then(Value::as_str)
        .and_then(Dimension::parse)
        .ok_or_else(|| {
            ApiError::invalid(
                "dim",
                "dim must be FACTUALITY, ACTIONABILITY or APPROPRIATENESS",
            )
        })?;
    let score = obj
        .get("score")
        .and_then(Value::as_i64)
        .filter(|s| (1..=5).contains(s))
        .ok_or_else(|| ApiError::invalid("score", "score must be an integer from 1 to 5"))?;
    let comment = match obj.get("comment") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(ApiError::invalid("comment", "comment must be a string")),
    };
    Ok(RatingInput {
        rater,
        report: report.to_string(),
        dim,
        score,
        comment,
    })
}

async fn post_rating(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let (run_id, _) = state.report(&id)?;
    let input = rating_input(&id, &body)?;
    let store = state.store(&run_id)?;
    let receipt = store
        .lock()
        .expect("rating store lock")
        .record(input)
        .map_err(|e| match e {
            RatingError::InvalidScore(_) => ApiError::invalid("score", e.to_string()),
            RatingError::EmptyRater => ApiError::invalid("rater", e.to_string()),
            RatingError::UnknownReport(_) => ApiError::not_found(e.to_string()),
            other => ApiError::internal(other),
        })?;
    Ok(reply(
        StatusCode::CREATED,
        json!({ "report_id": id, "sequence": receipt.sequence }),
    ))
}

async fn agreement(State(state): Shared, Query(params): Params) -> Result<Response, ApiError> {
    let dims = match params.get("dim").filter(|d| !d.is_empty()) {
        Some(d) => vec![Dimension::parse(d)
            .ok_or_else(|| ApiError::invalid("dim", format!("unknown dimension `{d}`")))?],
        None => Dimension::ALL.to_vec(),
    };
    let run_id = state.resolve(params.get("run"))?;
    let store = state.store(&run_id)?;
    let store = store.lock().expect("rating store lock");
    let results: Vec<Value> = dims
        .into_iter()
        .map(|dim| match agreement_stats(&store, dim) {
            Ok(stats) => json!({ "dimension": dim, "stats": stats, "error": null }),
            Err(e) => json!({ "dimension": dim, "stats": null, "error": e.to_string() }),
        })
        .collect();
    ok(json!({ "run_id": run_id, "agreement": results }))
}

async fn divergence(State(state): Shared, Query(params): Params) -> Result<Response, ApiError> {
    let min_range = match params.get("min_range") {
        Some(v) => v.parse::<u8>().map_err(|_| {
            ApiError::invalid("min_range", "min_range must be a non-negative integer")
        })?,
        None => DEFAULT_MIN_RANGE,
    };
    let run_id = state.resolve(params.get("run"))?;
    let store = state.store(&run_id)?;
    let entries = divergence_queue(&store.lock().expect("rating store lock"), min_range);
    ok(json!({ "run_id": run_id, "min_range": min_range, "entries": entries }))
}
