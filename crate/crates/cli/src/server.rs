//! JSON API under `/api/v1`. Request and response bodies are documented in
//! `docs/api.md`.
//!
//! The store sits behind one read-write lock: reads run concurrently and
//! every mutation takes the write side, so the store's single-writer rule
//! holds. Re-judging runs as a background job; a second request while one is
//! running gets `409 busy`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;
use tower_http::services::ServeDir;

use lingeval_core::report::{render, TableKind};
use lingeval_core::store::{ManualResolution, ReJudgeReport, RulePreview, WarningFilter};
use lingeval_core::{ErrorClass, Format, ProgressSummary, Rule, SignificanceConfig, Store, Verdict};

use crate::config::Config;
use crate::error::{AppError, AppResult};
use crate::ops::{self, PairSpec, ReportRequest};

pub const TOKEN_ENV: &str = "LINGEVAL_TOKEN";

pub struct AppState {
    store: Arc<RwLock<Store>>,
    token: Option<String>,
    significance: SignificanceConfig,
    default_annotator: Option<String>,
    job: Mutex<JobStatus>,
}

impl AppState {
    pub fn new(store: Store, config: &Config, token: Option<String>) -> Arc<AppState> {
        Arc::new(AppState {
            store: Arc::new(RwLock::new(store)),
            token: token.filter(|t| !t.is_empty()),
            significance: config.significance,
            default_annotator: config.annotator.clone(),
            job: Mutex::new(JobStatus::default()),
        })
    }

    pub fn store(&self) -> &Arc<RwLock<Store>> {
        &self.store
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    #[default]
    Idle,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JobStatus {
    /// Increments with every accepted re-judge request.
    pub job: u64,
    pub state: JobState,
    /// Runs covered by the job.
    pub runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ReJudgeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progress: Option<ProgressSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        use lingeval_core::Error as E;
        let status = match &e {
            AppError::Core(E::NotAWarning { .. }) => StatusCode::CONFLICT,
            AppError::Core(E::UnknownItem(_) | E::UnknownRun(_)) => StatusCode::NOT_FOUND,
            _ => match e.class() {
                ErrorClass::Input => StatusCode::BAD_REQUEST,
                ErrorClass::Precondition => StatusCode::CONFLICT,
                ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
            },
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<lingeval_core::Error> for ApiError {
    fn from(e: lingeval_core::Error) -> Self {
        AppError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("request body: {e}"),
        )
    })
}

fn authorize(app: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let Some(token) = &app.token else {
        return Ok(());
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(token.as_str()) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong bearer token",
        ))
    }
}

fn annotator_of(app: &AppState, claim: Option<String>) -> ApiResult<String> {
    claim
        .filter(|a| !a.trim().is_empty())
        .or_else(|| app.default_annotator.clone())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "annotator is required"))
}

pub fn router(app: Arc<AppState>, ui_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/api/v1/warnings", get(warnings))
        .route("/api/v1/judgments", post(judgments))
        .route("/api/v1/rules", post(rules))
        .route("/api/v1/rules/preview", post(rules_preview))
        .route("/api/v1/rejudge", post(rejudge).get(rejudge_status))
        .route("/api/v1/progress", get(progress))
        .route("/api/v1/report", get(report))
        .route("/api/v1/stats", get(stats))
        .route("/api/v1/items/:id", get(item))
        .with_state(app);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Serialize)]
struct WarningsResponse {
    count: usize,
    warnings: Vec<lingeval_core::store::PendingWarning>,
}

async fn warnings(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<WarningsResponse>> {
    let filter = WarningFilter {
        system: q.get("system").cloned(),
        category: q.get("category").cloned(),
        phenomenon: q.get("phenomenon").cloned(),
    };
    let store = app.store.read().await;
    let warnings = store.pending_warnings(&filter);
    Ok(Json(WarningsResponse {
        count: warnings.len(),
        warnings,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgmentRequest {
    /// Run id, or system id for its latest run.
    pub run: String,
    pub item: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub annotator: Option<String>,
    #[serde(default)]
    pub rationale: Option<String>,
    #[serde(default, rename = "override")]
    pub override_existing: bool,
}

#[derive(Serialize)]
struct JudgmentResponse {
    run_id: String,
    resolution: ManualResolution,
    progress: ProgressSummary,
}

async fn judgments(
    State(app): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<JudgmentResponse>> {
    authorize(&app, &headers)?;
    let req: JudgmentRequest = parse_body(&body)?;
    let annotator = annotator_of(&app, req.annotator)?;
    let mut store = app.store.write().await;
    let run_id = ops::resolve_run(&store, &req.run)?;
    let resolution = store.resolve(
        &run_id,
        &req.item,
        req.verdict,
        &annotator,
        req.rationale,
        req.override_existing,
    )?;
    Ok(Json(JudgmentResponse {
        run_id,
        resolution,
        progress: store.progress(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleRequest {
    pub item: String,
    /// Compact notation, e.g. `+lit:short stories`.
    pub rule: String,
    #[serde(default)]
    pub annotator: Option<String>,
    #[serde(default)]
    pub comment: Option<String>,
}

fn parse_rule(item: &str, spec: &str) -> ApiResult<Rule> {
    Rule::parse(spec).map_err(|reason| {
        lingeval_core::Error::InvalidPattern {
            item: item.to_owned(),
            pattern: spec.to_owned(),
            reason,
        }
        .into()
    })
}

async fn rules(
    State(app): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<ops::ItemView>> {
    authorize(&app, &headers)?;
    let req: RuleRequest = parse_body(&body)?;
    let annotator = annotator_of(&app, req.annotator)?;
    let mut rule = parse_rule(&req.item, &req.rule)?;
    rule.comment = req.comment;
    let mut store = app.store.write().await;
    store.add_rule(&req.item, rule, &annotator)?;
    Ok(Json(ops::item_view(&store, &req.item)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub item: String,
    pub rule: String,
}

#[derive(Serialize)]
struct PreviewResponse {
    rule: String,
    matches_any: bool,
    runs: Vec<RulePreview>,
}

async fn rules_preview(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<PreviewResponse>> {
    let req: PreviewRequest = parse_body(&body)?;
    let rule = parse_rule(&req.item, &req.rule)?;
    let store = app.store.read().await;
    let runs = store.preview_rule(&req.item, &rule)?;
    Ok(Json(PreviewResponse {
        rule: rule.to_string(),
        matches_any: runs.iter().any(|r| r.matches),
        runs,
    }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RejudgeRequest {
    /// Run or system ids; all runs when empty.
    #[serde(default)]
    pub runs: Vec<String>,
    /// Respond only once the job has finished.
    #[serde(default)]
    pub wait: bool,
}

async fn rejudge(
    State(app): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobStatus>)> {
    authorize(&app, &headers)?;
    let req: RejudgeRequest = if body.is_empty() {
        RejudgeRequest::default()
    } else {
        parse_body(&body)?
    };
    let runs = if req.runs.is_empty() {
        Vec::new()
    } else {
        let store = app.store.read().await;
        req.runs
            .iter()
            .map(|r| ops::resolve_run(&store, r))
            .collect::<AppResult<Vec<_>>>()?
    };
    let status = {
        let mut job = app.job.lock().expect("job lock");
        if job.state == JobState::Running {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "busy",
                "a re-judge job is already running",
            ));
        }
        let count = if runs.is_empty() {
            app.store.try_read().map(|s| s.runs().len()).unwrap_or(0)
        } else {
            runs.len()
        };
        *job = JobStatus {
            job: job.job + 1,
            state: JobState::Running,
            runs: count,
            ..Default::default()
        };
        job.clone()
    };
    let worker = app.clone();
    let handle = tokio::task::spawn_blocking(move || {
        let mut store = worker.store.blocking_write();
        let outcome = store.rejudge(&runs);
        let progress = store.progress();
        drop(store);
        let mut job = worker.job.lock().expect("job lock");
        match outcome {
            Ok(report) => {
                job.state = JobState::Done;
                job.report = Some(report);
                job.progress = Some(progress);
            }
            Err(e) => {
                job.state = JobState::Failed;
                job.error = Some(ApiError::from(e).body);
            }
        }
        job.clone()
    });
    if req.wait {
        let done = handle
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
        Ok((StatusCode::OK, Json(done)))
    } else {
        Ok((StatusCode::ACCEPTED, Json(status)))
    }
}

async fn rejudge_status(State(app): State<Arc<AppState>>) -> Json<JobStatus> {
    Json(app.job.lock().expect("job lock").clone())
}

async fn progress(State(app): State<Arc<AppState>>) -> Json<ProgressSummary> {
    Json(app.store.read().await.progress())
}

async fn report(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let kind = ops::table_kind(q.get("kind").map_or("category", String::as_str))?;
    let format: Format = q
        .get("format")
        .map_or(Ok(Format::Json), |f| f.parse())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e))?;
    let by = ops::group_by(q.get("by").map_or("category", String::as_str))?;
    let pairs: Vec<PairSpec> = match q.get("pairs") {
        Some(p) => p
            .split(',')
            .map(str::parse)
            .collect::<Result<_, String>>()
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e))?,
        None => Vec::new(),
    };
    if kind != TableKind::Years && !pairs.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            "pairs apply to years reports only",
        ));
    }
    let store = app.store.read().await;
    let table = ops::build_report(
        &store,
        &ReportRequest {
            kind,
            pairs: &pairs,
            by,
            bleu: None,
            significance: app.significance,
        },
    )?;
    let content_type = match format {
        Format::Json => "application/json",
        Format::Csv => "text/csv; charset=utf-8",
        Format::Markdown => "text/markdown; charset=utf-8",
        Format::Plain => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], render(&table, format)).into_response())
}

async fn stats(
    State(app): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let by = ops::group_by(q.get("by").map_or("category", String::as_str))?;
    let format = q.get("format").map_or("jsonl", String::as_str);
    let store = app.store.read().await;
    let records = ops::stats_records(&store, by, &app.significance)?;
    let body = ops::render_stats(&records, format)?;
    let content_type = if format == "csv" {
        "text/csv; charset=utf-8"
    } else {
        "application/x-ndjson"
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

async fn item(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ops::ItemView>> {
    let store = app.store.read().await;
    Ok(Json(ops::item_view(&store, &id)?))
}

/// Opens the store and serves until interrupted.
pub fn serve_blocking(config: Config, out: &mut dyn Write) -> AppResult<()> {
    let store = Store::open(&config.store)?;
    if store.suite().is_none() {
        return Err(lingeval_core::Error::NoSuite.into());
    }
    let token = std::env::var(TOKEN_ENV).ok();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .map_err(|e| AppError::usage(format!("cannot bind {}: {e}", config.bind)))?;
        let addr = listener.local_addr()?;
        writeln!(out, "serving {} on http://{addr}/api/v1", config.store.display())?;
        if token.is_none() {
            writeln!(out, "{TOKEN_ENV} is not set; mutations are unauthenticated")?;
        }
        out.flush()?;
        let app = AppState::new(store, &config, token);
        let router = router(app, config.ui_dir.as_deref());
        axum::serve(listener, router)
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
