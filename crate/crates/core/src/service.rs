//! HTTP JSON API over a run store.
//!
//! | Method | Path           | Result                         |
//! |--------|----------------|--------------------------------|
//! | GET    | `/api/runs`    | list of run metadata           |
//! | GET    | `/api/view`    | [`ViewPayload`] for a lens     |
//! | GET    | `/api/metrics` | one [`MetricSeries`]           |
//! | POST   | `/api/runs`    | upload a fold log, returns meta|
//!
//! Views are stateless: the lens travels in the query string. Errors carry a
//! machine-readable `code` next to the human-readable `message`.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Serialize;

use crate::ingest::{build_run, merge_runs, parse_fold_log, read_fold_log, FoldLog, IngestError};
use crate::lens::{ClassProjection, IterationRange, LensError, Superclass, SuperclassMapping, ViewLens};
use crate::metrics::{metric_series, Metric, MetricSeries, MetricsError, Normalization, ScaleError};
use crate::model::{ClassAlphabet, ModelError, RunMeta, RunSet};
use crate::view::{build_view, ViewError, ViewPayload, ViewRequest};

/// Error with an HTTP status and a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_parameter(message: impl Into<String>) -> Self {
        Self::new(400, "BAD_PARAMETER", message)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<LensError> for ApiError {
    fn from(e: LensError) -> Self {
        let code = match e {
            LensError::TooFewClasses(_) => "TOO_FEW_CLASSES",
            LensError::UnknownClass { .. } | LensError::UnknownLabel(_) => "UNKNOWN_CLASS",
            LensError::DuplicateClass(_) => "DUPLICATE_CLASS",
            LensError::InvalidMapping(_) => "INVALID_MAPPING",
            LensError::InvalidRange { .. } => "INVALID_RANGE",
            LensError::EmptySlice { .. } => "EMPTY_SLICE",
            LensError::FocusOutOfRange { .. } => "FOCUS_OUT_OF_RANGE",
            LensError::CountTooSmall { .. } => "BAD_COUNT",
        };
        Self::new(400, code, e.to_string())
    }
}

impl From<ScaleError> for ApiError {
    fn from(e: ScaleError) -> Self {
        let code = match e {
            ScaleError::BadGamma(_) => "BAD_GAMMA",
            _ => "BAD_SCALE",
        };
        Self::new(400, code, e.to_string())
    }
}

impl From<ViewError> for ApiError {
    fn from(e: ViewError) -> Self {
        match e {
            ViewError::UnknownRun(_) => Self::new(404, "UNKNOWN_RUN", e.to_string()),
            ViewError::NoRuns => Self::new(404, "NO_RUNS", e.to_string()),
            ViewError::Lens(e) => e.into(),
            ViewError::Scale(e) => e.into(),
        }
    }
}

impl From<MetricsError> for ApiError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::EmptyEpoch(_) => Self::new(422, "EMPTY_EPOCH", e.to_string()),
            MetricsError::UnknownClass { .. } => Self::new(400, "UNKNOWN_CLASS", e.to_string()),
            MetricsError::UnknownIteration(_) => Self::new(400, "UNKNOWN_ITERATION", e.to_string()),
            MetricsError::ClassRequired(_) => Self::new(400, "CLASS_REQUIRED", e.to_string()),
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DuplicateRunId(_) => Self::new(409, "DUPLICATE_RUN_ID", e.to_string()),
            ModelError::AlphabetMismatch { .. } => Self::new(409, "ALPHABET_MISMATCH", e.to_string()),
            ModelError::IndexOutOfAlphabet { .. } => Self::new(400, "INDEX_OUT_OF_ALPHABET", e.to_string()),
            ModelError::LengthMismatch { .. } => Self::new(400, "LENGTH_MISMATCH", e.to_string()),
            ModelError::EmptyInput(_) => Self::new(400, "EMPTY_INPUT", e.to_string()),
            ModelError::InvalidCube(_) => Self::new(400, "INVALID_CUBE", e.to_string()),
            ModelError::TooFewClasses(_) | ModelError::DuplicateLabel(_) => {
                Self::new(400, "INVARIANT_VIOLATION", e.to_string())
            }
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::MalformedDocument(_) => Self::new(400, "MALFORMED_DOCUMENT", e.to_string()),
            IngestError::SchemaViolation(_) => Self::new(400, "SCHEMA_VIOLATION", e.to_string()),
            IngestError::InvariantViolation(_) => Self::new(400, "INVARIANT_VIOLATION", e.to_string()),
            IngestError::AggregatedShapeMismatch { .. } => Self::new(400, "AGGREGATED_SHAPE_MISMATCH", e.to_string()),
            IngestError::Model(e) => e.into(),
            IngestError::NothingToMerge => Self::new(400, "EMPTY_INPUT", e.to_string()),
            IngestError::Io { .. } => Self::new(500, "IO_ERROR", e.to_string()),
        }
    }
}

/// Loaded runs. Readers take a snapshot; uploads swap in a new set, so a
/// reader sees either the old or the new set, never a partial one.
#[derive(Debug, Default)]
pub struct Store {
    current: RwLock<Arc<RunSet>>,
    writer: Mutex<()>,
}

impl Store {
    pub fn new(runs: RunSet) -> Self {
        Self {
            current: RwLock::new(Arc::new(runs)),
            writer: Mutex::new(()),
        }
    }

    /// Loads every `*.json` file of `dir`, in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, IngestError> {
        let dir = dir.as_ref();
        let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        let logs = paths.iter().map(read_fold_log).collect::<Result<Vec<FoldLog>, _>>()?;
        if logs.is_empty() {
            return Ok(Self::default());
        }
        Ok(Self::new(merge_runs(&logs)?))
    }

    pub fn snapshot(&self) -> Arc<RunSet> {
        self.current.read().expect("store lock poisoned").clone()
    }

    pub fn insert(&self, log: &FoldLog) -> Result<RunMeta, ApiError> {
        let (meta, cube) = build_run(log)?;
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let mut next = RunSet::clone(&self.snapshot());
        let meta = next.push(meta, cube)?.meta.clone();
        *self.current.write().expect("store lock poisoned") = Arc::new(next);
        Ok(meta)
    }
}

fn parse_param<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ApiError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| ApiError::bad_parameter(format!("`{name}={value}`: {e}")))
}

fn parse_bool(name: &str, value: &str) -> Result<bool, ApiError> {
    match value {
        "" | "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(ApiError::bad_parameter(format!("`{name}={value}` is not a boolean"))),
    }
}

/// Resolves a class token: an exact label first, then a numeric index.
pub fn resolve_class(alphabet: &ClassAlphabet, token: &str) -> Result<usize, ApiError> {
    if let Some(i) = alphabet.index_of(token) {
        return Ok(i);
    }
    match token.parse::<usize>() {
        Ok(i) if i < alphabet.len() => Ok(i),
        _ => Err(LensError::UnknownLabel(token.to_string()).into()),
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Query keys: `runs`, `classes` (labels or indices, comma separated),
/// `groups` (`name:member|member,name:member|…`), `from`, `to`, `focus`,
/// `norm`, `scale`, `gamma`, `rotated`, `raw`.
pub fn parse_view_query(pairs: &[(String, String)], runs: &RunSet) -> Result<ViewRequest, ApiError> {
    let mut request = ViewRequest::new(ViewLens::default());
    let mut from = None;
    let mut to = None;
    let mut classes = None;
    let mut groups = None;
    for (key, value) in pairs {
        match key.as_str() {
            "runs" => request.run_ids = split_list(value).map(String::from).collect(),
            "classes" => classes = Some(value.as_str()),
            "groups" => groups = Some(value.as_str()),
            "from" => from = Some(parse_param::<i64>(key, value)?),
            "to" => to = Some(parse_param::<i64>(key, value)?),
            "focus" => request.lens.focus = Some(parse_param(key, value)?),
            "norm" => request.lens.normalization = parse_param(key, value)?,
            "scale" => request.lens.scale = parse_param(key, value)?,
            "gamma" => request.lens.gamma = parse_param(key, value)?,
            "rotated" => request.lens.rotated = parse_bool(key, value)?,
            "raw" => request.raw = parse_bool(key, value)?,
            _ => {}
        }
    }
    let alphabet = runs.alphabet().ok_or_else(|| ApiError::from(ViewError::NoRuns))?;
    request.lens.classes = match (classes, groups) {
        (Some(_), Some(_)) => return Err(ApiError::bad_parameter("`classes` and `groups` are mutually exclusive")),
        (Some(list), None) => ClassProjection::Subset(
            split_list(list)
                .map(|t| resolve_class(alphabet, t))
                .collect::<Result<_, _>>()?,
        ),
        (None, Some(text)) => ClassProjection::Superclasses(parse_groups(text, alphabet)?),
        (None, None) => ClassProjection::All,
    };
    if from.is_some() || to.is_some() {
        let all = runs
            .runs()
            .iter()
            .flat_map(|r| r.cube.epochs().iter().map(|e| e.iteration));
        let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
        request.lens.range = Some(IterationRange {
            from: from.unwrap_or(lo),
            to: to.unwrap_or(hi),
        });
    }
    Ok(request)
}

/// Parses `name:member|member,name:member`.
pub fn parse_groups(text: &str, alphabet: &ClassAlphabet) -> Result<SuperclassMapping, ApiError> {
    let groups = split_list(text)
        .map(|group| {
            let (name, members) = group
                .split_once(':')
                .ok_or_else(|| ApiError::bad_parameter(format!("group `{group}` lacks `name:`")))?;
            let members = members
                .split('|')
                .map(|t| resolve_class(alphabet, t.trim()))
                .collect::<Result<_, _>>()?;
            Ok(Superclass {
                name: name.trim().to_string(),
                members,
            })
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(SuperclassMapping::new(groups, alphabet.len())?)
}

/// A single-metric request: run, metric, optional class and normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricQuery {
    pub run_id: String,
    pub metric: Metric,
    pub class: Option<String>,
    pub normalization: Normalization,
}

impl MetricQuery {
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ApiError> {
        let mut run_id = None;
        let mut metric = Metric::Accuracy;
        let mut class = None;
        let mut normalization = Normalization::Absolute;
        for (key, value) in pairs {
            match key.as_str() {
                "run" => run_id = Some(value.clone()),
                "metric" => metric = parse_param(key, value)?,
                "class" => class = Some(value.clone()),
                "norm" => normalization = parse_param(key, value)?,
                _ => {}
            }
        }
        Ok(Self {
            run_id: run_id.ok_or_else(|| ApiError::bad_parameter("missing `run`"))?,
            metric,
            class,
            normalization,
        })
    }

    pub fn evaluate(&self, runs: &RunSet) -> Result<MetricSeries, ApiError> {
        let run = runs
            .get(&self.run_id)
            .ok_or_else(|| ApiError::from(ViewError::UnknownRun(self.run_id.clone())))?;
        let class = match (&self.class, self.metric.is_class_level()) {
            (Some(token), true) => Some(resolve_class(run.cube.alphabet(), token)?),
            _ => None,
        };
        Ok(metric_series(&run.cube, self.metric, class, self.normalization)?.with_run(run.id()))
    }
}

pub fn get_runs(runs: &RunSet) -> Vec<RunMeta> {
    runs.metas()
}

pub fn get_view(runs: &RunSet, pairs: &[(String, String)]) -> Result<ViewPayload, ApiError> {
    let request = parse_view_query(pairs, runs)?;
    Ok(build_view(runs, &request)?)
}

pub fn get_metrics(runs: &RunSet, pairs: &[(String, String)]) -> Result<MetricSeries, ApiError> {
    MetricQuery::from_pairs(pairs)?.evaluate(runs)
}

pub fn post_run(store: &Store, body: &[u8]) -> Result<RunMeta, ApiError> {
    let log = parse_fold_log(body)?;
    store.insert(&log)
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("payloads serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, [(header::CONTENT_TYPE, "application/json")], self.to_json()).into_response()
    }
}

fn reply<T: Serialize>(result: Result<T, ApiError>, ok: StatusCode) -> Response {
    match result {
        Ok(value) => json_response(ok, &value),
        Err(e) => e.into_response(),
    }
}

type Pairs = Query<Vec<(String, String)>>;

async fn runs_handler(State(store): State<Arc<Store>>) -> Response {
    json_response(StatusCode::OK, &get_runs(&store.snapshot()))
}

async fn view_handler(State(store): State<Arc<Store>>, Query(pairs): Pairs) -> Response {
    reply(get_view(&store.snapshot(), &pairs), StatusCode::OK)
}

async fn metrics_handler(State(store): State<Arc<Store>>, Query(pairs): Pairs) -> Response {
    reply(get_metrics(&store.snapshot(), &pairs), StatusCode::OK)
}

async fn upload_handler(State(store): State<Arc<Store>>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || post_run(&store, &body))
        .await
        .unwrap_or_else(|e| Err(ApiError::new(500, "INTERNAL", e.to_string())));
    if let Ok(meta) = &result {
        log::info!("loaded run `{}` with hue {:?}", meta.run_id, meta.hue_index);
    }
    reply(result, StatusCode::CREATED)
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/api/runs", get(runs_handler).post(upload_handler))
        .route("/api/view", get(view_handler))
        .route("/api/metrics", get(metrics_handler))
        .layer(DefaultBodyLimit::disable())
        .with_state(store)
}

/// Serves the API on `listener` until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<Store>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
