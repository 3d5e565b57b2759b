//! JSON-over-HTTP API for the study platform and the ranking pipeline.
//!
//! Study state lives in an [`EventStore`] under the data directory and is
//! rebuilt from it on startup. Blocking work (ranking, summarization, disk
//! appends) runs on tokio's blocking pool.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tracing::info;

use crate::config::{AppConfig, ConfigError};
use crate::corpus::{Corpus, ProductInfo, ReviewRecord};
use crate::embedding::EmbeddingError;
use crate::pipeline::{self, PipelineError, ReviewAnalyzer};
use crate::profile::UserProfile;
use crate::ranking::{self, RankError, RankOptions, ScoredReview};
use crate::sentiment::SentimentResult;
use crate::store::{EventStore, StoreError};
use crate::study::{Participant, PreferenceSelection, ScreenResponse, SessionView, Study, StudyContext, StudyError, StudyReport};
use crate::summarizer::{Summarizer, SummaryBackend, SummaryError, SummaryRequest, SummaryResult};

/// Subdirectory of the data directory holding the event logs.
pub const EVENTS_DIR: &str = "events";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("invalid bind address `{0}`")]
    InvalidBind(String),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Error body: `{"error": <code>, "message": <text>}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { error: code.to_string(), message: message.into() } }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", r.body_text())
    }
}

fn remote_down(code: &str) -> bool {
    code == "RemoteUnavailable"
}

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        let code = e.code();
        let status = match &e {
            StudyError::UnknownParticipant(_) | StudyError::UnknownSession(_) => StatusCode::NOT_FOUND,
            StudyError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ if remote_down(code) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<RankError> for ApiError {
    fn from(e: RankError) -> Self {
        let status = if remote_down(e.code()) { StatusCode::SERVICE_UNAVAILABLE } else { StatusCode::BAD_REQUEST };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = if matches!(e, PipelineError::Embedding(EmbeddingError::RemoteUnavailable(_))) {
            StatusCode::SERVICE_UNAVAILABLE
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<SummaryError> for ApiError {
    fn from(e: SummaryError) -> Self {
        let status = if e.is_remote_failure() { StatusCode::SERVICE_UNAVAILABLE } else { StatusCode::BAD_REQUEST };
        ApiError::new(status, e.code(), e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Shared state behind every handler.
#[derive(Clone)]
pub struct ServiceState {
    pub config: Arc<AppConfig>,
    pub analyzer: Arc<ReviewAnalyzer>,
    pub corpus: Arc<Corpus>,
    pub summarizer: Summarizer,
    study: Arc<RwLock<Study<EventStore>>>,
    admin_token: Option<Arc<str>>,
}

impl ServiceState {
    /// Loads resources and the corpus, and replays the event log found in
    /// the data directory. The admin token is read from the environment
    /// variable named in the config.
    pub fn open(cfg: AppConfig) -> Result<Self, ServiceError> {
        cfg.validate()?;
        cfg.ensure_data_dir()?;
        let analyzer = Arc::new(ReviewAnalyzer::from_config(&cfg)?);
        let ingested = pipeline::load_corpus(&cfg)?;
        if !ingested.rejected.is_empty() {
            info!(rejected = ingested.rejected.len(), "corpus rows rejected at load");
        }
        let corpus = Arc::new(ingested.corpus);
        let (store, events) = EventStore::open(&cfg.data_dir.join(EVENTS_DIR))?;
        let ctx = StudyContext::new(&cfg, analyzer.clone(), corpus.clone());
        let summarizer = ctx.summarizer.clone();
        let study = Study::with_events(ctx, store, &events)?;
        info!(events = events.len(), "study state replayed");
        let admin_token = std::env::var(&cfg.server.admin_token_env).ok().filter(|t| !t.is_empty()).map(Arc::from);
        Ok(ServiceState {
            config: Arc::new(cfg),
            analyzer,
            corpus,
            summarizer,
            study: Arc::new(RwLock::new(study)),
            admin_token,
        })
    }

    pub fn with_admin_token(mut self, token: Option<&str>) -> Self {
        self.admin_token = token.map(Arc::from);
        self
    }

    /// Current aggregate report, straight from the library.
    pub fn report(&self) -> Result<StudyReport, StudyError> {
        self.study.read().report()
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterBody {
    pub name: String,
    pub email: String,
    pub age_group: String,
}

async fn register(State(s): State<ServiceState>, body: Result<Json<RegisterBody>, JsonRejection>) -> ApiResult<Participant> {
    let Json(b) = body?;
    blocking(move || Ok(s.study.write().register_participant(&b.name, &b.email, &b.age_group)?)).await.map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreferencesBody {
    pub category: String,
    pub aspects: Vec<String>,
}

async fn preferences(
    State(s): State<ServiceState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<PreferencesBody>, JsonRejection>,
) -> ApiResult<PreferenceSelection> {
    let Json(b) = body?;
    blocking(move || Ok(s.study.write().record_preferences(&id, &b.category, &b.aspects)?)).await.map(Json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub category: String,
    pub aspects: Vec<String>,
    pub product_count: usize,
}

async fn categories(State(s): State<ServiceState>) -> Json<Vec<CategoryInfo>> {
    let catalog = s.analyzer.catalog();
    let list = catalog
        .categories()
        .map(|c| CategoryInfo {
            category: c.to_string(),
            aspects: catalog.phrases(c).unwrap_or_default().into_iter().map(String::from).collect(),
            product_count: s.corpus.products(Some(c)).len(),
        })
        .collect();
    Json(list)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProductQuery {
    pub category: Option<String>,
}

async fn products(State(s): State<ServiceState>, query: Result<Query<ProductQuery>, QueryRejection>) -> ApiResult<Vec<ProductInfo>> {
    let Query(q) = query?;
    if let Some(c) = &q.category {
        let known = s.analyzer.catalog().aspects(c).is_ok() || s.corpus.categories().iter().any(|k| k == c);
        if !known {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "UnknownCategory", format!("unknown category `{c}`")));
        }
    }
    Ok(Json(s.corpus.products(q.category.as_deref())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewBody {
    pub participant_id: String,
    pub product_id: String,
    pub star_rating: i64,
    pub review_body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmittedReviewResponse {
    pub review: ReviewRecord,
    pub sentiment: SentimentResult,
}

async fn reviews(State(s): State<ServiceState>, body: Result<Json<ReviewBody>, JsonRejection>) -> ApiResult<SubmittedReviewResponse> {
    let Json(b) = body?;
    blocking(move || {
        let (review, sentiment) =
            s.study.write().submit_review(&b.participant_id, &b.product_id, b.star_rating, &b.review_body)?;
        Ok(SubmittedReviewResponse { review, sentiment })
    })
    .await
    .map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionBody {
    pub participant_id: String,
    pub product_id: String,
}

async fn sessions(State(s): State<ServiceState>, body: Result<Json<SessionBody>, JsonRejection>) -> ApiResult<SessionView> {
    let Json(b) = body?;
    blocking(move || {
        let plan = s.study.read().plan_session(&b.participant_id, &b.product_id)?;
        Ok(s.study.write().commit_session(plan)?)
    })
    .await
    .map(Json)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseAck {
    pub session_id: String,
    pub position: u8,
    pub session_complete: bool,
}

async fn responses(
    State(s): State<ServiceState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ScreenResponse>, JsonRejection>,
) -> ApiResult<ResponseAck> {
    let Json(b) = body?;
    blocking(move || {
        let mut study = s.study.write();
        study.record_response(&id, &b)?;
        Ok(ResponseAck { session_complete: study.state().session_complete(&id), session_id: id, position: b.position })
    })
    .await
    .map(Json)
}

/// Either a corpus customer (profile built from their history) or an
/// explicit profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankBody {
    pub customer_id: Option<String>,
    pub profile: Option<UserProfile>,
    pub product_id: String,
    #[serde(default)]
    pub allow_reviewed: bool,
}

fn resolve_profile(s: &ServiceState, customer_id: Option<&str>, profile: Option<UserProfile>) -> Result<UserProfile, ApiError> {
    match (profile, customer_id) {
        (Some(p), _) => Ok(p),
        (None, Some(id)) => Ok(s.analyzer.historical_profile(&s.corpus, id, None)?),
        (None, None) => Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", "customer_id or profile is required")),
    }
}

async fn rank(State(s): State<ServiceState>, body: Result<Json<RankBody>, JsonRejection>) -> ApiResult<Vec<ScoredReview>> {
    let Json(b) = body?;
    blocking(move || {
        let profile = resolve_profile(&s, b.customer_id.as_deref(), b.profile)?;
        let opts = RankOptions { weights: s.config.weights, allow_reviewed: b.allow_reviewed };
        Ok(ranking::rank_reviews(&profile, &b.product_id, &s.corpus, &s.analyzer, &opts)?)
    })
    .await
    .map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummarizeBody {
    #[serde(flatten)]
    pub request: SummaryRequest,
    /// Overrides the configured backend.
    pub backend: Option<SummaryBackend>,
}

async fn summarize(State(s): State<ServiceState>, body: Result<Json<SummarizeBody>, JsonRejection>) -> ApiResult<SummaryResult> {
    let Json(b) = body?;
    blocking(move || {
        let backend = b.backend.unwrap_or(s.summarizer.config().backend);
        Ok(s.summarizer.summarize_with(&b.request, backend)?)
    })
    .await
    .map(Json)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportQuery {
    pub format: Option<String>,
}

fn authorized(s: &ServiceState, headers: &HeaderMap) -> bool {
    let Some(expected) = &s.admin_token else { return false };
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|given| given.trim() == expected.as_ref())
}

async fn report(
    State(s): State<ServiceState>,
    headers: HeaderMap,
    query: Result<Query<ReportQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query?;
    if !authorized(&s, &headers) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "a valid admin token is required"));
    }
    let report = blocking(move || Ok(s.report()?)).await?;
    Ok(match q.format.as_deref() {
        Some("csv") => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], report.to_csv()).into_response(),
        None | Some("json") => Json(report).into_response(),
        Some(other) => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", format!("unknown format `{other}`")))
        }
    })
}

fn cors(origin: &str) -> CorsLayer {
    let allow = match origin {
        "*" => AllowOrigin::any(),
        o => AllowOrigin::exact(HeaderValue::from_str(o).unwrap_or_else(|_| HeaderValue::from_static("null"))),
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION])
}

pub fn router(state: ServiceState) -> Router {
    let cors = cors(&state.config.server.cors_origin);
    Router::new()
        .route("/api/participants", post(register))
        .route("/api/participants/{id}/preferences", post(preferences))
        .route("/api/categories", get(categories))
        .route("/api/products", get(products))
        .route("/api/reviews", post(reviews))
        .route("/api/sessions", post(sessions))
        .route("/api/sessions/{id}/responses", post(responses))
        .route("/api/rank", post(rank))
        .route("/api/summarize", post(summarize))
        .route("/api/reports/summary", get(report))
        .layer(cors)
        .with_state(state)
}

/// Binds the configured address and serves until Ctrl-C.
pub async fn serve(state: ServiceState) -> Result<(), ServiceError> {
    let server = &state.config.server;
    let addr: SocketAddr = format!("{}:{}", server.bind, server.port)
        .parse()
        .map_err(|_| ServiceError::InvalidBind(format!("{}:{}", server.bind, server.port)))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
