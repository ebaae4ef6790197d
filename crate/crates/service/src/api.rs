//! REST routes over [`Engine`]. Bodies in both directions are canonical
//! JSON; every failure is an [`ApiError`].

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use threadwise_core::canonical::to_canonical_string;
use threadwise_core::llm::GatewayError;
use threadwise_core::model::{
    ModelError, QuestionCandidate, QuestionId, SessionId, SurveyPhase, ThemeId, ThemeSuggestion, Timestamp,
};
use threadwise_core::pipelines::PipelineError;

use crate::engine::{Engine, EngineError, KeywordMode};
use crate::store::StoreError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    pub request_id: String,
}

/// Every code a non-2xx response may carry.
pub const ERROR_CODES: [&str; 26] = [
    "UnknownSession",
    "UnknownTheme",
    "UnknownQuestion",
    "NoSummary",
    "UnknownRoute",
    "MethodNotAllowed",
    "DuplicateTheme",
    "StaleVersion",
    "EmptyNarrative",
    "OutOfRangeItem",
    "UnknownEventKind",
    "UngroundedSuggestion",
    "InvalidSuggestion",
    "InvalidQuestion",
    "InvalidKeywordBatch",
    "SurveyOrder",
    "InvalidRequest",
    "Unauthorized",
    "ProviderTimeout",
    "ProviderAuth",
    "ProviderUnavailable",
    "SchemaViolation",
    "NoValidSuggestions",
    "StorageCorrupt",
    "Internal",
    "Cancelled",
];

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code), "{code}");
        Self {
            http_status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
            request_id: uuid::Uuid::new_v4().to_string(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        canonical(status, &self)
    }
}

fn model_error(e: &ModelError) -> (StatusCode, &'static str) {
    match e {
        ModelError::EmptyNarrative => (StatusCode::UNPROCESSABLE_ENTITY, "EmptyNarrative"),
        ModelError::DuplicateTheme(_) => (StatusCode::CONFLICT, "DuplicateTheme"),
        ModelError::UnknownTheme(_) => (StatusCode::NOT_FOUND, "UnknownTheme"),
        ModelError::UnknownQuestion(_) => (StatusCode::NOT_FOUND, "UnknownQuestion"),
        ModelError::OutOfRangeItem { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "OutOfRangeItem"),
        ModelError::UngroundedSuggestion(_) => (StatusCode::UNPROCESSABLE_ENTITY, "UngroundedSuggestion"),
        ModelError::InvalidSuggestion(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidSuggestion"),
        ModelError::InvalidKeywordBatch(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidKeywordBatch"),
        ModelError::InvalidQuestion(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidQuestion"),
        ModelError::SurveyOrder => (StatusCode::UNPROCESSABLE_ENTITY, "SurveyOrder"),
    }
}

fn gateway_error(e: &GatewayError) -> (StatusCode, &'static str) {
    match e {
        GatewayError::ProviderTimeout(_) => (StatusCode::BAD_GATEWAY, "ProviderTimeout"),
        GatewayError::ProviderAuth(_) => (StatusCode::BAD_GATEWAY, "ProviderAuth"),
        GatewayError::ProviderUnavailable(_) => (StatusCode::BAD_GATEWAY, "ProviderUnavailable"),
        GatewayError::SchemaViolation { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "SchemaViolation"),
        GatewayError::Cancelled => (StatusCode::SERVICE_UNAVAILABLE, "Cancelled"),
        GatewayError::InvalidRequest(_) | GatewayError::InvalidConfig(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "Internal")
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match &e {
            EngineError::Model(m) => model_error(m),
            EngineError::Pipeline(p) => match p {
                PipelineError::UnknownTheme(_) => (StatusCode::NOT_FOUND, "UnknownTheme"),
                PipelineError::UnknownQuestion(_) => (StatusCode::NOT_FOUND, "UnknownQuestion"),
                PipelineError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "InvalidRequest"),
                PipelineError::NoValidSuggestions => (StatusCode::INTERNAL_SERVER_ERROR, "NoValidSuggestions"),
                PipelineError::Gateway(g) => gateway_error(g),
            },
            EngineError::Store(s) => match s {
                StoreError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
                StoreError::StorageCorrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "StorageCorrupt"),
                StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
            },
            EngineError::StaleVersion { .. } => (StatusCode::CONFLICT, "StaleVersion"),
            EngineError::UnknownEventKind(_) => (StatusCode::UNPROCESSABLE_ENTITY, "UnknownEventKind"),
            EngineError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "InvalidRequest"),
            EngineError::NoSummary => (StatusCode::NOT_FOUND, "NoSummary"),
        };
        if status.is_server_error() {
            tracing::error!(code, error = %e, "request failed");
        }
        ApiError::new(status, code, e.to_string())
    }
}

fn canonical<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match to_canonical_string(body) {
        Ok(text) => {
            let mut resp = (status, text).into_response();
            resp.headers_mut()
                .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
            resp
        }
        Err(e) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()).into_response(),
    }
}

fn ok<T: Serialize>(body: &T) -> Response {
    canonical(StatusCode::OK, body)
}

/// JSON body extractor that reports failures as `InvalidRequest`. An empty
/// body reads as `{}`.
pub struct Body<T>(pub T);

impl<S, T> FromRequest<S> for Body<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::invalid(format!("unreadable body: {e}")))?;
        let text: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(text)
            .map(Body)
            .map_err(|e| ApiError::invalid(format!("malformed body: {e}")))
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Engine,
    /// Bearer token every request must carry, when set.
    pub token: Option<String>,
}

type Api = Result<Response, ApiError>;
type St = State<AppState>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    narrative: String,
    #[serde(default)]
    locale: Option<String>,
    /// When the user started writing, in epoch milliseconds.
    #[serde(default)]
    started_at: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CountBody {
    #[serde(default)]
    n: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionSuggestBody {
    #[serde(default)]
    n: Option<u32>,
    #[serde(default)]
    after_question: Option<QuestionId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuggestionBody {
    suggestion: ThemeSuggestion,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeywordBody {
    mode: KeywordMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventBody {
    kind: String,
    #[serde(default)]
    payload: std::collections::BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurveyBody {
    phase: SurveyPhase,
    items: Vec<i64>,
}

#[derive(Serialize)]
struct Score {
    score: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

async fn create_session(State(app): St, Body(body): Body<CreateBody>) -> Api {
    let session = app
        .engine
        .create_session(&body.narrative, body.locale.as_deref(), body.started_at.map(Timestamp))?;
    Ok(canonical(StatusCode::CREATED, &session))
}

async fn get_session(State(app): St, Path(id): Path<SessionId>) -> Api {
    Ok(ok(&*app.engine.session(&id)?))
}

async fn suggest_themes(State(app): St, Path(id): Path<SessionId>, Body(body): Body<CountBody>) -> Api {
    Ok(ok(&app.engine.suggest_themes(&id, body.n).await?))
}

async fn activate_theme(State(app): St, Path(id): Path<SessionId>, Body(body): Body<SuggestionBody>) -> Api {
    Ok(ok(&app.engine.activate_theme(&id, body.suggestion).await?))
}

async fn pin_theme(State(app): St, Path(id): Path<SessionId>, Body(body): Body<SuggestionBody>) -> Api {
    app.engine.pin_theme(&id, body.suggestion).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn suggest_questions(
    State(app): St,
    Path((id, tid)): Path<(SessionId, ThemeId)>,
    Body(body): Body<QuestionSuggestBody>,
) -> Api {
    let out = app
        .engine
        .suggest_questions(&id, &tid, body.n, body.after_question.as_ref())
        .await?;
    Ok(ok(&out))
}

async fn select_question(
    State(app): St,
    Path((id, tid)): Path<(SessionId, ThemeId)>,
    Body(body): Body<QuestionCandidate>,
) -> Api {
    Ok(ok(&app.engine.select_question(&id, &tid, body).await?))
}

async fn get_question(State(app): St, Path((id, qid)): Path<(SessionId, QuestionId)>) -> Api {
    Ok(ok(&app.engine.question(&id, &qid)?))
}

async fn update_answer(
    State(app): St,
    Path((id, qid)): Path<(SessionId, QuestionId)>,
    Body(body): Body<AnswerBody>,
) -> Api {
    Ok(ok(&app.engine.update_answer(&id, &qid, &body.text).await?))
}

async fn keywords(
    State(app): St,
    Path((id, qid)): Path<(SessionId, QuestionId)>,
    Body(body): Body<KeywordBody>,
) -> Api {
    Ok(ok(&app.engine.keywords(&id, &qid, body.mode).await?))
}

async fn comment(State(app): St, Path((id, qid)): Path<(SessionId, QuestionId)>, Body(_): Body<Empty>) -> Api {
    Ok(ok(&app.engine.request_comment(&id, &qid).await?))
}

async fn summarize(State(app): St, Path(id): Path<SessionId>, Body(_): Body<Empty>) -> Api {
    Ok(ok(&app.engine.summarize(&id).await?))
}

async fn latest_summary(State(app): St, Path(id): Path<SessionId>) -> Api {
    Ok(ok(&app.engine.latest_summary(&id)?))
}

async fn record_event(State(app): St, Path(id): Path<SessionId>, Body(body): Body<EventBody>) -> Api {
    let page = body.payload.get("page").map(String::as_str);
    app.engine.record_event(&id, &body.kind, page).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn survey(State(app): St, Path(id): Path<SessionId>, Body(body): Body<SurveyBody>) -> Api {
    let score = app.engine.submit_survey(&id, body.phase, &body.items).await?;
    Ok(ok(&Score { score }))
}

async fn export(State(app): St, Path(id): Path<SessionId>) -> Api {
    Ok(ok(&app.engine.export(&id)?))
}

async fn metrics(State(app): St, Path(id): Path<SessionId>) -> Api {
    Ok(ok(&app.engine.metrics(&id)?))
}

async fn unknown_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "UnknownRoute", "no such route")
}

async fn wrong_method() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed on this route")
}

async fn require_token(State(app): St, req: Request, next: Next) -> Response {
    if let Some(token) = &app.token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/themes/suggest", post(suggest_themes))
        .route("/sessions/{id}/themes", post(activate_theme))
        .route("/sessions/{id}/themes/pin", post(pin_theme))
        .route("/sessions/{id}/themes/{tid}/questions/suggest", post(suggest_questions))
        .route("/sessions/{id}/themes/{tid}/questions", post(select_question))
        .route("/sessions/{id}/questions/{qid}", get(get_question))
        .route("/sessions/{id}/questions/{qid}/answer", patch(update_answer))
        .route("/sessions/{id}/questions/{qid}/keywords", post(keywords))
        .route("/sessions/{id}/questions/{qid}/comments", post(comment))
        .route("/sessions/{id}/summary", post(summarize))
        .route("/sessions/{id}/summary/latest", get(latest_summary))
        .route("/sessions/{id}/events", post(record_event))
        .route("/sessions/{id}/survey", post(survey))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/metrics", get(metrics))
        .fallback(unknown_route)
        .method_not_allowed_fallback(wrong_method)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}
