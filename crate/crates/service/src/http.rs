//! HTTP+JSON routes.
//!
//! | route | body | success |
//! |---|---|---|
//! | `POST /v1/sessions` | `{student, domain, problem?, seed?, policy?}` | 201 `SessionView` |
//! | `GET /v1/sessions/{id}` | | 200 `SessionView` |
//! | `POST /v1/sessions/{id}/actions` | `{field, value, turn}` | 200 `{feedback, session}` |
//! | `POST /v1/sessions/{id}/hints` | | 200 `{hint, session}` |
//! | `POST /v1/sessions/{id}/expansions` | `{field, turn}` | 200 `SessionView` |
//! | `GET /v1/students/{id}/skills` | | 200 `{student, skills}` |
//! | `GET /v1/domains` | | 200 `{domains, policies}` |
//!
//! Errors are `{"error": code, "message": text}` with status 401
//! (`unauthorized`), 404 (`not_found`), 409 (`stale_turn`,
//! `session_complete`) or 422 (`invalid_request`, `unknown_field`,
//! `not_expandable`, ...).

use std::sync::Arc;

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use htn_tutor::content::ProblemSpec;
use htn_tutor::Sym;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::session::SessionError;
use crate::tutor::{CreateRequest, Feedback, HintView, SessionView, SkillSummary, Tutor, TutorError};

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<TutorError> for ApiError {
    fn from(e: TutorError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        let (status, code) = match &e {
            TutorError::SessionNotFound(_) => (S::NOT_FOUND, "not_found"),
            TutorError::UnknownDomain(_) => (S::UNPROCESSABLE_ENTITY, "unknown_domain"),
            TutorError::UnknownPolicy(_) => (S::UNPROCESSABLE_ENTITY, "unknown_policy"),
            TutorError::InvalidId(_) => (S::UNPROCESSABLE_ENTITY, "invalid_id"),
            TutorError::StaleTurn { .. } => (S::CONFLICT, "stale_turn"),
            TutorError::Session(SessionError::Complete) => (S::CONFLICT, "session_complete"),
            TutorError::Session(SessionError::UnknownField(_)) => (S::UNPROCESSABLE_ENTITY, "unknown_field"),
            TutorError::Session(SessionError::NotExpandable(_)) => (S::UNPROCESSABLE_ENTITY, "not_expandable"),
            TutorError::Session(SessionError::Problem(_)) => (S::UNPROCESSABLE_ENTITY, "invalid_problem"),
            TutorError::Session(_) | TutorError::Store(_) => {
                tracing::error!(error = %e, "request failed");
                (S::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        // internal details stay in the server log
        let message = if status == S::INTERNAL_SERVER_ERROR {
            "internal error".to_owned()
        } else {
            message
        };
        ApiError::new(status, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    pub student: String,
    pub domain: String,
    /// `1/2+1/4`, `log2(4)+log2(8)` or `seed=N`.
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub policy: Option<String>,
}

/// Field entries arrive as strings; bare JSON numbers are accepted too.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Text(String),
    Number(serde_json::Number),
}

impl Entry {
    fn text(&self) -> String {
        match self {
            Entry::Text(s) => s.clone(),
            Entry::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBody {
    pub field: Sym,
    pub value: Entry,
    pub turn: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionBody {
    pub field: Sym,
    pub turn: u64,
}

#[derive(Serialize)]
struct ActionReply {
    feedback: Feedback,
    session: SessionView,
}

#[derive(Serialize)]
struct HintReply {
    hint: HintView,
    session: SessionView,
}

#[derive(Serialize)]
struct SkillsReply {
    student: String,
    skills: Vec<SkillSummary>,
}

/// Runs blocking tutor work (locks and fsync) off the async workers.
async fn blocking<T: Send + 'static>(
    tutor: &Arc<Tutor>,
    f: impl FnOnce(&Tutor) -> Result<T, TutorError> + Send + 'static,
) -> ApiResult<T> {
    let tutor = tutor.clone();
    match tokio::task::spawn_blocking(move || f(&tutor)).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => {
            tracing::error!(error = %e, "worker panicked");
            Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error"))
        }
    }
}

fn body<T>(r: Result<Json<T>, axum::extract::rejection::JsonRejection>) -> ApiResult<T> {
    r.map(|Json(t)| t)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.body_text()))
}

async fn create_session(
    State(tutor): State<Arc<Tutor>>,
    req: Result<Json<CreateBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let b = body(req)?;
    let spec = match (&b.problem, b.seed) {
        (Some(_), Some(_)) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_request",
                "give either problem or seed, not both",
            ))
        }
        (Some(text), None) => Some(
            ProblemSpec::parse(&b.domain, text)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_problem", e.to_string()))?,
        ),
        (None, Some(seed)) => Some(ProblemSpec::random(&b.domain, seed)),
        (None, None) => None,
    };
    let req = CreateRequest {
        student: b.student,
        domain: b.domain,
        spec,
        policy: b.policy,
    };
    let view = blocking(&tutor, move |t| t.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(tutor): State<Arc<Tutor>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(blocking(&tutor, move |t| t.get_session(&id)).await?))
}

async fn submit_action(
    State(tutor): State<Arc<Tutor>>,
    Path(id): Path<String>,
    req: Result<Json<ActionBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<ActionReply>> {
    let b = body(req)?;
    let value = b.value.text();
    let (feedback, session) = blocking(&tutor, move |t| t.submit_action(&id, &b.field, &value, b.turn)).await?;
    Ok(Json(ActionReply { feedback, session }))
}

async fn request_hint(State(tutor): State<Arc<Tutor>>, Path(id): Path<String>) -> ApiResult<Json<HintReply>> {
    let (hint, session) = blocking(&tutor, move |t| Ok((t.request_hint(&id)?, t.get_session(&id)?))).await?;
    Ok(Json(HintReply { hint, session }))
}

async fn expand(
    State(tutor): State<Arc<Tutor>>,
    Path(id): Path<String>,
    req: Result<Json<ExpansionBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let b = body(req)?;
    Ok(Json(blocking(&tutor, move |t| t.expand_scaffold(&id, &b.field, b.turn)).await?))
}

async fn student_skills(State(tutor): State<Arc<Tutor>>, Path(id): Path<String>) -> ApiResult<Json<SkillsReply>> {
    let student = id.clone();
    let skills = blocking(&tutor, move |t| t.student_skills(&id)).await?;
    Ok(Json(SkillsReply { student, skills }))
}

async fn domains(State(tutor): State<Arc<Tutor>>) -> Json<serde_json::Value> {
    Json(json!({"domains": tutor.domains(), "policies": tutor.policies()}))
}

async fn require_token(State(tutor): State<Arc<Tutor>>, req: Request, next: Next) -> Response {
    if let Some(token) = &tutor.config().api_token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong API token").into_response();
        }
    }
    next.run(req).await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(tutor: Arc<Tutor>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/actions", post(submit_action))
        .route("/v1/sessions/{id}/hints", post(request_hint))
        .route("/v1/sessions/{id}/expansions", post(expand))
        .route("/v1/students/{id}/skills", get(student_skills))
        .route("/v1/domains", get(domains))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(tutor.clone(), require_token))
        .with_state(tutor)
}

/// Serves until ctrl-c.
pub async fn serve(tutor: Arc<Tutor>) -> std::io::Result<()> {
    let addr = tutor.config().listen;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(tutor))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
