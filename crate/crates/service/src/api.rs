//! JSON HTTP endpoints over the forum.

use std::sync::Arc;

use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use coursemate_core::forum::{
    AcceptState, AnswerId, AnswerView, Cohort, CohortId, Forum, ForumError, Helpfulness,
    LeaderboardEntry, NewQuestion, QuestionId, QuestionView, Role, Tallies, User, UserId,
    VoteDirection,
};
use coursemate_core::Pipeline;

use crate::auth::TokenTable;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Clone)]
pub struct AppState {
    pub forum: Arc<Forum>,
    pub pipeline: Arc<Pipeline>,
    pub tokens: Arc<TokenTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<ForumError> for ApiError {
    fn from(e: ForumError) -> Self {
        use ForumError::*;
        let (status, code) = match &e {
            UnknownUser(_) | UnknownCohort(_) | UnknownQuestion(_) | UnknownAnswer(_) => {
                (StatusCode::NOT_FOUND, "not_found")
            }
            NotInCohort { .. } => (StatusCode::FORBIDDEN, "not_in_cohort"),
            NotAsker => (StatusCode::FORBIDDEN, "not_asker"),
            AiNotAllowed => (StatusCode::FORBIDDEN, "ai_not_allowed"),
            SelfVote => (StatusCode::CONFLICT, "self_vote"),
            DuplicateAiAnswer(_) => (StatusCode::CONFLICT, "duplicate_ai_answer"),
            AlreadyExists(_) => (StatusCode::CONFLICT, "already_exists"),
            KeyConflict(_) => (StatusCode::CONFLICT, "idempotency_key_conflict"),
            EmptyBody => (StatusCode::UNPROCESSABLE_ENTITY, "empty_body"),
            Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            AnswerNotOnQuestion { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "answer_not_on_question"),
            NoAiUser | OutOfSequence { .. } | Generation(_) | Store(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message, "request failed");
        }
        let body = ErrorBody {
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// The authenticated user behind a bearer token.
pub struct Caller(pub UserId);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing bearer token"))?;
        let token = header
            .strip_prefix("Bearer ")
            .map(str::trim)
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "expected a bearer token"))?;
        state
            .tokens
            .user_for(token)
            .cloned()
            .map(Caller)
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "unknown token"))
    }
}

/// Idempotency keys are scoped to the caller so users cannot collide.
fn idempotency_key(headers: &HeaderMap, caller: &UserId) -> ApiResult<Option<String>> {
    match headers.get(IDEMPOTENCY_HEADER) {
        None => Ok(None),
        Some(v) => {
            let key = v
                .to_str()
                .ok()
                .map(str::trim)
                .filter(|k| !k.is_empty() && k.len() <= 200)
                .ok_or_else(|| {
                    ApiError::new(StatusCode::BAD_REQUEST, "bad_idempotency_key", "invalid Idempotency-Key header")
                })?;
            Ok(Some(format!("{caller}:{key}")))
        }
    }
}

/// Runs a forum call off the async executor; log appends may fsync.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ForumError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

fn caller_user(state: &AppState, caller: &UserId) -> ApiResult<User> {
    state
        .forum
        .read(|s| s.user(caller).cloned())
        .ok_or_else(|| ForumError::UnknownUser(caller.clone()).into())
}

/// Forum content is visible to members of its cohort only.
fn require_member(state: &AppState, caller: &UserId, cohort: &CohortId) -> ApiResult<()> {
    state.forum.read(|s| s.cohort(cohort).map(|_| ())).ok_or_else(|| ForumError::UnknownCohort(cohort.clone()))?;
    let user = caller_user(state, caller)?;
    if user.cohort_id.as_ref() != Some(cohort) {
        return Err(ForumError::NotInCohort {
            user: caller.clone(),
            cohort: cohort.clone(),
        }
        .into());
    }
    Ok(())
}

fn question_cohort(state: &AppState, question: QuestionId) -> ApiResult<CohortId> {
    state
        .forum
        .read(|s| s.question(question).map(|q| q.cohort_id.clone()))
        .ok_or_else(|| ForumError::UnknownQuestion(question).into())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/me", get(me))
        .route("/cohorts", post(create_cohort))
        .route("/cohorts/{id}/questions", post(post_question).get(list_questions))
        .route("/cohorts/{id}/leaderboard", get(leaderboard))
        .route("/questions/{id}", get(get_question))
        .route("/questions/{id}/answers", post(post_answer))
        .route("/questions/{id}/accept", post(accept))
        .route("/questions/{id}/vote", post(vote_question))
        .route("/answers/{id}/vote", post(vote_answer))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub backend: String,
    pub index_passages: usize,
    pub last_seq: u64,
    pub pending_ai_answers: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let (last_seq, pending) = state.forum.read(|s| (s.last_seq(), s.questions_awaiting_ai().len()));
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        backend: state.pipeline.backend_kind().to_string(),
        index_passages: state.pipeline.index().len(),
        last_seq,
        pending_ai_answers: pending,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Me {
    pub user: User,
    pub helpfulness: Helpfulness,
}

async fn me(State(state): State<AppState>, Caller(caller): Caller) -> ApiResult<Json<Me>> {
    let user = caller_user(&state, &caller)?;
    let helpfulness = state.forum.helpfulness(&caller);
    Ok(Json(Me { user, helpfulness }))
}

#[derive(Debug, Deserialize)]
pub struct CreateCohort {
    pub cohort_id: CohortId,
    pub name: String,
}

async fn create_cohort(
    State(state): State<AppState>,
    Caller(caller): Caller,
    headers: HeaderMap,
    Json(req): Json<CreateCohort>,
) -> ApiResult<(StatusCode, Json<Cohort>)> {
    if caller_user(&state, &caller)?.role != Role::Facilitator {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "only facilitators create cohorts"));
    }
    let key = idempotency_key(&headers, &caller)?;
    let forum = state.forum.clone();
    let cohort = blocking(move || forum.create_cohort(req.cohort_id, &req.name, key.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(cohort)))
}

#[derive(Debug, Deserialize)]
pub struct PostQuestion {
    pub body: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub anonymous: bool,
    #[serde(default)]
    pub attachments: Vec<String>,
}

async fn post_question(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(cohort): Path<String>,
    headers: HeaderMap,
    Json(req): Json<PostQuestion>,
) -> ApiResult<(StatusCode, Json<QuestionView>)> {
    let key = idempotency_key(&headers, &caller)?;
    let forum = state.forum.clone();
    let author = caller.clone();
    let question = blocking(move || {
        forum.post_question(
            &CohortId::new(cohort),
            &author,
            NewQuestion {
                body: req.body,
                tags: req.tags,
                anonymous: req.anonymous,
                attachments: req.attachments,
            },
            key.as_deref(),
        )
    })
    .await?;
    let view = state
        .forum
        .question_view(question.question_id, Some(&caller))
        .ok_or(ForumError::UnknownQuestion(question.question_id))?;
    // the AI answer is generated in the background
    Ok((StatusCode::ACCEPTED, Json(view)))
}

async fn list_questions(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(cohort): Path<String>,
) -> ApiResult<Json<Vec<QuestionView>>> {
    let cohort = CohortId::new(cohort);
    require_member(&state, &caller, &cohort)?;
    Ok(Json(state.forum.list_questions(&cohort, Some(&caller))))
}

async fn get_question(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(id): Path<u64>,
) -> ApiResult<Json<QuestionView>> {
    let question = QuestionId(id);
    require_member(&state, &caller, &question_cohort(&state, question)?)?;
    state
        .forum
        .question_view(question, Some(&caller))
        .map(Json)
        .ok_or_else(|| ForumError::UnknownQuestion(question).into())
}

#[derive(Debug, Deserialize)]
pub struct PostAnswer {
    pub body: String,
}

async fn post_answer(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(id): Path<u64>,
    headers: HeaderMap,
    Json(req): Json<PostAnswer>,
) -> ApiResult<(StatusCode, Json<AnswerView>)> {
    let key = idempotency_key(&headers, &caller)?;
    let forum = state.forum.clone();
    let author = caller.clone();
    let answer = blocking(move || forum.post_human_answer(QuestionId(id), &author, &req.body, key.as_deref())).await?;
    let view = state
        .forum
        .question_view(QuestionId(id), Some(&caller))
        .and_then(|q| q.answers.into_iter().find(|a| a.answer_id == answer.answer_id))
        .ok_or(ForumError::UnknownAnswer(answer.answer_id))?;
    Ok((StatusCode::CREATED, Json(view)))
}

/// `{"direction": "up" | "down" | null}`; `null` retracts the caller's vote.
#[derive(Debug, Deserialize)]
pub struct VoteBody {
    pub direction: Option<VoteDirection>,
}

async fn vote_answer(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(id): Path<u64>,
    headers: HeaderMap,
    Json(req): Json<VoteBody>,
) -> ApiResult<Json<Tallies>> {
    let key = idempotency_key(&headers, &caller)?;
    let forum = state.forum.clone();
    let tallies = blocking(move || forum.vote(&caller, AnswerId(id), req.direction, key.as_deref())).await?;
    Ok(Json(tallies))
}

#[derive(Debug, Deserialize)]
pub struct QuestionVoteBody {
    pub up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionVotes {
    pub question_id: QuestionId,
    pub upvotes: u64,
}

async fn vote_question(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(id): Path<u64>,
    headers: HeaderMap,
    Json(req): Json<QuestionVoteBody>,
) -> ApiResult<Json<QuestionVotes>> {
    let key = idempotency_key(&headers, &caller)?;
    let forum = state.forum.clone();
    let question_id = QuestionId(id);
    let upvotes = blocking(move || forum.vote_question(&caller, question_id, req.up, key.as_deref())).await?;
    Ok(Json(QuestionVotes { question_id, upvotes }))
}

#[derive(Debug, Deserialize)]
pub struct AcceptBody {
    pub answer_id: AnswerId,
}

async fn accept(
    State(state): State<AppState>,
    Caller(caller): Caller,
    Path(id): Path<u64>,
    headers: HeaderMap,
    Json(req): Json<AcceptBody>,
) -> ApiResult<Json<AcceptState>> {
    let key = idempotency_key(&headers, &caller)?;
    let forum = state.forum.clone();
    let accepted =
        blocking(move || forum.accept_answer_on(&caller, QuestionId(id), req.answer_id, key.as_deref())).await?;
    Ok(Json(accepted))
}

#[derive(Debug, Deserialize)]
pub struct LeaderboardQuery {
    pub n: Option<usize>,
}

/// Public: names, scores and badges only.
async fn leaderboard(
    State(state): State<AppState>,
    Path(cohort): Path<String>,
    Query(q): Query<LeaderboardQuery>,
) -> ApiResult<Json<Vec<LeaderboardEntry>>> {
    let cohort = CohortId::new(cohort);
    if state.forum.read(|s| s.cohort(&cohort).is_none()) {
        return Err(ForumError::UnknownCohort(cohort).into());
    }
    Ok(Json(state.forum.leaderboard(&cohort, q.n.unwrap_or(10).min(100))))
}
