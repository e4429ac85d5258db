//! Public, viewer-relative renderings of forum threads. Anonymous questions
//! never carry author identity here.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::model::*;
use super::state::ForumState;
use crate::language::Language;

pub const ANONYMOUS_NAME: &str = "Anonymous";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorView {
    pub user_id: UserId,
    pub display_name: String,
    pub role: Role,
    pub badge: Badge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerView {
    pub answer_id: AnswerId,
    pub author: AuthorView,
    pub is_ai: bool,
    pub fallback: bool,
    pub body: String,
    pub citations: Vec<String>,
    pub upvotes: u64,
    pub downvotes: u64,
    pub accepted: bool,
    pub created_at: DateTime<Utc>,
    pub viewer_vote: Option<VoteDirection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: QuestionId,
    pub cohort_id: CohortId,
    /// `None` when the question was asked anonymously.
    pub author: Option<AuthorView>,
    pub author_display: String,
    pub anonymous: bool,
    pub body: String,
    pub tags: Vec<String>,
    pub attachments: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub language: Language,
    pub upvotes: u64,
    pub viewer_is_asker: bool,
    pub ai_answer_pending: bool,
    pub accepted_answer_id: Option<AnswerId>,
    pub answers: Vec<AnswerView>,
}

fn author_view(state: &ForumState, id: &UserId) -> AuthorView {
    let (display_name, role) = state
        .user(id)
        .map(|u| (u.display_name.clone(), u.role))
        .unwrap_or_else(|| (id.to_string(), Role::Learner));
    AuthorView {
        user_id: id.clone(),
        display_name,
        role,
        badge: state.helpfulness(id).badge,
    }
}

pub fn question_view(
    state: &ForumState,
    question: QuestionId,
    viewer: Option<&UserId>,
) -> Option<QuestionView> {
    let q = state.question(question)?;
    let author = (!q.anonymous).then(|| author_view(state, &q.author_id));
    let author_display = author
        .as_ref()
        .map(|a| a.display_name.clone())
        .unwrap_or_else(|| ANONYMOUS_NAME.to_string());
    let answers = state
        .answers_for(question)
        .map(|a| AnswerView {
            answer_id: a.answer_id,
            author: author_view(state, &a.author_id),
            is_ai: state.ai_user() == Some(&a.author_id),
            fallback: a.fallback,
            body: a.body.clone(),
            citations: a.citations.clone(),
            upvotes: a.upvotes,
            downvotes: a.downvotes,
            accepted: a.accepted,
            created_at: a.created_at,
            viewer_vote: viewer.and_then(|v| state.answer_vote(a.answer_id, v)),
        })
        .collect();
    Some(QuestionView {
        question_id: q.question_id,
        cohort_id: q.cohort_id.clone(),
        author,
        author_display,
        anonymous: q.anonymous,
        body: q.body.clone(),
        tags: q.tags.clone(),
        attachments: q.attachments.clone(),
        created_at: q.created_at,
        language: q.detected_language,
        upvotes: q.upvotes,
        viewer_is_asker: viewer == Some(&q.author_id),
        ai_answer_pending: state.ai_answer_for(question).is_none(),
        accepted_answer_id: state.accepted_for(question),
        answers,
    })
}
