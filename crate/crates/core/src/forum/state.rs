//! Event-sourced forum state. [`ForumState::apply`] is the only mutation
//! path; it validates a record against the current state and either applies
//! all of it or none of it, so replaying a log reproduces the state exactly.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::model::*;
use super::ForumError;
use crate::language::Language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Event {
    UserRegistered {
        user_id: UserId,
        display_name: String,
        role: Role,
        cohort_id: Option<CohortId>,
    },
    CohortCreated {
        cohort_id: CohortId,
        name: String,
    },
    QuestionPosted {
        question_id: QuestionId,
        cohort_id: CohortId,
        author_id: UserId,
        anonymous: bool,
        body: String,
        tags: Vec<String>,
        attachments: Vec<String>,
        detected_language: Language,
    },
    AnswerPosted {
        answer_id: AnswerId,
        question_id: QuestionId,
        author_id: UserId,
        body: String,
        citations: Vec<String>,
        #[serde(default)]
        fallback: bool,
    },
    /// `direction: None` retracts the voter's live vote.
    AnswerVoted {
        answer_id: AnswerId,
        voter_id: UserId,
        direction: Option<VoteDirection>,
    },
    QuestionVoted {
        question_id: QuestionId,
        voter_id: UserId,
        up: bool,
    },
    AnswerAccepted {
        question_id: QuestionId,
        answer_id: AnswerId,
        accepted_by: UserId,
    },
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

/// What a keyed mutation produced, so a retry can return the same result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Outcome {
    Cohort(CohortId),
    Question(QuestionId),
    Answer(AnswerId),
    AnswerVote(AnswerId),
    QuestionVote(QuestionId),
    Acceptance(QuestionId),
    User(UserId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForumState {
    users: BTreeMap<UserId, User>,
    ai_user: Option<UserId>,
    cohorts: BTreeMap<CohortId, Cohort>,
    questions: BTreeMap<QuestionId, ForumQuestion>,
    answers: BTreeMap<AnswerId, ForumAnswer>,
    answers_by_question: BTreeMap<QuestionId, Vec<AnswerId>>,
    ai_answer: BTreeMap<QuestionId, AnswerId>,
    accepted: BTreeMap<QuestionId, AnswerId>,
    answer_votes: BTreeMap<AnswerId, BTreeMap<UserId, VoteDirection>>,
    question_votes: BTreeMap<QuestionId, BTreeSet<UserId>>,
    contributions: BTreeMap<UserId, Contribution>,
    first_activity: BTreeMap<UserId, u64>,
    idempotency: BTreeMap<String, Outcome>,
    next_question: u64,
    next_answer: u64,
    last_seq: u64,
}

fn non_empty(body: &str) -> Result<(), ForumError> {
    if body.trim().is_empty() {
        Err(ForumError::EmptyBody)
    } else {
        Ok(())
    }
}

impl ForumState {
    pub fn new() -> Self {
        ForumState {
            next_question: 1,
            next_answer: 1,
            ..Default::default()
        }
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn next_question_id(&self) -> QuestionId {
        QuestionId(self.next_question)
    }

    pub fn next_answer_id(&self) -> AnswerId {
        AnswerId(self.next_answer)
    }

    pub fn user(&self, id: &UserId) -> Option<&User> {
        self.users.get(id)
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn ai_user(&self) -> Option<&UserId> {
        self.ai_user.as_ref()
    }

    pub fn cohort(&self, id: &CohortId) -> Option<&Cohort> {
        self.cohorts.get(id)
    }

    pub fn cohorts(&self) -> impl Iterator<Item = &Cohort> {
        self.cohorts.values()
    }

    pub fn question(&self, id: QuestionId) -> Option<&ForumQuestion> {
        self.questions.get(&id)
    }

    pub fn questions(&self) -> impl Iterator<Item = &ForumQuestion> {
        self.questions.values()
    }

    pub fn answer(&self, id: AnswerId) -> Option<&ForumAnswer> {
        self.answers.get(&id)
    }

    pub fn answers(&self) -> impl Iterator<Item = &ForumAnswer> {
        self.answers.values()
    }

    /// Answers to a question, oldest first.
    pub fn answers_for(&self, question: QuestionId) -> impl Iterator<Item = &ForumAnswer> {
        self.answers_by_question
            .get(&question)
            .into_iter()
            .flatten()
            .filter_map(|id| self.answers.get(id))
    }

    pub fn ai_answer_for(&self, question: QuestionId) -> Option<&ForumAnswer> {
        self.ai_answer.get(&question).and_then(|id| self.answers.get(id))
    }

    pub fn accepted_for(&self, question: QuestionId) -> Option<AnswerId> {
        self.accepted.get(&question).copied()
    }

    /// Every live answer vote as (answer, voter, direction).
    pub fn answer_votes(&self) -> impl Iterator<Item = (AnswerId, &UserId, VoteDirection)> {
        self.answer_votes
            .iter()
            .flat_map(|(a, m)| m.iter().map(move |(u, d)| (*a, u, *d)))
    }

    pub fn answer_vote(&self, answer: AnswerId, voter: &UserId) -> Option<VoteDirection> {
        self.answer_votes.get(&answer).and_then(|m| m.get(voter)).copied()
    }

    /// Every live question upvote as (question, voter).
    pub fn question_votes(&self) -> impl Iterator<Item = (QuestionId, &UserId)> {
        self.question_votes
            .iter()
            .flat_map(|(q, s)| s.iter().map(move |u| (*q, u)))
    }

    pub fn contribution(&self, user: &UserId) -> Contribution {
        self.contributions.get(user).copied().unwrap_or_default()
    }

    pub fn helpfulness(&self, user: &UserId) -> Helpfulness {
        Helpfulness::from(&self.contribution(user))
    }

    pub fn first_activity(&self, user: &UserId) -> Option<u64> {
        self.first_activity.get(user).copied()
    }

    pub fn outcome_for_key(&self, key: &str) -> Option<&Outcome> {
        self.idempotency.get(key)
    }

    /// Questions that have no AI answer yet, oldest first.
    pub fn questions_awaiting_ai(&self) -> Vec<QuestionId> {
        self.questions
            .keys()
            .filter(|q| !self.ai_answer.contains_key(q))
            .copied()
            .collect()
    }

    /// Top `n` human users of a cohort by helpfulness. Ties go to the user
    /// whose first question or answer came earliest, then to user id.
    pub fn leaderboard(&self, cohort: &CohortId, n: usize) -> Vec<LeaderboardEntry> {
        let mut rows: Vec<(&User, Helpfulness, Option<u64>)> = self
            .users
            .values()
            .filter(|u| u.role != Role::Ai && u.cohort_id.as_ref() == Some(cohort))
            .map(|u| (u, self.helpfulness(&u.user_id), self.first_activity(&u.user_id)))
            .collect();
        rows.sort_by(|a, b| {
            b.1.score
                .cmp(&a.1.score)
                .then_with(|| match (a.2, b.2) {
                    (Some(x), Some(y)) => x.cmp(&y),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => std::cmp::Ordering::Equal,
                })
                .then_with(|| a.0.user_id.cmp(&b.0.user_id))
        });
        rows.into_iter()
            .take(n)
            .enumerate()
            .map(|(i, (u, h, _))| LeaderboardEntry {
                rank: i + 1,
                user_id: u.user_id.clone(),
                display_name: u.display_name.clone(),
                role: u.role,
                score: h.score,
                badge: h.badge,
            })
            .collect()
    }

    fn known_user(&self, id: &UserId) -> Result<&User, ForumError> {
        self.users.get(id).ok_or_else(|| ForumError::UnknownUser(id.clone()))
    }

    fn known_question(&self, id: QuestionId) -> Result<&ForumQuestion, ForumError> {
        self.questions.get(&id).ok_or(ForumError::UnknownQuestion(id))
    }

    fn known_answer(&self, id: AnswerId) -> Result<&ForumAnswer, ForumError> {
        self.answers.get(&id).ok_or(ForumError::UnknownAnswer(id))
    }

    fn human_member(&self, user: &User, cohort: &CohortId) -> Result<(), ForumError> {
        if user.role == Role::Ai {
            return Err(ForumError::AiNotAllowed);
        }
        if user.cohort_id.as_ref() != Some(cohort) {
            return Err(ForumError::NotInCohort {
                user: user.user_id.clone(),
                cohort: cohort.clone(),
            });
        }
        Ok(())
    }

    /// Checks `event` against the current state without changing anything.
    pub fn validate(&self, event: &Event) -> Result<(), ForumError> {
        match event {
            Event::UserRegistered {
                user_id,
                display_name,
                role,
                cohort_id,
            } => {
                if user_id.as_str().trim().is_empty() || display_name.trim().is_empty() {
                    return Err(ForumError::Invalid("user id and display name are required".into()));
                }
                if self.users.contains_key(user_id) {
                    return Err(ForumError::AlreadyExists(format!("user {user_id}")));
                }
                match (role, cohort_id) {
                    (Role::Ai, _) if self.ai_user.is_some() => Err(ForumError::AlreadyExists(
                        "an AI user is already registered".into(),
                    )),
                    (Role::Ai, Some(_)) => {
                        Err(ForumError::Invalid("the AI user serves every cohort".into()))
                    }
                    (Role::Learner | Role::Facilitator, None) => {
                        Err(ForumError::Invalid(format!("user {user_id} needs a cohort")))
                    }
                    _ => Ok(()),
                }
            }
            Event::CohortCreated { cohort_id, name } => {
                if cohort_id.as_str().trim().is_empty() || name.trim().is_empty() {
                    return Err(ForumError::Invalid("cohort id and name are required".into()));
                }
                if self.cohorts.contains_key(cohort_id) {
                    return Err(ForumError::AlreadyExists(format!("cohort {cohort_id}")));
                }
                Ok(())
            }
            Event::QuestionPosted {
                question_id,
                cohort_id,
                author_id,
                body,
                ..
            } => {
                if self.questions.contains_key(question_id) {
                    return Err(ForumError::AlreadyExists(format!("question {question_id}")));
                }
                if !self.cohorts.contains_key(cohort_id) {
                    return Err(ForumError::UnknownCohort(cohort_id.clone()));
                }
                let author = self.known_user(author_id)?;
                self.human_member(author, cohort_id)?;
                non_empty(body)
            }
            Event::AnswerPosted {
                answer_id,
                question_id,
                author_id,
                body,
                citations,
                fallback,
            } => {
                if self.answers.contains_key(answer_id) {
                    return Err(ForumError::AlreadyExists(format!("answer {answer_id}")));
                }
                let question = self.known_question(*question_id)?;
                let author = self.known_user(author_id)?;
                non_empty(body)?;
                if author.role == Role::Ai {
                    if self.ai_answer.contains_key(question_id) {
                        return Err(ForumError::DuplicateAiAnswer(*question_id));
                    }
                    if citations.is_empty() != *fallback {
                        return Err(ForumError::Invalid(
                            "AI answers cite passages unless they are the fallback".into(),
                        ));
                    }
                } else {
                    self.human_member(author, &question.cohort_id)?;
                    if !citations.is_empty() || *fallback {
                        return Err(ForumError::Invalid("human answers carry no citations".into()));
                    }
                }
                Ok(())
            }
            Event::AnswerVoted {
                answer_id,
                voter_id,
                ..
            } => {
                let answer = self.known_answer(*answer_id)?;
                let voter = self.known_user(voter_id)?;
                if &answer.author_id == voter_id {
                    return Err(ForumError::SelfVote);
                }
                let cohort = &self.known_question(answer.question_id)?.cohort_id;
                self.human_member(voter, cohort)
            }
            Event::QuestionVoted {
                question_id,
                voter_id,
                ..
            } => {
                let question = self.known_question(*question_id)?;
                let voter = self.known_user(voter_id)?;
                if &question.author_id == voter_id {
                    return Err(ForumError::SelfVote);
                }
                self.human_member(voter, &question.cohort_id)
            }
            Event::AnswerAccepted {
                question_id,
                answer_id,
                accepted_by,
            } => {
                let question = self.known_question(*question_id)?;
                let answer = self.known_answer(*answer_id)?;
                if answer.question_id != *question_id {
                    return Err(ForumError::AnswerNotOnQuestion {
                        answer: *answer_id,
                        question: *question_id,
                    });
                }
                if &question.author_id != accepted_by {
                    return Err(ForumError::NotAsker);
                }
                Ok(())
            }
        }
    }

    /// Validates and applies one record. Records must arrive in sequence.
    pub fn apply(&mut self, record: &LogRecord) -> Result<Outcome, ForumError> {
        if record.seq != self.last_seq + 1 {
            return Err(ForumError::OutOfSequence {
                expected: self.last_seq + 1,
                found: record.seq,
            });
        }
        self.validate(&record.event)?;
        let outcome = self.mutate(record);
        self.last_seq = record.seq;
        if let Some(key) = &record.idempotency_key {
            self.idempotency.insert(key.clone(), outcome.clone());
        }
        Ok(outcome)
    }

    fn touch_activity(&mut self, user: &UserId, seq: u64) {
        self.first_activity.entry(user.clone()).or_insert(seq);
    }

    fn mutate(&mut self, record: &LogRecord) -> Outcome {
        let at = record.timestamp;
        match record.event.clone() {
            Event::UserRegistered {
                user_id,
                display_name,
                role,
                cohort_id,
            } => {
                if role == Role::Ai {
                    self.ai_user = Some(user_id.clone());
                }
                self.users.insert(
                    user_id.clone(),
                    User {
                        user_id: user_id.clone(),
                        display_name,
                        role,
                        cohort_id,
                    },
                );
                Outcome::User(user_id)
            }
            Event::CohortCreated { cohort_id, name } => {
                self.cohorts.insert(
                    cohort_id.clone(),
                    Cohort {
                        cohort_id: cohort_id.clone(),
                        name,
                        created_at: at,
                    },
                );
                Outcome::Cohort(cohort_id)
            }
            Event::QuestionPosted {
                question_id,
                cohort_id,
                author_id,
                anonymous,
                body,
                tags,
                attachments,
                detected_language,
            } => {
                self.touch_activity(&author_id, record.seq);
                self.questions.insert(
                    question_id,
                    ForumQuestion {
                        question_id,
                        cohort_id,
                        author_id,
                        anonymous,
                        body,
                        tags,
                        attachments,
                        created_at: at,
                        detected_language,
                        upvotes: 0,
                    },
                );
                self.next_question = self.next_question.max(question_id.0 + 1);
                Outcome::Question(question_id)
            }
            Event::AnswerPosted {
                answer_id,
                question_id,
                author_id,
                body,
                citations,
                fallback,
            } => {
                if self.users[&author_id].role == Role::Ai {
                    self.ai_answer.insert(question_id, answer_id);
                } else {
                    self.touch_activity(&author_id, record.seq);
                }
                self.answers.insert(
                    answer_id,
                    ForumAnswer {
                        answer_id,
                        question_id,
                        author_id,
                        body,
                        citations,
                        upvotes: 0,
                        downvotes: 0,
                        accepted: false,
                        created_at: at,
                        fallback,
                    },
                );
                self.answers_by_question.entry(question_id).or_default().push(answer_id);
                self.next_answer = self.next_answer.max(answer_id.0 + 1);
                Outcome::Answer(answer_id)
            }
            Event::AnswerVoted {
                answer_id,
                voter_id,
                direction,
            } => {
                let ledger = self.answer_votes.entry(answer_id).or_default();
                let previous = match direction {
                    Some(d) => ledger.insert(voter_id, d),
                    None => ledger.remove(&voter_id),
                };
                if ledger.is_empty() {
                    self.answer_votes.remove(&answer_id);
                }
                let answer = self.answers.get_mut(&answer_id).expect("validated");
                let author = answer.author_id.clone();
                let contribution = self.contributions.entry(author).or_default();
                match previous {
                    Some(VoteDirection::Up) => {
                        answer.upvotes -= 1;
                        contribution.answer_upvotes -= 1;
                    }
                    Some(VoteDirection::Down) => {
                        answer.downvotes -= 1;
                        contribution.answer_downvotes -= 1;
                    }
                    None => {}
                }
                match direction {
                    Some(VoteDirection::Up) => {
                        answer.upvotes += 1;
                        contribution.answer_upvotes += 1;
                    }
                    Some(VoteDirection::Down) => {
                        answer.downvotes += 1;
                        contribution.answer_downvotes += 1;
                    }
                    None => {}
                }
                Outcome::AnswerVote(answer_id)
            }
            Event::QuestionVoted {
                question_id,
                voter_id,
                up,
            } => {
                let voters = self.question_votes.entry(question_id).or_default();
                let changed = if up {
                    voters.insert(voter_id)
                } else {
                    voters.remove(&voter_id)
                };
                if voters.is_empty() {
                    self.question_votes.remove(&question_id);
                }
                if changed {
                    let question = self.questions.get_mut(&question_id).expect("validated");
                    let contribution =
                        self.contributions.entry(question.author_id.clone()).or_default();
                    if up {
                        question.upvotes += 1;
                        contribution.question_upvotes += 1;
                    } else {
                        question.upvotes -= 1;
                        contribution.question_upvotes -= 1;
                    }
                }
                Outcome::QuestionVote(question_id)
            }
            Event::AnswerAccepted {
                question_id,
                answer_id,
                ..
            } => {
                let previous = self.accepted.insert(question_id, answer_id);
                if previous != Some(answer_id) {
                    if let Some(prev) = previous {
                        let old = self.answers.get_mut(&prev).expect("accepted answer exists");
                        old.accepted = false;
                        let author = old.author_id.clone();
                        self.contributions.entry(author).or_default().accepted_answers -= 1;
                    }
                    let new = self.answers.get_mut(&answer_id).expect("validated");
                    new.accepted = true;
                    let author = new.author_id.clone();
                    self.contributions.entry(author).or_default().accepted_answers += 1;
                }
                Outcome::Acceptance(question_id)
            }
        }
    }
}
