//! The human-in-the-loop forum: cohorts, questions, answers, votes,
//! acceptance, helpfulness and the leaderboard.
//!
//! [`Forum`] is the thread-safe front door. Every mutation is turned into a
//! [`LogRecord`], validated, written to the log, and only then applied to the
//! in-memory [`ForumState`]. Mutations are serialized under one lock, which
//! also gives per-question exclusivity; AI generation runs outside the lock.

mod log;
mod model;
mod state;
mod view;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};

use crate::corpus::normalize_tags;
use crate::language::{detect_language, LanguageError};
use crate::rag::{Pipeline, QuestionInput, RagError};

pub use log::{
    open_data_dir, read_log, replay_into, write_snapshot, EventLog, StoreError, LOG_FILE,
    SNAPSHOT_FILE,
};
pub use model::*;
pub use state::{Event, ForumState, LogRecord, Outcome};
pub use view::{question_view, AnswerView, AuthorView, QuestionView, ANONYMOUS_NAME};

#[derive(Debug, thiserror::Error)]
pub enum ForumError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown cohort {0}")]
    UnknownCohort(CohortId),
    #[error("unknown question {0}")]
    UnknownQuestion(QuestionId),
    #[error("unknown answer {0}")]
    UnknownAnswer(AnswerId),
    #[error("user {user} is not a member of cohort {cohort}")]
    NotInCohort { user: UserId, cohort: CohortId },
    #[error("body must not be empty")]
    EmptyBody,
    #[error("users cannot vote on their own posts")]
    SelfVote,
    #[error("only the asker can accept an answer")]
    NotAsker,
    #[error("answer {answer} does not belong to question {question}")]
    AnswerNotOnQuestion { answer: AnswerId, question: QuestionId },
    #[error("question {0} already has an AI answer")]
    DuplicateAiAnswer(QuestionId),
    #[error("the AI user cannot perform this action")]
    AiNotAllowed,
    #[error("no AI user is registered")]
    NoAiUser,
    #[error("{0} already exists")]
    AlreadyExists(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("idempotency key {0:?} was already used for a different request")]
    KeyConflict(String),
    #[error("log record out of sequence: expected {expected}, found {found}")]
    OutOfSequence { expected: u64, found: u64 },
    #[error("answer generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Advances by a fixed step on every reading. Deterministic timestamps for
/// tests and replays.
#[derive(Debug)]
pub struct StepClock {
    start: DateTime<Utc>,
    step: Duration,
    ticks: AtomicU64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        StepClock {
            start,
            step,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::Relaxed);
        self.start + self.step * n as i32
    }
}

/// Receives a question id whenever a question needs an AI answer.
pub trait AnswerJobs: Send + Sync {
    fn enqueue(&self, question: QuestionId);
}

impl AnswerJobs for mpsc::Sender<QuestionId> {
    fn enqueue(&self, question: QuestionId) {
        // a closed receiver means nobody is answering; the question stays
        // listed in `questions_awaiting_ai`
        let _ = self.send(question);
    }
}

enum Sink {
    Memory(Vec<LogRecord>),
    File(EventLog),
}

struct Inner {
    state: ForumState,
    sink: Sink,
}

impl Inner {
    fn commit(
        &mut self,
        clock: &dyn Clock,
        event: Event,
        key: Option<&str>,
    ) -> Result<Outcome, ForumError> {
        self.state.validate(&event)?;
        let record = LogRecord {
            seq: self.state.last_seq() + 1,
            timestamp: clock.now(),
            event,
            idempotency_key: key.map(str::to_string),
        };
        match &mut self.sink {
            Sink::Memory(records) => records.push(record.clone()),
            Sink::File(log) => log.append(&record)?,
        }
        self.state.apply(&record)
    }
}

/// Parameters of a new question.
#[derive(Debug, Clone, Default)]
pub struct NewQuestion {
    pub body: String,
    pub tags: Vec<String>,
    pub anonymous: bool,
    pub attachments: Vec<String>,
}

pub struct Forum {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    jobs: Option<Arc<dyn AnswerJobs>>,
    data_dir: Option<PathBuf>,
}

pub const DEFAULT_AI_USER: &str = "ai-facilitator";
pub const DEFAULT_AI_NAME: &str = "AI Facilitator";

impl Forum {
    /// A forum whose log lives only in memory.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Forum {
            inner: Mutex::new(Inner {
                state: ForumState::new(),
                sink: Sink::Memory(Vec::new()),
            }),
            clock,
            jobs: None,
            data_dir: None,
        }
    }

    /// Opens (or creates) a data directory, replaying its snapshot and log.
    pub fn open(dir: &Path, clock: Arc<dyn Clock>, durable: bool) -> Result<Self, ForumError> {
        let (state, log) = open_data_dir(dir, durable)?;
        Ok(Forum {
            inner: Mutex::new(Inner {
                state,
                sink: Sink::File(log),
            }),
            clock,
            jobs: None,
            data_dir: Some(dir.to_path_buf()),
        })
    }

    pub fn with_jobs(mut self, jobs: Arc<dyn AnswerJobs>) -> Self {
        self.jobs = Some(jobs);
        self
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Read access to the current state.
    pub fn read<R>(&self, f: impl FnOnce(&ForumState) -> R) -> R {
        f(&self.lock().state)
    }

    pub fn state(&self) -> ForumState {
        self.read(ForumState::clone)
    }

    /// Records appended so far, for in-memory forums.
    pub fn memory_log(&self) -> Option<Vec<LogRecord>> {
        match &self.lock().sink {
            Sink::Memory(records) => Some(records.clone()),
            Sink::File(_) => None,
        }
    }

    /// Writes a snapshot of the current state into the data directory.
    pub fn snapshot(&self) -> Result<(), ForumError> {
        let inner = self.lock();
        if let Some(dir) = &self.data_dir {
            write_snapshot(dir, &inner.state)?;
        }
        Ok(())
    }

    /// Registers a user; re-registering identical details is a no-op.
    pub fn register_user(
        &self,
        user_id: UserId,
        display_name: &str,
        role: Role,
        cohort_id: Option<CohortId>,
    ) -> Result<User, ForumError> {
        let mut inner = self.lock();
        if let Some(existing) = inner.state.user(&user_id) {
            let same = existing.display_name == display_name
                && existing.role == role
                && existing.cohort_id == cohort_id;
            return if same {
                Ok(existing.clone())
            } else {
                Err(ForumError::AlreadyExists(format!("user {user_id}")))
            };
        }
        let event = Event::UserRegistered {
            user_id: user_id.clone(),
            display_name: display_name.to_string(),
            role,
            cohort_id,
        };
        inner.commit(self.clock.as_ref(), event, None)?;
        Ok(inner.state.user(&user_id).cloned().expect("just registered"))
    }

    /// Returns the AI user, registering it on first use.
    pub fn ensure_ai_user(&self, user_id: &str, display_name: &str) -> Result<UserId, ForumError> {
        if let Some(id) = self.read(|s| s.ai_user().cloned()) {
            return Ok(id);
        }
        self.register_user(UserId::new(user_id), display_name, Role::Ai, None)
            .map(|u| u.user_id)
    }

    pub fn create_cohort(
        &self,
        cohort_id: CohortId,
        name: &str,
        key: Option<&str>,
    ) -> Result<Cohort, ForumError> {
        let mut inner = self.lock();
        let id = match key.and_then(|k| inner.state.outcome_for_key(k)).cloned() {
            Some(Outcome::Cohort(id)) if id == cohort_id => id,
            Some(_) => return Err(ForumError::KeyConflict(key.unwrap_or_default().into())),
            None => {
                let event = Event::CohortCreated {
                    cohort_id: cohort_id.clone(),
                    name: name.to_string(),
                };
                inner.commit(self.clock.as_ref(), event, key)?;
                cohort_id
            }
        };
        Ok(inner.state.cohort(&id).cloned().expect("cohort exists"))
    }

    /// Stores a question and enqueues its AI answer.
    pub fn post_question(
        &self,
        cohort: &CohortId,
        author: &UserId,
        question: NewQuestion,
        key: Option<&str>,
    ) -> Result<ForumQuestion, ForumError> {
        let (posted, is_new) = {
            let mut inner = self.lock();
            match key.and_then(|k| inner.state.outcome_for_key(k)).cloned() {
                Some(Outcome::Question(id))
                    if inner.state.question(id).is_some_and(|q| {
                        q.cohort_id == *cohort && q.author_id == *author && q.body == question.body
                    }) =>
                {
                    (id, false)
                }
                Some(_) => return Err(ForumError::KeyConflict(key.unwrap_or_default().into())),
                None => {
                    let verdict = detect_language(&question.body).map_err(|e| match e {
                        LanguageError::EmptyText => ForumError::EmptyBody,
                        other => ForumError::Invalid(other.to_string()),
                    })?;
                    let id = inner.state.next_question_id();
                    let event = Event::QuestionPosted {
                        question_id: id,
                        cohort_id: cohort.clone(),
                        author_id: author.clone(),
                        anonymous: question.anonymous,
                        body: question.body,
                        tags: normalize_tags(&question.tags),
                        attachments: question.attachments,
                        detected_language: verdict.language,
                    };
                    inner.commit(self.clock.as_ref(), event, key)?;
                    (id, true)
                }
            }
        };
        if is_new {
            if let Some(jobs) = &self.jobs {
                jobs.enqueue(posted);
            }
        }
        Ok(self.read(|s| s.question(posted).cloned()).expect("question exists"))
    }

    /// Answers a question with the AI pipeline, at most once per question.
    /// A second attempt returns the answer that won.
    pub fn post_ai_answer(
        &self,
        question_id: QuestionId,
        pipeline: &Pipeline,
    ) -> Result<ForumAnswer, ForumError> {
        let (question, ai_user) = {
            let inner = self.lock();
            let q = inner
                .state
                .question(question_id)
                .cloned()
                .ok_or(ForumError::UnknownQuestion(question_id))?;
            if let Some(existing) = inner.state.ai_answer_for(question_id) {
                return Ok(existing.clone());
            }
            let ai = inner.state.ai_user().cloned().ok_or(ForumError::NoAiUser)?;
            (q, ai)
        };

        let input = QuestionInput {
            text: question.body.clone(),
            tags: question.tags.clone(),
            attachments: question.attachments.clone(),
        };
        let (body, citations, fallback) = match pipeline.answer_question(&input) {
            Ok(answer) => (answer.body, answer.citations, false),
            Err(RagError::NoContext { language }) => {
                (fallback_answer(language).to_string(), Vec::new(), true)
            }
            Err(e) => return Err(ForumError::Generation(e.to_string())),
        };

        let mut inner = self.lock();
        if let Some(existing) = inner.state.ai_answer_for(question_id) {
            return Ok(existing.clone());
        }
        let id = inner.state.next_answer_id();
        let event = Event::AnswerPosted {
            answer_id: id,
            question_id,
            author_id: ai_user,
            body,
            citations,
            fallback,
        };
        inner.commit(self.clock.as_ref(), event, None)?;
        Ok(inner.state.answer(id).cloned().expect("answer exists"))
    }

    pub fn post_human_answer(
        &self,
        question_id: QuestionId,
        author: &UserId,
        body: &str,
        key: Option<&str>,
    ) -> Result<ForumAnswer, ForumError> {
        let mut inner = self.lock();
        let id = match key.and_then(|k| inner.state.outcome_for_key(k)).cloned() {
            Some(Outcome::Answer(id))
                if inner.state.answer(id).is_some_and(|a| {
                    a.question_id == question_id && a.author_id == *author && a.body == body
                }) =>
            {
                id
            }
            Some(_) => return Err(ForumError::KeyConflict(key.unwrap_or_default().into())),
            None => {
                inner.state.question(question_id).ok_or(ForumError::UnknownQuestion(question_id))?;
                let user = inner
                    .state
                    .user(author)
                    .ok_or_else(|| ForumError::UnknownUser(author.clone()))?;
                if user.role == Role::Ai {
                    return Err(ForumError::AiNotAllowed);
                }
                let id = inner.state.next_answer_id();
                let event = Event::AnswerPosted {
                    answer_id: id,
                    question_id,
                    author_id: author.clone(),
                    body: body.to_string(),
                    citations: Vec::new(),
                    fallback: false,
                };
                inner.commit(self.clock.as_ref(), event, key)?;
                id
            }
        };
        Ok(inner.state.answer(id).cloned().expect("answer exists"))
    }

    /// Sets (or with `None`, retracts) the voter's single live vote on an
    /// answer. Repeating the current vote changes nothing.
    pub fn vote(
        &self,
        voter: &UserId,
        answer_id: AnswerId,
        direction: Option<VoteDirection>,
        key: Option<&str>,
    ) -> Result<Tallies, ForumError> {
        let mut inner = self.lock();
        match key.and_then(|k| inner.state.outcome_for_key(k)).cloned() {
            Some(Outcome::AnswerVote(id)) if id == answer_id => {}
            Some(_) => return Err(ForumError::KeyConflict(key.unwrap_or_default().into())),
            None => {
                let event = Event::AnswerVoted {
                    answer_id,
                    voter_id: voter.clone(),
                    direction,
                };
                inner.state.validate(&event)?;
                if inner.state.answer_vote(answer_id, voter) != direction {
                    inner.commit(self.clock.as_ref(), event, key)?;
                }
            }
        }
        let a = inner.state.answer(answer_id).expect("validated");
        Ok(Tallies {
            answer_id,
            upvotes: a.upvotes,
            downvotes: a.downvotes,
        })
    }

    /// Adds or removes the voter's upvote on a question. Returns the new count.
    pub fn vote_question(
        &self,
        voter: &UserId,
        question_id: QuestionId,
        up: bool,
        key: Option<&str>,
    ) -> Result<u64, ForumError> {
        let mut inner = self.lock();
        match key.and_then(|k| inner.state.outcome_for_key(k)).cloned() {
            Some(Outcome::QuestionVote(id)) if id == question_id => {}
            Some(_) => return Err(ForumError::KeyConflict(key.unwrap_or_default().into())),
            None => {
                let event = Event::QuestionVoted {
                    question_id,
                    voter_id: voter.clone(),
                    up,
                };
                inner.state.validate(&event)?;
                let has_vote = inner.state.question_votes().any(|(q, u)| q == question_id && u == voter);
                if has_vote != up {
                    inner.commit(self.clock.as_ref(), event, key)?;
                }
            }
        }
        Ok(inner.state.question(question_id).expect("validated").upvotes)
    }

    /// Marks `answer_id` as the accepted answer of its question, replacing
    /// any previous acceptance.
    pub fn accept_answer(
        &self,
        asker: &UserId,
        answer_id: AnswerId,
        key: Option<&str>,
    ) -> Result<AcceptState, ForumError> {
        let mut inner = self.lock();
        let answer = inner
            .state
            .answer(answer_id)
            .ok_or(ForumError::UnknownAnswer(answer_id))?;
        let question_id = answer.question_id;
        let previous = inner.state.accepted_for(question_id);
        match key.and_then(|k| inner.state.outcome_for_key(k)).cloned() {
            Some(Outcome::Acceptance(q)) if q == question_id => {}
            Some(_) => return Err(ForumError::KeyConflict(key.unwrap_or_default().into())),
            None => {
                let event = Event::AnswerAccepted {
                    question_id,
                    answer_id,
                    accepted_by: asker.clone(),
                };
                inner.state.validate(&event)?;
                if previous != Some(answer_id) {
                    inner.commit(self.clock.as_ref(), event, key)?;
                }
            }
        }
        Ok(AcceptState {
            question_id,
            accepted_answer_id: inner.state.accepted_for(question_id).expect("accepted"),
            previously_accepted: previous.filter(|p| *p != answer_id),
        })
    }

    /// Checks that `answer_id` belongs to `question_id` before accepting it.
    pub fn accept_answer_on(
        &self,
        asker: &UserId,
        question_id: QuestionId,
        answer_id: AnswerId,
        key: Option<&str>,
    ) -> Result<AcceptState, ForumError> {
        let on_question = self.read(|s| {
            s.question(question_id).ok_or(ForumError::UnknownQuestion(question_id))?;
            let a = s.answer(answer_id).ok_or(ForumError::UnknownAnswer(answer_id))?;
            Ok::<_, ForumError>(a.question_id == question_id)
        })?;
        if !on_question {
            return Err(ForumError::AnswerNotOnQuestion {
                answer: answer_id,
                question: question_id,
            });
        }
        self.accept_answer(asker, answer_id, key)
    }

    pub fn helpfulness(&self, user: &UserId) -> Helpfulness {
        self.read(|s| s.helpfulness(user))
    }

    pub fn leaderboard(&self, cohort: &CohortId, n: usize) -> Vec<LeaderboardEntry> {
        self.read(|s| s.leaderboard(cohort, n.max(1)))
    }

    pub fn question_view(&self, question: QuestionId, viewer: Option<&UserId>) -> Option<QuestionView> {
        self.read(|s| question_view(s, question, viewer))
    }

    /// Every question of a cohort, oldest first.
    pub fn list_questions(&self, cohort: &CohortId, viewer: Option<&UserId>) -> Vec<QuestionView> {
        self.read(|s| {
            s.questions()
                .filter(|q| &q.cohort_id == cohort)
                .filter_map(|q| question_view(s, q.question_id, viewer))
                .collect()
        })
    }

    pub fn questions_awaiting_ai(&self) -> Vec<QuestionId> {
        self.read(ForumState::questions_awaiting_ai)
    }
}
