//! Random forum operation sequences checked against an independent model.
//!
//! The model keeps its own ledger of who voted what and which answer is
//! accepted, predicts whether each operation is accepted or rejected, and
//! recomputes tallies and helpfulness from that ledger after every step.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Duration};
use rand::seq::IndexedRandom;
use rand::Rng;

use coursemate_core::forum::{
    AnswerId, Badge, CohortId, Forum, ForumError, ForumState, NewQuestion, QuestionId, Role,
    StepClock, UserId, VoteDirection,
};
use coursemate_core::index::{Index, ReferenceEmbedder};
use coursemate_core::rag::{Pipeline, StubBackend};
use coursemate_core::{Language, SourceDocument};

pub const QUESTIONS: &[&str] = &[
    "How do I declare a variable in my sketch?",
    "Why does the ball go through the paddle?",
    "When is the deadline for the assignment?",
    "How do I make the ball bounce off the wall?",
    "Comment déclarer une variable dans mon programme ?",
    "Pourquoi la balle traverse la raquette ?",
    "Quand est la date limite pour le devoir ?",
    "Comment faire rebondir la balle sur le mur ?",
];

/// A two-language pipeline over a handful of passages.
pub fn small_pipeline() -> Pipeline {
    let doc = |id: &str, lang, body: &str, tag: &str| SourceDocument {
        doc_id: id.into(),
        language: lang,
        title: format!("Notes {id}"),
        body: body.into(),
        section_tags: vec![tag.into()],
    };
    let docs = vec![
        doc("en-a", Language::En, "Declare a variable with its type and name. Use int for whole numbers.\n\nTo bounce the ball, reverse its speed when it reaches a wall.", "section-2"),
        doc("en-b", Language::En, "Assignments are due at the end of each week. Late submissions are graded later.", "admin"),
        doc("fr-a", Language::Fr, "Déclarez une variable avec son type et son nom. Utilisez int pour les entiers.\n\nPour faire rebondir la balle, inversez sa vitesse quand elle touche un mur.", "section-2"),
        doc("fr-b", Language::Fr, "Les devoirs sont à rendre à la fin de chaque semaine.", "admin"),
    ];
    let provider = Arc::new(ReferenceEmbedder::default());
    let index = Index::build_from_documents(&docs, provider.as_ref()).expect("small index builds");
    Pipeline::new(Arc::new(index), provider, Arc::new(StubBackend))
}

pub fn step_clock() -> Arc<StepClock> {
    Arc::new(StepClock::new(
        DateTime::from_timestamp(1_730_000_000, 0).expect("valid timestamp"),
        Duration::seconds(1),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Ask { user: usize, cohort: usize, body: usize, anonymous: bool },
    AiAnswer { question: u64 },
    HumanAnswer { question: u64, user: usize },
    Vote { user: usize, answer: u64, direction: Option<VoteDirection> },
    VoteQuestion { user: usize, question: u64, up: bool },
    Accept { user: usize, answer: u64 },
}

/// Which rejection the model expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Ok,
    UnknownQuestion,
    UnknownAnswer,
    NotInCohort,
    SelfVote,
    NotAsker,
    AiNotAllowed,
}

fn classify(e: &ForumError) -> Expect {
    match e {
        ForumError::UnknownQuestion(_) => Expect::UnknownQuestion,
        ForumError::UnknownAnswer(_) => Expect::UnknownAnswer,
        ForumError::NotInCohort { .. } => Expect::NotInCohort,
        ForumError::SelfVote => Expect::SelfVote,
        ForumError::NotAsker => Expect::NotAsker,
        ForumError::AiNotAllowed => Expect::AiNotAllowed,
        other => panic!("unexpected forum error: {other}"),
    }
}

#[derive(Debug, Default, Clone)]
struct Model {
    questions: BTreeMap<u64, (usize, usize)>,
    answers: BTreeMap<u64, (u64, usize)>,
    ai_answered: BTreeSet<u64>,
    accepted: BTreeMap<u64, u64>,
    answer_votes: BTreeMap<(u64, usize), VoteDirection>,
    question_votes: BTreeSet<(u64, usize)>,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SimStats {
    pub ops: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub questions: usize,
    pub answers: usize,
}

pub const COHORTS: usize = 2;
pub const HUMANS_PER_COHORT: usize = 5;

/// Drives a forum and its model in lockstep. User index `humans.len()` is
/// the AI.
pub struct Sim {
    pub forum: Forum,
    pipeline: Pipeline,
    cohorts: Vec<CohortId>,
    users: Vec<(UserId, Option<usize>)>,
    model: Model,
    pub stats: SimStats,
}

impl Sim {
    pub fn new(forum: Forum, pipeline: Pipeline) -> Sim {
        let cohorts: Vec<CohortId> = (0..COHORTS).map(|c| CohortId::new(format!("c{c}"))).collect();
        for c in &cohorts {
            forum.create_cohort(c.clone(), &format!("Cohort {c}"), None).expect("cohort");
        }
        let mut users = Vec::new();
        for (ci, c) in cohorts.iter().enumerate() {
            for u in 0..HUMANS_PER_COHORT {
                let id = UserId::new(format!("{c}-u{u}"));
                let role = if u == 0 { Role::Facilitator } else { Role::Learner };
                forum
                    .register_user(id.clone(), &format!("User {u} of {c}"), role, Some(c.clone()))
                    .expect("user");
                users.push((id, Some(ci)));
            }
        }
        let ai = forum.ensure_ai_user("ai", "AI").expect("ai user");
        users.push((ai, None));
        Sim {
            forum,
            pipeline,
            cohorts,
            users,
            model: Model::default(),
            stats: SimStats::default(),
        }
    }

    pub fn in_memory() -> Sim {
        Sim::new(Forum::in_memory(step_clock()), small_pipeline())
    }

    fn ai_index(&self) -> usize {
        self.users.len() - 1
    }

    /// A random operation, biased towards ids that exist.
    pub fn random_op<R: Rng>(&self, rng: &mut R) -> Op {
        let user = rng.random_range(0..self.users.len());
        let human = rng.random_range(0..self.users.len() - 1);
        let nq = self.model.questions.len() as u64;
        let na = self.model.answers.len() as u64;
        // ids start at 1; one past the end is unknown
        let mut pick = |n: u64| {
            let past_end = u64::from(rng.random_bool(0.05));
            rng.random_range(1..=(n + past_end).max(1))
        };
        let question = pick(nq);
        let answer = pick(na);
        match rng.random_range(0..100) {
            0..15 => Op::Ask {
                user: human,
                cohort: if rng.random_bool(0.9) {
                    self.users[human].1.expect("human cohort")
                } else {
                    rng.random_range(0..COHORTS)
                },
                body: rng.random_range(0..QUESTIONS.len()),
                anonymous: rng.random_bool(0.3),
            },
            15..30 => Op::AiAnswer { question },
            30..42 => Op::HumanAnswer { question, user: human },
            42..72 => Op::Vote {
                user,
                answer,
                direction: *[Some(VoteDirection::Up), Some(VoteDirection::Up), Some(VoteDirection::Down), None]
                    .choose(rng)
                    .expect("non-empty"),
            },
            72..84 => Op::VoteQuestion { user, question, up: rng.random_bool(0.75) },
            _ => {
                // mostly let the asker accept
                let user = match self.model.answers.get(&answer) {
                    Some((q, _)) if rng.random_bool(0.8) => self.model.questions[q].1,
                    _ => user,
                };
                Op::Accept { user, answer }
            }
        }
    }

    fn question_cohort(&self, q: u64) -> Option<usize> {
        self.model.questions.get(&q).map(|(c, _)| *c)
    }

    fn predict(&self, op: &Op) -> Expect {
        let ai = self.ai_index();
        match *op {
            Op::Ask { user, cohort, .. } => {
                if self.users[user].1 != Some(cohort) {
                    Expect::NotInCohort
                } else {
                    Expect::Ok
                }
            }
            Op::AiAnswer { question } => {
                if self.model.questions.contains_key(&question) {
                    Expect::Ok
                } else {
                    Expect::UnknownQuestion
                }
            }
            Op::HumanAnswer { question, user } => match self.question_cohort(question) {
                None => Expect::UnknownQuestion,
                Some(c) if self.users[user].1 != Some(c) => Expect::NotInCohort,
                Some(_) => Expect::Ok,
            },
            Op::Vote { user, answer, .. } => match self.model.answers.get(&answer) {
                None => Expect::UnknownAnswer,
                Some((_, author)) if *author == user => Expect::SelfVote,
                Some(_) if user == ai => Expect::AiNotAllowed,
                Some((q, _)) if self.users[user].1 != self.question_cohort(*q) => Expect::NotInCohort,
                Some(_) => Expect::Ok,
            },
            Op::VoteQuestion { user, question, .. } => match self.model.questions.get(&question) {
                None => Expect::UnknownQuestion,
                Some((_, author)) if *author == user => Expect::SelfVote,
                Some(_) if user == ai => Expect::AiNotAllowed,
                Some((c, _)) if self.users[user].1 != Some(*c) => Expect::NotInCohort,
                Some(_) => Expect::Ok,
            },
            Op::Accept { user, answer } => match self.model.answers.get(&answer) {
                None => Expect::UnknownAnswer,
                Some((q, _)) if self.model.questions[q].1 != user => Expect::NotAsker,
                Some(_) => Expect::Ok,
            },
        }
    }

    /// Badge of whoever gains from `op`, if it can only raise their score.
    fn beneficiary(&self, op: &Op) -> Option<usize> {
        match *op {
            Op::Vote { answer, direction: Some(VoteDirection::Up), .. } => {
                self.model.answers.get(&answer).map(|(_, a)| *a)
            }
            Op::VoteQuestion { question, up: true, .. } => {
                self.model.questions.get(&question).map(|(_, a)| *a)
            }
            _ => None,
        }
    }

    /// Applies `op` to the forum and the model, then checks every invariant.
    pub fn step(&mut self, op: &Op) {
        let expect = self.predict(op);
        let gainer = self.beneficiary(op);
        let badge_before = gainer.map(|u| self.forum.helpfulness(&self.users[u].0).badge);

        let got = self.execute(op);
        self.stats.ops += 1;
        match got {
            Ok(()) => {
                assert_eq!(expect, Expect::Ok, "forum accepted {op:?}");
                self.stats.accepted += 1;
            }
            Err(e) => {
                assert_eq!(expect, classify(&e), "forum rejected {op:?} with {e}");
                self.stats.rejected += 1;
            }
        }

        if let (Some(u), Some(before)) = (gainer, badge_before) {
            let after = self.forum.helpfulness(&self.users[u].0).badge;
            assert!(after >= before, "badge dropped from {before:?} to {after:?} after {op:?}");
        }
        self.check();
    }

    fn execute(&mut self, op: &Op) -> Result<(), ForumError> {
        match *op {
            Op::Ask { user, cohort, body, anonymous } => {
                let q = self.forum.post_question(
                    &self.cohorts[cohort],
                    &self.users[user].0,
                    NewQuestion {
                        body: QUESTIONS[body].to_string(),
                        anonymous,
                        ..Default::default()
                    },
                    None,
                )?;
                assert_eq!(q.question_id.0, self.model.questions.len() as u64 + 1);
                self.model.questions.insert(q.question_id.0, (cohort, user));
                self.stats.questions += 1;
            }
            Op::AiAnswer { question } => {
                let a = self.forum.post_ai_answer(QuestionId(question), &self.pipeline)?;
                if self.model.ai_answered.insert(question) {
                    assert_eq!(a.answer_id.0, self.model.answers.len() as u64 + 1);
                    assert!(!a.citations.is_empty(), "AI answer without citations");
                    self.model.answers.insert(a.answer_id.0, (question, self.ai_index()));
                    self.stats.answers += 1;
                } else {
                    let (q, author) = self.model.answers[&a.answer_id.0];
                    assert_eq!((q, author), (question, self.ai_index()), "second AI answer differs");
                }
            }
            Op::HumanAnswer { question, user } => {
                let a = self.forum.post_human_answer(
                    QuestionId(question),
                    &self.users[user].0,
                    "Check the lesson notes for this section.",
                    None,
                )?;
                assert_eq!(a.answer_id.0, self.model.answers.len() as u64 + 1);
                self.model.answers.insert(a.answer_id.0, (question, user));
                self.stats.answers += 1;
            }
            Op::Vote { user, answer, direction } => {
                let t = self.forum.vote(&self.users[user].0, AnswerId(answer), direction, None)?;
                match direction {
                    Some(d) => self.model.answer_votes.insert((answer, user), d),
                    None => self.model.answer_votes.remove(&(answer, user)),
                };
                assert_eq!((t.upvotes, t.downvotes), self.recount_votes(answer));
            }
            Op::VoteQuestion { user, question, up } => {
                let n = self.forum.vote_question(&self.users[user].0, QuestionId(question), up, None)?;
                if up {
                    self.model.question_votes.insert((question, user));
                } else {
                    self.model.question_votes.remove(&(question, user));
                }
                assert_eq!(n, self.recount_question_votes(question));
            }
            Op::Accept { user, answer } => {
                let s = self.forum.accept_answer(&self.users[user].0, AnswerId(answer), None)?;
                let q = self.model.answers[&answer].0;
                self.model.accepted.insert(q, answer);
                assert_eq!(s.accepted_answer_id.0, answer);
            }
        }
        Ok(())
    }

    fn recount_votes(&self, answer: u64) -> (u64, u64) {
        let mut up = 0;
        let mut down = 0;
        for ((a, _), d) in &self.model.answer_votes {
            if *a == answer {
                match d {
                    VoteDirection::Up => up += 1,
                    VoteDirection::Down => down += 1,
                }
            }
        }
        (up, down)
    }

    fn recount_question_votes(&self, question: u64) -> u64 {
        self.model.question_votes.iter().filter(|(q, _)| *q == question).count() as u64
    }

    /// Helpfulness recomputed from the model's ledger.
    pub fn expected_score(&self, user: usize) -> u64 {
        let mut accepted = 0i64;
        let mut up = 0i64;
        let mut down = 0i64;
        for (a, (_, author)) in &self.model.answers {
            if *author != user {
                continue;
            }
            let (u, d) = self.recount_votes(*a);
            up += u as i64;
            down += d as i64;
            if self.model.accepted.values().any(|x| x == a) {
                accepted += 1;
            }
        }
        let q_up = self
            .model
            .question_votes
            .iter()
            .filter(|(q, _)| self.model.questions[q].1 == user)
            .count() as i64;
        (3 * accepted + 2 * up + q_up - down).max(0) as u64
    }

    fn expected_badge(score: u64) -> Badge {
        if score >= 50 {
            Badge::Gold
        } else if score >= 20 {
            Badge::Silver
        } else if score >= 5 {
            Badge::Bronze
        } else {
            Badge::None
        }
    }

    /// Every invariant the forum must hold after any operation.
    pub fn check(&self) {
        let state = self.forum.state();
        for q in self.model.questions.keys() {
            let answers: Vec<_> = state.answers_for(QuestionId(*q)).collect();
            let ai_answers = answers
                .iter()
                .filter(|a| state.user(&a.author_id).map(|u| u.role) == Some(Role::Ai))
                .count();
            assert!(ai_answers <= 1, "question {q} has {ai_answers} AI answers");
            let accepted: Vec<u64> = answers.iter().filter(|a| a.accepted).map(|a| a.answer_id.0).collect();
            assert!(accepted.len() <= 1, "question {q} has {} accepted answers", accepted.len());
            assert_eq!(accepted.first().copied(), self.model.accepted.get(q).copied());
        }
        for a in state.answers() {
            let (up, down) = self.recount_votes(a.answer_id.0);
            assert_eq!((a.upvotes, a.downvotes), (up, down), "tallies of answer {}", a.answer_id);
            let ledger_up = state
                .answer_votes()
                .filter(|(id, _, d)| *id == a.answer_id && *d == VoteDirection::Up)
                .count() as u64;
            assert_eq!(a.upvotes, ledger_up);
        }
        for q in state.questions() {
            assert_eq!(q.upvotes, self.recount_question_votes(q.question_id.0));
        }
        let mut by_score: Vec<(u64, Badge)> = Vec::new();
        for (i, (id, _)) in self.users.iter().enumerate() {
            let h = state.helpfulness(id);
            let expected = self.expected_score(i);
            assert_eq!(h.score, expected, "helpfulness of {id}");
            assert_eq!(h.badge, Self::expected_badge(expected), "badge of {id}");
            by_score.push((h.score, h.badge));
        }
        by_score.sort();
        assert!(
            by_score.windows(2).all(|w| w[0].1 <= w[1].1),
            "badges not monotone in score: {by_score:?}"
        );
    }

    /// Rebuilds state from the in-memory log and compares it with the live one.
    pub fn check_replay(&self) {
        let log = self.forum.memory_log().expect("in-memory forum");
        let mut replayed = ForumState::new();
        for record in &log {
            replayed.apply(record).expect("logged record replays");
        }
        assert!(replayed == self.forum.state(), "replayed state differs from live state");
    }

    pub fn run<R: Rng>(&mut self, rng: &mut R, ops: usize) {
        for _ in 0..ops {
            let op = self.random_op(rng);
            self.step(&op);
        }
    }
}
