use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::language::Language;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

macro_rules! numeric_id {
    ($name:ident) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

string_id!(UserId);
string_id!(CohortId);
numeric_id!(QuestionId);
numeric_id!(AnswerId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Learner,
    Facilitator,
    Ai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Badge {
    None,
    Bronze,
    Silver,
    Gold,
}

pub const BRONZE_THRESHOLD: u64 = 5;
pub const SILVER_THRESHOLD: u64 = 20;
pub const GOLD_THRESHOLD: u64 = 50;

impl Badge {
    pub fn for_score(score: u64) -> Badge {
        match score {
            s if s >= GOLD_THRESHOLD => Badge::Gold,
            s if s >= SILVER_THRESHOLD => Badge::Silver,
            s if s >= BRONZE_THRESHOLD => Badge::Bronze,
            _ => Badge::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteDirection {
    Up,
    Down,
}

pub const ACCEPTED_WEIGHT: i64 = 3;
pub const ANSWER_UPVOTE_WEIGHT: i64 = 2;
pub const QUESTION_UPVOTE_WEIGHT: i64 = 1;
pub const ANSWER_DOWNVOTE_WEIGHT: i64 = 1;

/// Per-user inputs to the helpfulness score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub accepted_answers: u64,
    pub answer_upvotes: u64,
    pub answer_downvotes: u64,
    pub question_upvotes: u64,
}

impl Contribution {
    /// 3 per accepted answer, 2 per answer upvote, 1 per question upvote,
    /// minus 1 per answer downvote, floored at zero.
    pub fn score(&self) -> u64 {
        let raw = ACCEPTED_WEIGHT * self.accepted_answers as i64
            + ANSWER_UPVOTE_WEIGHT * self.answer_upvotes as i64
            + QUESTION_UPVOTE_WEIGHT * self.question_upvotes as i64
            - ANSWER_DOWNVOTE_WEIGHT * self.answer_downvotes as i64;
        raw.max(0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Helpfulness {
    pub score: u64,
    pub badge: Badge,
}

impl From<&Contribution> for Helpfulness {
    fn from(c: &Contribution) -> Self {
        let score = c.score();
        Helpfulness {
            score,
            badge: Badge::for_score(score),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    pub display_name: String,
    pub role: Role,
    /// Human users belong to exactly one cohort; the AI serves all of them.
    pub cohort_id: Option<CohortId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub cohort_id: CohortId,
    pub name: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForumQuestion {
    pub question_id: QuestionId,
    pub cohort_id: CohortId,
    pub author_id: UserId,
    pub anonymous: bool,
    pub body: String,
    pub tags: Vec<String>,
    pub attachments: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub detected_language: Language,
    pub upvotes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForumAnswer {
    pub answer_id: AnswerId,
    pub question_id: QuestionId,
    pub author_id: UserId,
    pub body: String,
    /// Passage ids; present on AI answers, empty on human answers and on the
    /// AI's no-material fallback.
    pub citations: Vec<String>,
    pub upvotes: u64,
    pub downvotes: u64,
    pub accepted: bool,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub answer_id: AnswerId,
    pub upvotes: u64,
    pub downvotes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptState {
    pub question_id: QuestionId,
    pub accepted_answer_id: AnswerId,
    /// The answer that lost its accepted mark, if any.
    pub previously_accepted: Option<AnswerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub user_id: UserId,
    pub display_name: String,
    pub role: Role,
    pub score: u64,
    pub badge: Badge,
}

/// The localized answer the AI posts when retrieval finds no material.
pub fn fallback_answer(language: Language) -> &'static str {
    match language {
        Language::En => {
            "I could not find course material for this question. Please ask a facilitator."
        }
        Language::Fr => {
            "Je n'ai pas trouvé de contenu de cours pour cette question. Veuillez demander à un facilitateur."
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn badge_thresholds() {
        assert_eq!(Badge::for_score(0), Badge::None);
        assert_eq!(Badge::for_score(4), Badge::None);
        assert_eq!(Badge::for_score(5), Badge::Bronze);
        assert_eq!(Badge::for_score(19), Badge::Bronze);
        assert_eq!(Badge::for_score(20), Badge::Silver);
        assert_eq!(Badge::for_score(50), Badge::Gold);
        assert!(Badge::None < Badge::Bronze && Badge::Silver < Badge::Gold);
    }

    #[test]
    fn accepted_plus_two_upvotes_is_bronze() {
        let c = Contribution {
            accepted_answers: 1,
            answer_upvotes: 2,
            ..Default::default()
        };
        let h = Helpfulness::from(&c);
        assert_eq!(h.score, 7);
        assert_eq!(h.badge, Badge::Bronze);
    }

    #[test]
    fn score_floors_at_zero() {
        let c = Contribution {
            answer_downvotes: 4,
            question_upvotes: 1,
            ..Default::default()
        };
        assert_eq!(c.score(), 0);
        assert_eq!(Helpfulness::from(&Contribution::default()).badge, Badge::None);
    }
}
