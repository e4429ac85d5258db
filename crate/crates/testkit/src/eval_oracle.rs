//! One-pass counting oracle for the evaluation metrics, plus a random
//! record generator.

use rand::Rng;

use coursemate_core::eval::{AcceptedBy, Category, EvalRecord};

#[derive(Debug, Default, Clone, Copy)]
pub struct Counts {
    pub total: usize,
    pub valid: usize,
    pub curricular: usize,
    pub ai_correct: usize,
    pub ai_correct_curricular: usize,
    pub ai_correct_administrative: usize,
    pub ai_wrong: usize,
    pub recovered: usize,
    pub covered: usize,
    pub accepted_ai: usize,
    pub accepted_community: usize,
    pub upvoted_any: usize,
    pub upvoted_ai: usize,
    pub upvoted_community: usize,
}

pub fn count(records: &[EvalRecord]) -> Counts {
    let mut c = Counts::default();
    for r in records {
        c.total += 1;
        match r.accepted_by {
            AcceptedBy::Ai => c.accepted_ai += 1,
            AcceptedBy::Community => c.accepted_community += 1,
            AcceptedBy::None => {}
        }
        if r.ai_answer_upvoted || r.community_answer_upvoted {
            c.upvoted_any += 1;
        }
        if r.ai_answer_upvoted {
            c.upvoted_ai += 1;
        }
        if r.community_answer_upvoted {
            c.upvoted_community += 1;
        }
        if !r.valid {
            continue;
        }
        c.valid += 1;
        let curricular = r.category == Some(Category::Curricular);
        if curricular {
            c.curricular += 1;
        }
        if r.ai_correct {
            c.ai_correct += 1;
            if curricular {
                c.ai_correct_curricular += 1;
            } else {
                c.ai_correct_administrative += 1;
            }
        } else {
            c.ai_wrong += 1;
            if r.community_correct {
                c.recovered += 1;
            }
        }
        if r.ai_correct || r.community_correct {
            c.covered += 1;
        }
    }
    c
}

pub fn random_records<R: Rng>(rng: &mut R, n: usize) -> Vec<EvalRecord> {
    (0..n)
        .map(|i| {
            let valid = rng.random_bool(0.9);
            let category = valid.then(|| {
                if rng.random_bool(0.5) {
                    Category::Curricular
                } else {
                    Category::Administrative
                }
            });
            let accepted_by = match rng.random_range(0..10) {
                0 => AcceptedBy::Ai,
                1 => AcceptedBy::Community,
                _ => AcceptedBy::None,
            };
            EvalRecord {
                question_id: format!("r{i}"),
                valid,
                category,
                ai_correct: rng.random_bool(0.7),
                community_correct: rng.random_bool(0.3),
                accepted_by,
                ai_answer_upvoted: rng.random_bool(0.1),
                community_answer_upvoted: rng.random_bool(0.1),
            }
        })
        .collect()
}
