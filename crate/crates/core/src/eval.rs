//! Accuracy and community-feedback metrics over expert-labeled question
//! records.
//!
//! Accuracy denominators only count valid questions. Acceptance and upvote
//! shares are computed over every record, since community feedback does not
//! depend on the expert's validity label. Rates are kept at full precision;
//! [`pct`] rounds to one decimal for display.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no valid records; accuracy is undefined")]
    NoValidRecords,
    #[error("row {row} (line {line}): {message}")]
    InvalidRow {
        row: usize,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Curricular,
    Administrative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptedBy {
    Ai,
    Community,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub valid: bool,
    /// Present exactly when `valid` is true.
    pub category: Option<Category>,
    pub ai_correct: bool,
    pub community_correct: bool,
    pub accepted_by: AcceptedBy,
    pub ai_answer_upvoted: bool,
    pub community_answer_upvoted: bool,
}

pub const CSV_HEADER: [&str; 8] = [
    "question_id",
    "valid",
    "category",
    "ai_correct",
    "community_correct",
    "accepted_by",
    "ai_answer_upvoted",
    "community_answer_upvoted",
];

fn flag(field: &str, value: &str) -> Result<bool, String> {
    match value.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(format!("{field} must be 0 or 1, got {other:?}")),
    }
}

fn parse_row(fields: &csv::StringRecord) -> Result<EvalRecord, String> {
    if fields.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, got {}", CSV_HEADER.len(), fields.len()));
    }
    let question_id = fields[0].trim().to_string();
    if question_id.is_empty() {
        return Err("question_id is empty".into());
    }
    let valid = flag("valid", &fields[1])?;
    let category = match fields[2].trim().to_ascii_lowercase().as_str() {
        "" => None,
        "curricular" => Some(Category::Curricular),
        "administrative" => Some(Category::Administrative),
        other => return Err(format!("unknown category {other:?}")),
    };
    if valid != category.is_some() {
        return Err(if valid {
            "valid question has no category".into()
        } else {
            "invalid question must not have a category".into()
        });
    }
    let accepted_by = match fields[5].trim().to_ascii_lowercase().as_str() {
        "ai" => AcceptedBy::Ai,
        "community" => AcceptedBy::Community,
        "none" | "" => AcceptedBy::None,
        other => return Err(format!("unknown accepted_by {other:?}")),
    };
    Ok(EvalRecord {
        question_id,
        valid,
        category,
        ai_correct: flag("ai_correct", &fields[3])?,
        community_correct: flag("community_correct", &fields[4])?,
        accepted_by,
        ai_answer_upvoted: flag("ai_answer_upvoted", &fields[6])?,
        community_answer_upvoted: flag("community_answer_upvoted", &fields[7])?,
    })
}

/// Parses labeled records from CSV text with a header row.
pub fn parse_records<R: std::io::Read>(input: R) -> Result<Vec<EvalRecord>, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or_default();
        let record = parse_row(&row).map_err(|message| EvalError::InvalidRow {
            row: i + 1,
            line,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    parse_records(std::fs::File::open(path)?)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Percentage with one decimal, e.g. `0.76734 -> "76.7%"`.
pub fn pct(rate: f64) -> String {
    format!("{:.1}%", rate * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub n_valid: usize,
    pub n_correct: usize,
    pub overall: f64,
    pub curricular: Option<f64>,
    pub administrative: Option<f64>,
}

fn valid(records: &[EvalRecord]) -> impl Iterator<Item = &EvalRecord> {
    records.iter().filter(|r| r.valid)
}

/// Share of valid questions the AI answered correctly, overall and per
/// category.
pub fn ai_accuracy(records: &[EvalRecord]) -> Result<Accuracy, EvalError> {
    let n_valid = valid(records).count();
    if n_valid == 0 {
        return Err(EvalError::NoValidRecords);
    }
    let n_correct = valid(records).filter(|r| r.ai_correct).count();
    let per = |c: Category| {
        let in_cat: Vec<_> = valid(records).filter(|r| r.category == Some(c)).collect();
        ratio(in_cat.iter().filter(|r| r.ai_correct).count(), in_cat.len())
    };
    Ok(Accuracy {
        n_valid,
        n_correct,
        overall: n_correct as f64 / n_valid as f64,
        curricular: per(Category::Curricular),
        administrative: per(Category::Administrative),
    })
}

/// Share of valid questions answered correctly by the AI or the community.
pub fn combined_accuracy(records: &[EvalRecord]) -> Result<f64, EvalError> {
    let n_valid = valid(records).count();
    if n_valid == 0 {
        return Err(EvalError::NoValidRecords);
    }
    let covered = valid(records)
        .filter(|r| r.ai_correct || r.community_correct)
        .count();
    Ok(covered as f64 / n_valid as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub n_ai_incorrect: usize,
    pub n_recovered: usize,
    /// Absent when the AI missed no valid question.
    pub rate: Option<f64>,
}

/// Of the valid questions the AI got wrong, the share the community then
/// answered correctly.
pub fn community_recovery(records: &[EvalRecord]) -> Recovery {
    let missed: Vec<_> = valid(records).filter(|r| !r.ai_correct).collect();
    let n_recovered = missed.iter().filter(|r| r.community_correct).count();
    Recovery {
        n_ai_incorrect: missed.len(),
        n_recovered,
        rate: ratio(n_recovered, missed.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityFeedback {
    pub n_accepted: usize,
    pub accepted_share_ai: Option<f64>,
    pub accepted_share_community: Option<f64>,
    pub n_upvoted_questions: usize,
    /// Upvote shares may sum past 1: a question can have upvoted answers
    /// from both the AI and the community.
    pub upvoted_share_ai: Option<f64>,
    pub upvoted_share_community: Option<f64>,
}

pub fn community_feedback(records: &[EvalRecord]) -> CommunityFeedback {
    let accepted_ai = records.iter().filter(|r| r.accepted_by == AcceptedBy::Ai).count();
    let accepted_community = records
        .iter()
        .filter(|r| r.accepted_by == AcceptedBy::Community)
        .count();
    let n_accepted = accepted_ai + accepted_community;

    let upvoted: Vec<_> = records
        .iter()
        .filter(|r| r.ai_answer_upvoted || r.community_answer_upvoted)
        .collect();
    let n_upvoted = upvoted.len();
    CommunityFeedback {
        n_accepted,
        accepted_share_ai: ratio(accepted_ai, n_accepted),
        accepted_share_community: ratio(accepted_community, n_accepted),
        n_upvoted_questions: n_upvoted,
        upvoted_share_ai: ratio(upvoted.iter().filter(|r| r.ai_answer_upvoted).count(), n_upvoted),
        upvoted_share_community: ratio(
            upvoted.iter().filter(|r| r.community_answer_upvoted).count(),
            n_upvoted,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorySplit {
    pub n_curricular: usize,
    pub n_administrative: usize,
    pub pct_curricular: f64,
    pub pct_administrative: f64,
}

pub fn category_split(records: &[EvalRecord]) -> Result<CategorySplit, EvalError> {
    let n_valid = valid(records).count();
    if n_valid == 0 {
        return Err(EvalError::NoValidRecords);
    }
    let n_curricular = valid(records)
        .filter(|r| r.category == Some(Category::Curricular))
        .count();
    let n_administrative = n_valid - n_curricular;
    Ok(CategorySplit {
        n_curricular,
        n_administrative,
        pct_curricular: n_curricular as f64 / n_valid as f64,
        pct_administrative: n_administrative as f64 / n_valid as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_total: usize,
    pub n_valid: usize,
    pub n_curricular: usize,
    pub n_administrative: usize,
    pub pct_curricular: f64,
    pub pct_administrative: f64,
    pub n_ai_correct: usize,
    pub ai_accuracy_overall: f64,
    pub ai_accuracy_curricular: Option<f64>,
    pub ai_accuracy_administrative: Option<f64>,
    pub n_ai_incorrect: usize,
    pub n_community_recovered: usize,
    pub community_recovery_rate: Option<f64>,
    pub combined_accuracy: f64,
    pub n_accepted: usize,
    pub accepted_share_ai: Option<f64>,
    pub accepted_share_community: Option<f64>,
    pub n_upvoted_questions: usize,
    pub upvoted_share_ai: Option<f64>,
    pub upvoted_share_community: Option<f64>,
}

pub fn evaluate(records: &[EvalRecord]) -> Result<EvalReport, EvalError> {
    let accuracy = ai_accuracy(records)?;
    let split = category_split(records)?;
    let recovery = community_recovery(records);
    let feedback = community_feedback(records);
    Ok(EvalReport {
        n_total: records.len(),
        n_valid: accuracy.n_valid,
        n_curricular: split.n_curricular,
        n_administrative: split.n_administrative,
        pct_curricular: split.pct_curricular,
        pct_administrative: split.pct_administrative,
        n_ai_correct: accuracy.n_correct,
        ai_accuracy_overall: accuracy.overall,
        ai_accuracy_curricular: accuracy.curricular,
        ai_accuracy_administrative: accuracy.administrative,
        n_ai_incorrect: recovery.n_ai_incorrect,
        n_community_recovered: recovery.n_recovered,
        community_recovery_rate: recovery.rate,
        combined_accuracy: combined_accuracy(records)?,
        n_accepted: feedback.n_accepted,
        accepted_share_ai: feedback.accepted_share_ai,
        accepted_share_community: feedback.accepted_share_community,
        n_upvoted_questions: feedback.n_upvoted_questions,
        upvoted_share_ai: feedback.upvoted_share_ai,
        upvoted_share_community: feedback.upvoted_share_community,
    })
}

fn opt_pct(rate: Option<f64>) -> String {
    rate.map(pct).unwrap_or_else(|| "n/a".to_string())
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "questions:               {}", self.n_total)?;
        writeln!(f, "valid questions:         {}", self.n_valid)?;
        writeln!(
            f,
            "category split:          curricular {} ({}), administrative {} ({})",
            self.n_curricular,
            pct(self.pct_curricular),
            self.n_administrative,
            pct(self.pct_administrative)
        )?;
        writeln!(
            f,
            "AI accuracy:             {} ({}/{})",
            pct(self.ai_accuracy_overall),
            self.n_ai_correct,
            self.n_valid
        )?;
        writeln!(
            f,
            "AI accuracy by category: curricular {}, administrative {}",
            opt_pct(self.ai_accuracy_curricular),
            opt_pct(self.ai_accuracy_administrative)
        )?;
        writeln!(
            f,
            "community recovery:      {} ({}/{})",
            opt_pct(self.community_recovery_rate),
            self.n_community_recovered,
            self.n_ai_incorrect
        )?;
        writeln!(f, "combined accuracy:       {}", pct(self.combined_accuracy))?;
        writeln!(
            f,
            "accepted answers:        {} (AI {}, community {})",
            self.n_accepted,
            opt_pct(self.accepted_share_ai),
            opt_pct(self.accepted_share_community)
        )?;
        write!(
            f,
            "upvoted questions:       {} (AI {}, community {})",
            self.n_upvoted_questions,
            opt_pct(self.upvoted_share_ai),
            opt_pct(self.upvoted_share_community)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(valid: bool, cat: Option<Category>, ai: bool, community: bool) -> EvalRecord {
        EvalRecord {
            question_id: "q".into(),
            valid,
            category: cat,
            ai_correct: ai,
            community_correct: community,
            accepted_by: AcceptedBy::None,
            ai_answer_upvoted: false,
            community_answer_upvoted: false,
        }
    }

    fn reported_shape() -> Vec<EvalRecord> {
        // 490 valid, 376 AI-correct, 44 of the 114 misses recovered
        let mut out = Vec::new();
        for i in 0..490 {
            let ai = i < 376;
            let community = !ai && i < 376 + 44;
            out.push(rec(true, Some(Category::Curricular), ai, community));
        }
        out
    }

    #[test]
    fn headline_accuracies() {
        let records = reported_shape();
        let acc = ai_accuracy(&records).unwrap();
        assert_eq!(pct(acc.overall), "76.7%");
        assert_eq!(pct(combined_accuracy(&records).unwrap()), "85.7%");
        let rec = community_recovery(&records);
        assert_eq!((rec.n_ai_incorrect, rec.n_recovered), (114, 44));
        assert_eq!(pct(rec.rate.unwrap()), "38.6%");
    }

    #[test]
    fn all_correct_is_full_accuracy() {
        let records = vec![rec(true, Some(Category::Administrative), true, false); 7];
        let acc = ai_accuracy(&records).unwrap();
        assert_eq!(acc.overall, 1.0);
        assert_eq!(acc.curricular, None);
        assert_eq!(acc.administrative, Some(1.0));
        assert_eq!(combined_accuracy(&records).unwrap(), 1.0);
        assert_eq!(community_recovery(&records).rate, None);
    }

    #[test]
    fn no_community_means_combined_equals_ai() {
        let mut records = reported_shape();
        for r in &mut records {
            r.community_correct = false;
        }
        assert_eq!(
            combined_accuracy(&records).unwrap(),
            ai_accuracy(&records).unwrap().overall
        );
    }

    #[test]
    fn invalid_records_are_excluded() {
        let records = vec![
            rec(true, Some(Category::Curricular), true, false),
            rec(false, None, false, false),
        ];
        assert_eq!(ai_accuracy(&records).unwrap().overall, 1.0);
        let only_invalid = vec![rec(false, None, false, false)];
        assert!(matches!(ai_accuracy(&only_invalid), Err(EvalError::NoValidRecords)));
        assert!(matches!(combined_accuracy(&only_invalid), Err(EvalError::NoValidRecords)));
        assert!(matches!(category_split(&only_invalid), Err(EvalError::NoValidRecords)));
    }

    #[test]
    fn acceptance_shares() {
        let mut records = Vec::new();
        for i in 0..24 {
            let mut r = rec(true, Some(Category::Curricular), true, false);
            r.accepted_by = if i < 20 { AcceptedBy::Ai } else { AcceptedBy::Community };
            records.push(r);
        }
        let fb = community_feedback(&records);
        assert_eq!(fb.n_accepted, 24);
        assert_eq!(pct(fb.accepted_share_ai.unwrap()), "83.3%");
        assert_eq!(pct(fb.accepted_share_community.unwrap()), "16.7%");
        assert!((fb.accepted_share_ai.unwrap() + fb.accepted_share_community.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_upvote_shares() {
        let mut records = Vec::new();
        // 21 AI-only, 11 community-only, 4 both
        for i in 0..36 {
            let mut r = rec(true, Some(Category::Curricular), true, false);
            r.ai_answer_upvoted = i < 25;
            r.community_answer_upvoted = i >= 21;
            records.push(r);
        }
        let fb = community_feedback(&records);
        assert_eq!(fb.n_upvoted_questions, 36);
        assert_eq!(pct(fb.upvoted_share_ai.unwrap()), "69.4%");
        assert_eq!(pct(fb.upvoted_share_community.unwrap()), "41.7%");
    }

    #[test]
    fn zero_accepted_shares_are_absent() {
        let fb = community_feedback(&reported_shape());
        assert_eq!(fb.n_accepted, 0);
        assert_eq!(fb.accepted_share_ai, None);
        assert_eq!(fb.accepted_share_community, None);
    }

    #[test]
    fn category_percentages() {
        let mut records = vec![rec(true, Some(Category::Curricular), true, false); 249];
        records.extend(vec![rec(true, Some(Category::Administrative), true, false); 241]);
        let split = category_split(&records).unwrap();
        assert_eq!(pct(split.pct_curricular), "50.8%");
        assert_eq!(pct(split.pct_administrative), "49.2%");

        let all = vec![rec(true, Some(Category::Curricular), true, false); 3];
        let split = category_split(&all).unwrap();
        assert_eq!((split.pct_curricular, split.pct_administrative), (1.0, 0.0));
    }

    #[test]
    fn csv_parsing_and_row_errors() {
        let csv = "question_id,valid,category,ai_correct,community_correct,accepted_by,ai_answer_upvoted,community_answer_upvoted\n\
                   q1,1,curricular,1,0,ai,1,0\n\
                   q2,0,,0,0,none,0,0\n";
        let records = parse_records(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].category, Some(Category::Curricular));
        assert_eq!(records[0].accepted_by, AcceptedBy::Ai);
        assert!(!records[1].valid);

        let bad = "question_id,valid,category,ai_correct,community_correct,accepted_by,ai_answer_upvoted,community_answer_upvoted\n\
                   q1,1,curricular,1,0,ai,1,0\n\
                   q2,1,,0,0,none,0,0\n";
        match parse_records(bad.as_bytes()).unwrap_err() {
            EvalError::InvalidRow { row, line, message } => {
                assert_eq!((row, line), (2, 3));
                assert!(message.contains("no category"));
            }
            other => panic!("unexpected {other}"),
        }

        let bad_flag = "h1,h2,h3,h4,h5,h6,h7,h8\nq1,yes,curricular,1,0,ai,1,0\n";
        let err = parse_records(bad_flag.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        let short = "h1,h2,h3,h4,h5,h6,h7,h8\nq1,1,curricular\n";
        assert!(parse_records(short.as_bytes()).is_err());
    }
}
