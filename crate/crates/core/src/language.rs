//! English/French identification for learner questions.
//!
//! The detector is a weighted evidence sum over three signals:
//! stopword hits (2.0 each), French diacritic characters (1.0 each, French
//! only) and character-trigram hits against two small built-in profiles
//! (0.5 each). Text between triple-backtick fences is ignored. Ties go to
//! English.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the two course languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fr,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::En, Language::Fr];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fr => "fr",
        }
    }

    /// English name of the language, as used in prompt directives.
    pub fn name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Fr => "French",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LanguageError {
    #[error("question text is empty")]
    EmptyText,
    #[error("unknown language {0:?} (expected \"en\" or \"fr\")")]
    Unknown(String),
}

impl FromStr for Language {
    type Err = LanguageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::En),
            "fr" | "french" | "français" | "francais" => Ok(Language::Fr),
            _ => Err(LanguageError::Unknown(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageVerdict {
    pub language: Language,
    pub confidence: f64,
    pub en_score: f64,
    pub fr_score: f64,
}

impl LanguageVerdict {
    fn from_scores(en_score: f64, fr_score: f64) -> Self {
        let total = en_score + fr_score;
        let confidence = if total > 0.0 {
            en_score.max(fr_score) / total
        } else {
            0.5
        };
        let language = if fr_score > en_score {
            Language::Fr
        } else {
            Language::En
        };
        LanguageVerdict {
            language,
            confidence,
            en_score,
            fr_score,
        }
    }
}

pub const STOPWORD_WEIGHT: f64 = 2.0;
pub const DIACRITIC_WEIGHT: f64 = 1.0;
pub const TRIGRAM_WEIGHT: f64 = 0.5;

pub const EN_STOPWORDS: [&str; 50] = [
    "the", "of", "and", "to", "in", "is", "it", "that", "for", "you", "with", "was", "are", "this",
    "be", "at", "have", "from", "not", "but", "what", "all", "were", "when", "we", "there", "can",
    "which", "their", "if", "do", "will", "about", "how", "my", "why", "should", "does", "would",
    "i", "your", "they", "get", "or", "an", "by", "has", "been", "where", "because",
];

pub const FR_STOPWORDS: [&str; 50] = [
    "le", "la", "les", "de", "des", "du", "un", "une", "et", "est", "en", "que", "qui", "dans",
    "pour", "pas", "par", "sur", "au", "aux", "avec", "ce", "cette", "ces", "il", "elle", "nous",
    "vous", "je", "mon", "ma", "mes", "votre", "leur", "sont", "mais", "ou", "comme", "plus",
    "faire", "fait", "quand", "comment", "pourquoi", "quoi", "très", "être", "avoir", "ne", "qu",
];

pub const EN_TRIGRAMS: [&str; 16] = [
    "the", "ing", "and", "tha", "hat", "wha", "thi", "his", "you", "hen", "ght", "ith", "wit",
    "how", "why", "oul",
];

pub const FR_TRIGRAMS: [&str; 16] = [
    "les", "des", "eux", "que", "ous", "eau", "aux", "oir", "ais", "ait", "une", "dan", "qui",
    "eur", "mme", "pou",
];

/// Characters that occur in French but not in English spelling.
pub const FRENCH_DIACRITICS: [char; 16] = [
    'é', 'è', 'ê', 'ë', 'à', 'â', 'ç', 'î', 'ï', 'ô', 'û', 'ù', 'ü', 'ÿ', 'œ', 'æ',
];

/// Removes every triple-backtick fenced region. An unterminated fence
/// swallows the rest of the text.
pub fn strip_code_fences(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 3..];
        match after.find("```") {
            Some(end) => {
                out.push(' ');
                rest = &after[end + 3..];
            }
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

fn is_french_diacritic(c: char) -> bool {
    FRENCH_DIACRITICS.contains(&c)
}

fn trigram_hits(token: &[char], profile: &[&str]) -> usize {
    if token.len() < 3 {
        return 0;
    }
    let mut buf = String::with_capacity(12);
    token
        .windows(3)
        .filter(|w| {
            buf.clear();
            buf.extend(w.iter());
            profile.contains(&buf.as_str())
        })
        .count()
}

/// Scores `text` and returns the dominant language with its confidence.
pub fn detect_language(text: &str) -> Result<LanguageVerdict, LanguageError> {
    if text.trim().is_empty() {
        return Err(LanguageError::EmptyText);
    }
    let prose = strip_code_fences(text).to_lowercase();

    let mut en = 0.0;
    let mut fr = 0.0;

    fr += DIACRITIC_WEIGHT * prose.chars().filter(|&c| is_french_diacritic(c)).count() as f64;

    for token in prose.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        if EN_STOPWORDS.contains(&token) {
            en += STOPWORD_WEIGHT;
        }
        if FR_STOPWORDS.contains(&token) {
            fr += STOPWORD_WEIGHT;
        }
        let chars: Vec<char> = token.chars().collect();
        en += TRIGRAM_WEIGHT * trigram_hits(&chars, &EN_TRIGRAMS) as f64;
        fr += TRIGRAM_WEIGHT * trigram_hits(&chars, &FR_TRIGRAMS) as f64;
    }

    Ok(LanguageVerdict::from_scores(en, fr))
}
