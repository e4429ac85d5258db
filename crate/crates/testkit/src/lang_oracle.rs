//! Stopword-frequency language oracle and the bilingual pair fixture.

use std::fs;
use std::path::Path;

use coursemate_core::language::{EN_STOPWORDS, FR_STOPWORDS};
use coursemate_core::Language;

/// Counts stopword hits per language over whitespace and punctuation
/// separated words; more French hits means French, otherwise English.
pub fn stopword_verdict(text: &str) -> Language {
    let lower = text.to_lowercase();
    let mut en = 0usize;
    let mut fr = 0usize;
    let mut word = String::new();
    let mut flush = |w: &mut String| {
        if !w.is_empty() {
            en += EN_STOPWORDS.iter().filter(|s| **s == w.as_str()).count();
            fr += FR_STOPWORDS.iter().filter(|s| **s == w.as_str()).count();
            w.clear();
        }
    };
    for c in lower.chars() {
        if c.is_alphanumeric() {
            word.push(c);
        } else {
            flush(&mut word);
        }
    }
    flush(&mut word);
    if fr > en {
        Language::Fr
    } else {
        Language::En
    }
}

/// (English, French) sentence pairs from the tab-separated fixture.
pub fn load_pairs(path: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(path).expect("pair fixture readable");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (en, fr) = l.split_once('\t').expect("two tab-separated columns");
            (en.to_string(), fr.to_string())
        })
        .collect()
}
