//! Course material ingestion into the paragraph-level passage bank.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::language::Language;

/// Longest passage, in characters, before a paragraph is split.
pub const MAX_PASSAGE_CHARS: usize = 4000;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("document {doc_id:?} has no non-empty paragraphs")]
    EmptyBody { doc_id: String },
    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One record of the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub language: Language,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub section_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub language: Language,
    pub text: String,
    pub tags: Vec<String>,
    pub ordinal: usize,
}

pub fn passage_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Lowercases, trims and deduplicates tags, keeping first-seen order.
pub fn normalize_tags<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    tags.iter()
        .map(|t| t.as_ref().trim().to_lowercase())
        .filter(|t| !t.is_empty() && seen.insert(t.clone()))
        .collect()
}

fn collapse_inline_whitespace(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_run = false;
    for c in line.chars() {
        if c == ' ' || c == '\t' {
            if !in_run {
                out.push(' ');
            }
            in_run = true;
        } else {
            out.push(c);
            in_run = false;
        }
    }
    out.trim().to_string()
}

/// Splits a body into normalized paragraphs: blank (whitespace-only) lines
/// separate paragraphs, space/tab runs collapse, and each line is trimmed.
/// Line breaks inside a paragraph are kept.
pub fn paragraphs(body: &str) -> Vec<String> {
    let unified = body.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for line in unified.split('\n') {
        let line = collapse_inline_whitespace(line);
        if line.is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

/// Byte offset just past the last sentence end that keeps the head within
/// `limit` characters, falling back to the last whitespace and then to a
/// hard cut.
fn split_point(text: &str, limit: usize) -> usize {
    let head_end = text
        .char_indices()
        .nth(limit)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let head = &text[..head_end];

    let ends_sentence = |prefix: &str| {
        prefix
            .trim_end_matches(['"', ')', '»'])
            .ends_with(['.', '!', '?'])
    };
    let mut sentence_end = None;
    let mut whitespace = None;
    for (i, c) in head.char_indices() {
        if c.is_whitespace() && i > 0 {
            whitespace = Some(i);
            if ends_sentence(&head[..i]) {
                sentence_end = Some(i);
            }
        }
    }
    // the character right after the head may itself be whitespace
    if head_end < text.len() {
        let next = text[head_end..].chars().next();
        if next.is_some_and(char::is_whitespace) {
            whitespace = Some(head_end);
            if ends_sentence(head) {
                sentence_end = Some(head_end);
            }
        }
    }
    sentence_end.or(whitespace).unwrap_or(head_end)
}

/// Breaks an oversized paragraph into pieces of at most `limit` characters.
pub fn split_long_paragraph(paragraph: &str, limit: usize) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut rest = paragraph.trim();
    while rest.chars().count() > limit {
        let at = split_point(rest, limit);
        let head = rest[..at].trim();
        if !head.is_empty() {
            pieces.push(head.to_string());
        }
        rest = rest[at..].trim_start();
    }
    if !rest.is_empty() {
        pieces.push(rest.to_string());
    }
    pieces
}

/// The body exactly as the passage bank sees it: every passage text joined
/// by a blank line.
pub fn normalized_body(body: &str) -> String {
    paragraphs(body)
        .iter()
        .flat_map(|p| split_long_paragraph(p, MAX_PASSAGE_CHARS))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn ingest_document(doc: &SourceDocument) -> Result<Vec<Passage>, CorpusError> {
    let tags = normalize_tags(&doc.section_tags);
    let passages: Vec<Passage> = paragraphs(&doc.body)
        .iter()
        .flat_map(|p| split_long_paragraph(p, MAX_PASSAGE_CHARS))
        .enumerate()
        .map(|(ordinal, text)| Passage {
            passage_id: passage_id(&doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            language: doc.language,
            text,
            tags: tags.clone(),
            ordinal,
        })
        .collect();
    if passages.is_empty() {
        return Err(CorpusError::EmptyBody {
            doc_id: doc.doc_id.clone(),
        });
    }
    Ok(passages)
}

/// Ingests a whole corpus, rejecting duplicate document ids so that
/// passage ids stay unique.
pub fn ingest_corpus(docs: &[SourceDocument]) -> Result<Vec<Passage>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for doc in docs {
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(CorpusError::DuplicateDocument(doc.doc_id.clone()));
        }
        out.extend(ingest_document(doc)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count_by_language: BTreeMap<Language, usize>,
    pub count_by_tag: BTreeMap<String, usize>,
}

pub fn corpus_stats(passages: &[Passage]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for p in passages {
        *stats.count_by_language.entry(p.language).or_default() += 1;
        for tag in &p.tags {
            *stats.count_by_tag.entry(tag.clone()).or_default() += 1;
        }
    }
    stats
}

/// Reads a line-delimited corpus file. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn load_documents(path: &Path) -> Result<Vec<SourceDocument>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: SourceDocument =
            serde_json::from_str(&line).map_err(|e| CorpusError::InvalidRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_passages(path: &Path, passages: &[Passage]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for p in passages {
        serde_json::to_writer(&mut out, p).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> SourceDocument {
        SourceDocument {
            doc_id: "lesson-1".into(),
            language: Language::En,
            title: "Lesson 1".into(),
            body: body.into(),
            section_tags: vec!["Section-1".into(), "basics".into(), "section-1".into()],
        }
    }

    #[test]
    fn two_paragraphs() {
        let ps = ingest_document(&doc("Variables store data.\n\nLoops repeat code.")).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].ordinal, 0);
        assert_eq!(ps[1].ordinal, 1);
        assert_eq!(ps[0].text, "Variables store data.");
        assert_eq!(ps[1].text, "Loops repeat code.");
        assert_eq!(ps[1].passage_id, "lesson-1#1");
        assert_eq!(ps[0].tags, vec!["section-1", "basics"]);
    }

    #[test]
    fn whitespace_only_body_is_an_error() {
        let err = ingest_document(&doc("   \n\n  ")).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyBody { ref doc_id } if doc_id == "lesson-1"));
        assert!(err.to_string().contains("lesson-1"));
    }

    #[test]
    fn inline_whitespace_collapses_but_case_survives() {
        let ps = ingest_document(&doc("  Call   println()\tTWICE.  \n  then stop \n \t \nNext.")).unwrap();
        assert_eq!(ps[0].text, "Call println() TWICE.\nthen stop");
        assert_eq!(ps[1].text, "Next.");
    }

    #[test]
    fn crlf_line_endings() {
        let ps = ingest_document(&doc("One.\r\n\r\nTwo.\r\n")).unwrap();
        assert_eq!(ps.len(), 2);
    }

    #[test]
    fn long_paragraph_splits_at_sentence_boundary() {
        let sentence = "This sentence is exactly forty chars ok. ";
        assert_eq!(sentence.len(), 41);
        let long = sentence.repeat(200);
        let ps = ingest_document(&doc(&long)).unwrap();
        assert!(ps.len() > 1);
        for p in &ps {
            assert!(p.text.chars().count() <= MAX_PASSAGE_CHARS);
            assert!(p.text.ends_with('.'));
        }
        let rejoined: String = ps.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ");
        assert_eq!(rejoined, long.trim());
    }

    #[test]
    fn long_paragraph_without_spaces_hard_splits() {
        let long = "x".repeat(MAX_PASSAGE_CHARS * 2 + 10);
        let pieces = split_long_paragraph(&long, MAX_PASSAGE_CHARS);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[0].len(), MAX_PASSAGE_CHARS);
        assert_eq!(pieces.concat(), long);
    }

    #[test]
    fn split_respects_multibyte_chars() {
        let long = "é".repeat(25);
        let pieces = split_long_paragraph(&long, 10);
        assert_eq!(pieces.iter().map(|p| p.chars().count()).collect::<Vec<_>>(), [10, 10, 5]);
    }

    #[test]
    fn duplicate_documents_rejected() {
        let d = doc("A.");
        assert!(matches!(
            ingest_corpus(&[d.clone(), d]),
            Err(CorpusError::DuplicateDocument(_))
        ));
    }

    #[test]
    fn stats_count_languages_and_tags() {
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
        let mut passages = Vec::new();
        for i in 0..3 {
            passages.push(Passage {
                passage_id: format!("e#{i}"),
                doc_id: "e".into(),
                language: Language::En,
                text: "t".into(),
                tags: vec!["a".into()],
                ordinal: i,
            });
        }
        for i in 0..2 {
            passages.push(Passage {
                passage_id: format!("f#{i}"),
                doc_id: "f".into(),
                language: Language::Fr,
                text: "t".into(),
                tags: vec!["a".into(), "b".into()],
                ordinal: i,
            });
        }
        let stats = corpus_stats(&passages);
        assert_eq!(stats.count_by_language[&Language::En], 3);
        assert_eq!(stats.count_by_language[&Language::Fr], 2);
        assert_eq!(stats.count_by_tag["a"], 5);
        assert_eq!(stats.count_by_tag["b"], 2);
    }

    #[test]
    fn bad_record_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            "{\"doc_id\":\"a\",\"language\":\"en\",\"title\":\"t\",\"body\":\"b\",\"section_tags\":[]}\n\n{\"doc_id\":\"b\",\"language\":\"de\",\"title\":\"t\",\"body\":\"b\"}\n",
        )
        .unwrap();
        let err = load_documents(&path).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidRecord { line: 3, .. }), "{err}");
    }
}
