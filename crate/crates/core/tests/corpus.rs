use std::collections::BTreeMap;
use std::fs;

use coursemate_core::corpus::{
    corpus_stats, ingest_corpus, ingest_document, load_documents, normalized_body,
    split_long_paragraph, CorpusError, MAX_PASSAGE_CHARS,
};
use coursemate_core::{Language, SourceDocument};
use coursemate_testkit::fixture;
use proptest::prelude::*;

/// Paragraphs as a reader would see them: blank lines separate, each line is
/// trimmed and its internal whitespace runs collapse to one space.
fn oracle_paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    for line in text.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.is_empty() {
            if !cur.is_empty() {
                out.push(cur.join("\n"));
                cur = Vec::new();
            }
        } else {
            cur.push(words.join(" "));
        }
    }
    if !cur.is_empty() {
        out.push(cur.join("\n"));
    }
    out
}

fn lesson() -> SourceDocument {
    SourceDocument {
        doc_id: "lesson-4".into(),
        language: Language::En,
        title: "Functions".into(),
        body: fs::read_to_string(fixture("lesson_functions.txt")).unwrap(),
        section_tags: vec!["Section-4".into(), " lesson ".into(), "section-4".into()],
    }
}

#[test]
fn twelve_paragraph_lesson_round_trips() {
    let doc = lesson();
    let passages = ingest_document(&doc).unwrap();
    assert_eq!(passages.len(), 12);
    let joined = passages.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n\n");
    assert_eq!(joined, normalized_body(&doc.body));
    assert_eq!(joined, oracle_paragraphs(&doc.body).join("\n\n"));
    for (i, p) in passages.iter().enumerate() {
        assert_eq!(p.passage_id, format!("lesson-4#{i}"));
        assert_eq!(p.ordinal, i);
        assert_eq!(p.tags, vec!["section-4".to_string(), "lesson".to_string()]);
    }
}

#[test]
fn fixture_corpus_stats_match_recount() {
    let docs = load_documents(&fixture("corpus.jsonl")).unwrap();
    let passages = ingest_corpus(&docs).unwrap();
    let stats = corpus_stats(&passages);

    // recount straight from the raw file
    let raw = fs::read_to_string(fixture("corpus.jsonl")).unwrap();
    let mut by_lang: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_tag: BTreeMap<String, usize> = BTreeMap::new();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let n = oracle_paragraphs(v["body"].as_str().unwrap()).len();
        *by_lang.entry(v["language"].as_str().unwrap().to_string()).or_default() += n;
        for t in v["section_tags"].as_array().unwrap() {
            *by_tag.entry(t.as_str().unwrap().to_string()).or_default() += n;
        }
    }
    let got_lang: BTreeMap<String, usize> = stats
        .count_by_language
        .iter()
        .map(|(l, n)| (l.code().to_string(), *n))
        .collect();
    assert_eq!(got_lang, by_lang);
    assert_eq!(stats.count_by_tag, by_tag);
    assert_eq!(passages.len(), by_lang.values().sum::<usize>());
}

#[test]
fn errors_are_reported() {
    let mut doc = lesson();
    doc.body = " \n\n\t\n".into();
    assert!(matches!(ingest_document(&doc), Err(CorpusError::EmptyBody { .. })));

    let twice = vec![lesson(), lesson()];
    assert!(matches!(ingest_corpus(&twice), Err(CorpusError::DuplicateDocument(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(&path, "{\"doc_id\":\"a\",\"language\":\"en\",\"title\":\"t\",\"body\":\"b\"}\n{not json}\n").unwrap();
    match load_documents(&path) {
        Err(CorpusError::InvalidRecord { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected invalid record, got {other:?}"),
    }
}

#[test]
fn long_paragraph_splits_at_sentences() {
    let sentence = "This sentence is part of a very long paragraph about loops. ";
    let para = sentence.repeat(MAX_PASSAGE_CHARS / sentence.len() * 3);
    let pieces = split_long_paragraph(&para, MAX_PASSAGE_CHARS);
    assert!(pieces.len() >= 3);
    for p in &pieces {
        assert!(p.chars().count() <= MAX_PASSAGE_CHARS);
        assert!(p.ends_with('.'), "piece does not end a sentence: {:?}", &p[p.len() - 20..]);
    }
}

proptest! {
    #[test]
    fn chunking_round_trips(paras in prop::collection::vec("[a-zé .,]{1,40}( [a-z]{1,8}){0,5}", 1..8),
                            noise in prop::collection::vec(prop::sample::select(vec!["\n\n", "\n \n", "\n\t\n\n"]), 7)) {
        let mut body = String::new();
        for (i, p) in paras.iter().enumerate() {
            if i > 0 {
                body.push_str(noise[i % noise.len()]);
            }
            body.push_str(p);
        }
        let doc = SourceDocument {
            doc_id: "d".into(),
            language: Language::Fr,
            title: "t".into(),
            body: body.clone(),
            section_tags: vec![],
        };
        let expected = oracle_paragraphs(&body);
        match ingest_document(&doc) {
            Ok(passages) => {
                let texts: Vec<String> = passages.iter().map(|p| p.text.clone()).collect();
                prop_assert_eq!(texts, expected);
            }
            Err(CorpusError::EmptyBody { .. }) => prop_assert!(expected.is_empty()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn split_pieces_respect_limit_and_keep_words(words in prop::collection::vec("[a-z]{1,12}[.]?", 1..200), limit in 20usize..120) {
        let para = words.join(" ");
        let pieces = split_long_paragraph(&para, limit);
        for p in &pieces {
            prop_assert!(p.chars().count() <= limit);
        }
        let rejoined: Vec<String> = pieces.join(" ").split_whitespace().map(str::to_string).collect();
        let original: Vec<String> = para.split_whitespace().map(str::to_string).collect();
        prop_assert_eq!(rejoined, original);
    }
}
