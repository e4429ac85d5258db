use std::sync::Arc;

use coursemate_core::corpus::{ingest_corpus, load_documents};
use coursemate_core::index::{
    cosine, Embedding, EmbeddingProvider, Index, IndexError, ReferenceEmbedder, TagFilter,
};
use coursemate_core::{Language, SourceDocument};
use coursemate_testkit::corpus_gen::{random_corpus, random_question, random_tags};
use coursemate_testkit::{fixture, retrieval_oracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn embedder() -> ReferenceEmbedder {
    ReferenceEmbedder::default()
}

#[test]
fn shared_tokens_rank_higher() {
    let e = embedder();
    let e1 = e.embed("variables store data").unwrap();
    let e2 = e.embed("variables hold data").unwrap();
    let e3 = e.embed("the mitochondria is powerful").unwrap();
    assert!(cosine(&e1, &e2).unwrap() > cosine(&e1, &e3).unwrap());
    assert!((cosine(&e1, &e1).unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(cosine(&e1, &Embedding::zeros(e.dim())).unwrap(), 0.0);
    assert_eq!(e.embed("variables store data").unwrap(), e1);
    assert!(e.embed("  ").is_err());
}

#[test]
fn verbatim_question_retrieves_its_passage() {
    let docs = vec![SourceDocument {
        doc_id: "d".into(),
        language: Language::En,
        title: "t".into(),
        body: "Loops repeat code.\n\nVariables store values for later.\n\nFunctions group statements.".into(),
        section_tags: vec![],
    }];
    let e = embedder();
    let index = Index::build_from_documents(&docs, &e).unwrap();
    let r = index.retrieve(&e, "Variables store values for later.", Language::En, None, 5).unwrap();
    assert_eq!(r.hits[0].passage_id, "d#1");
    assert!((r.hits[0].score - 1.0).abs() < 1e-6);
    assert_eq!(r.hits.len(), 3);
}

#[test]
fn section_tag_filter_on_fixture() {
    let docs = load_documents(&fixture("corpus.jsonl")).unwrap();
    let e = embedder();
    let index = Index::build_from_documents(&docs, &e).unwrap();
    let tags = vec!["section-3".to_string()];
    let r = index
        .retrieve(&e, "How does the ball bounce off the wall?", Language::En, Some(&tags), 5)
        .unwrap();
    assert_eq!(r.tag_filter, TagFilter::Applied);
    assert_eq!(r.hits.len(), 4);
    for h in &r.hits {
        let p = index.passage(&h.passage_id).unwrap();
        assert!(p.tags.contains(&"section-3".to_string()));
        assert_eq!(p.language, Language::En);
    }

    let typo = vec!["sektion-9".to_string()];
    let r = index.retrieve(&e, "How does the ball bounce?", Language::En, Some(&typo), 5).unwrap();
    assert_eq!(r.tag_filter, TagFilter::FellBack);
    assert_eq!(r.hits.len(), 5);
}

#[test]
fn retrieval_errors() {
    let docs = load_documents(&fixture("corpus.jsonl")).unwrap();
    let e = embedder();
    let index = Index::build_from_documents(&docs, &e).unwrap();
    assert!(matches!(index.retrieve(&e, "loop", Language::En, None, 0), Err(IndexError::InvalidK)));
    let other = ReferenceEmbedder::new(64);
    assert!(matches!(
        index.retrieve(&other, "loop", Language::En, None, 5),
        Err(IndexError::ProviderMismatch { .. })
    ));
    assert!(matches!(Index::build(Vec::new(), Default::default(), &e), Err(IndexError::NoPassages)));
}

struct Failing;

impl EmbeddingProvider for Failing {
    fn name(&self) -> &str {
        "failing"
    }
    fn dim(&self) -> usize {
        4
    }
    fn embed(&self, text: &str) -> Result<Embedding, coursemate_core::index::EmbedError> {
        if text.contains("poison") {
            Err(coursemate_core::index::EmbedError::Provider("refused".into()))
        } else {
            Ok(Embedding::normalized(vec![1.0, 0.0, 0.0, 0.0]))
        }
    }
}

#[test]
fn build_reports_failing_passage() {
    let docs = vec![SourceDocument {
        doc_id: "d".into(),
        language: Language::En,
        title: "t".into(),
        body: "fine text\n\npoison text".into(),
        section_tags: vec![],
    }];
    let passages = ingest_corpus(&docs).unwrap();
    match Index::build(passages, Default::default(), &Failing) {
        Err(IndexError::Provider { passage_id, .. }) => assert_eq!(passage_id, "d#1"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn save_and_load_are_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let docs = random_corpus(&mut rng, 60);
    let e = embedder();
    let index = Index::build_from_documents(&docs, &e).unwrap();
    let dir = tempfile::tempdir().unwrap();
    index.save(dir.path()).unwrap();
    let loaded = Index::load(dir.path()).unwrap();
    assert_eq!(loaded.entries(), index.entries());
    assert_eq!(loaded.passages(), index.passages());
    let q = random_question(&mut rng, Language::Fr);
    assert_eq!(
        loaded.retrieve(&e, &q, Language::Fr, None, 5).unwrap(),
        index.retrieve(&e, &q, Language::Fr, None, 5).unwrap()
    );

    let vectors = dir.path().join(coursemate_core::index::VECTORS_FILE);
    let bytes = std::fs::read(&vectors).unwrap();
    std::fs::write(&vectors, &bytes[..bytes.len() - 4]).unwrap();
    assert!(Index::load(dir.path()).is_err());
}

#[test]
fn concurrent_queries_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let docs = random_corpus(&mut rng, 200);
    let e = Arc::new(embedder());
    let index = Arc::new(Index::build_from_documents(&docs, e.as_ref()).unwrap());
    let questions: Vec<String> = (0..16).map(|_| random_question(&mut rng, Language::En)).collect();
    let serial: Vec<_> = questions
        .iter()
        .map(|q| index.retrieve(e.as_ref(), q, Language::En, None, 5).unwrap())
        .collect();
    let handles: Vec<_> = questions
        .into_iter()
        .map(|q| {
            let (index, e) = (index.clone(), e.clone());
            std::thread::spawn(move || index.retrieve(e.as_ref(), &q, Language::En, None, 5).unwrap())
        })
        .collect();
    let parallel: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(serial, parallel);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retrieve_matches_exhaustive_oracle(seed in any::<u64>(), size in 2usize..150, k in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, size);
        let passages = ingest_corpus(&docs).unwrap();
        let e = embedder();
        let index = Index::build_from_documents(&docs, &e).unwrap();
        let lang = if rng.random_bool(0.5) { Language::En } else { Language::Fr };
        let q = random_question(&mut rng, lang);
        let tags = random_tags(&mut rng);
        let tags = (!tags.is_empty()).then_some(tags);

        let got = index.retrieve(&e, &q, lang, tags.as_deref(), k).unwrap();
        let want = retrieval_oracle::top_k(&passages, &e, &q, lang, tags.as_deref(), k);
        prop_assert_eq!(got.hits.len(), want.len());
        for (i, (h, (id, score))) in got.hits.iter().zip(&want).enumerate() {
            prop_assert_eq!(&h.passage_id, id);
            prop_assert!((h.score - score).abs() <= 1e-9);
            prop_assert_eq!(h.rank, i + 1);
            prop_assert!((0.0..=1.0).contains(&h.score));
        }

        // filter soundness
        for h in &got.hits {
            let p = index.passage(&h.passage_id).unwrap();
            prop_assert_eq!(p.language, lang);
            if got.tag_filter == TagFilter::Applied {
                let wanted = tags.as_ref().unwrap();
                prop_assert!(p.tags.iter().any(|t| wanted.contains(t)));
            }
        }

        // monotone k
        let longer = index.retrieve(&e, &q, lang, tags.as_deref(), k + 1).unwrap();
        prop_assert_eq!(&longer.hits[..got.hits.len()], &got.hits[..]);
    }

    #[test]
    fn cosine_matches_summation_oracle(a in prop::collection::vec(-1.0f32..1.0, 256), b in prop::collection::vec(-1.0f32..1.0, 256)) {
        let ea = Embedding::normalized(a);
        let eb = Embedding::normalized(b);
        let got = cosine(&ea, &eb).unwrap();
        let want = retrieval_oracle::cosine_from_scratch(ea.values(), eb.values());
        prop_assert!((got - want).abs() <= 1e-9, "{} vs {}", got, want);
        prop_assert!((-1.0..=1.0).contains(&got));
    }
}
