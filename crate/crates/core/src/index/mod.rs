//! Exhaustive cosine-similarity retrieval over the passage bank.
//!
//! Every query scores all entries of the requested language; there is no
//! approximate structure. Tag filtering is soft: a filter that matches none
//! of the language's entries falls back to language-only candidates.

mod embed;
mod store;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tags, Passage, SourceDocument};
use crate::language::Language;

pub use embed::{
    cosine, tokenize, EmbedError, Embedding, EmbeddingProvider, ReferenceEmbedder, DEFAULT_DIM,
};
pub use store::{META_FILE, VECTORS_FILE};

/// Passages handed to generation by default.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot build an index from zero passages")]
    NoPassages,
    #[error("index is empty")]
    EmptyIndex,
    #[error("duplicate passage id {0:?}")]
    DuplicatePassage(String),
    #[error("embedding passage {passage_id:?} failed: {source}")]
    Provider {
        passage_id: String,
        #[source]
        source: EmbedError,
    },
    #[error("query embedding failed: {0}")]
    Query(#[source] EmbedError),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index was built with provider {index:?} (dim {index_dim}) but queried with {query:?} (dim {query_dim})")]
    ProviderMismatch {
        index: String,
        index_dim: usize,
        query: String,
        query_dim: usize,
    },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub passage_id: String,
    pub language: Language,
    pub tags: Vec<String>,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub passage_id: String,
    pub score: f64,
    pub rank: usize,
}

/// How the tag filter was applied to a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagFilter {
    /// No tags were supplied.
    None,
    /// Candidates were restricted to entries sharing at least one tag.
    Applied,
    /// The tags matched nothing in the language; language-only candidates were used.
    FellBack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub hits: Vec<RetrievalHit>,
    pub tag_filter: TagFilter,
    pub candidates: usize,
}

/// An immutable, fully embedded passage bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    provider: String,
    dim: usize,
    entries: Vec<IndexEntry>,
    passages: Vec<Passage>,
    titles: BTreeMap<String, String>,
    by_id: HashMap<String, usize>,
}

/// Total order used for ranking: score descending, then passage id ascending.
pub fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}

impl Index {
    /// Embeds every passage. Fails on the first passage the provider rejects.
    pub fn build(
        passages: Vec<Passage>,
        titles: BTreeMap<String, String>,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Index, IndexError> {
        if passages.is_empty() {
            return Err(IndexError::NoPassages);
        }
        let mut entries = Vec::with_capacity(passages.len());
        for p in &passages {
            let embedding = provider.embed(&p.text).map_err(|source| IndexError::Provider {
                passage_id: p.passage_id.clone(),
                source,
            })?;
            if embedding.dim() != provider.dim() {
                return Err(IndexError::Provider {
                    passage_id: p.passage_id.clone(),
                    source: EmbedError::DimensionMismatch {
                        expected: provider.dim(),
                        got: embedding.dim(),
                    },
                });
            }
            entries.push(IndexEntry {
                passage_id: p.passage_id.clone(),
                language: p.language,
                tags: p.tags.clone(),
                embedding,
            });
        }
        Index::from_parts(provider.name().to_string(), provider.dim(), entries, passages, titles)
    }

    /// Ingests and indexes source documents in one step.
    pub fn build_from_documents(
        docs: &[SourceDocument],
        provider: &dyn EmbeddingProvider,
    ) -> Result<Index, crate::Error> {
        let passages = crate::corpus::ingest_corpus(docs)?;
        let titles = docs
            .iter()
            .map(|d| (d.doc_id.clone(), d.title.clone()))
            .collect();
        Ok(Index::build(passages, titles, provider)?)
    }

    fn from_parts(
        provider: String,
        dim: usize,
        entries: Vec<IndexEntry>,
        passages: Vec<Passage>,
        titles: BTreeMap<String, String>,
    ) -> Result<Index, IndexError> {
        let mut by_id = HashMap::with_capacity(passages.len());
        for (i, p) in passages.iter().enumerate() {
            if by_id.insert(p.passage_id.clone(), i).is_some() {
                return Err(IndexError::DuplicatePassage(p.passage_id.clone()));
            }
        }
        Ok(Index {
            provider,
            dim,
            entries,
            passages,
            titles,
            by_id,
        })
    }

    pub fn provider_name(&self) -> &str {
        &self.provider
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.by_id.get(passage_id).map(|&i| &self.passages[i])
    }

    /// Title of the document a passage came from, if known.
    pub fn title_of(&self, passage_id: &str) -> Option<&str> {
        let p = self.passage(passage_id)?;
        self.titles.get(&p.doc_id).map(String::as_str)
    }

    pub fn titles(&self) -> &BTreeMap<String, String> {
        &self.titles
    }

    fn check_provider(&self, provider: &dyn EmbeddingProvider) -> Result<(), IndexError> {
        if provider.name() != self.provider || provider.dim() != self.dim {
            return Err(IndexError::ProviderMismatch {
                index: self.provider.clone(),
                index_dim: self.dim,
                query: provider.name().to_string(),
                query_dim: provider.dim(),
            });
        }
        Ok(())
    }

    /// Top-`k` passages for a question, see [`Index::retrieve_embedding`].
    pub fn retrieve(
        &self,
        provider: &dyn EmbeddingProvider,
        question_text: &str,
        language: Language,
        tags: Option<&[String]>,
        k: usize,
    ) -> Result<Retrieval, IndexError> {
        self.check_provider(provider)?;
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let query = provider.embed(question_text).map_err(IndexError::Query)?;
        self.retrieve_embedding(&query, language, tags, k)
    }

    pub fn retrieve_embedding(
        &self,
        query: &Embedding,
        language: Language,
        tags: Option<&[String]>,
        k: usize,
    ) -> Result<Retrieval, IndexError> {
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.dim() != self.dim {
            return Err(IndexError::Query(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            }));
        }

        let in_language: Vec<&IndexEntry> =
            self.entries.iter().filter(|e| e.language == language).collect();

        let wanted = tags.map(normalize_tags).unwrap_or_default();
        let (candidates, tag_filter) = if wanted.is_empty() {
            (in_language, TagFilter::None)
        } else {
            let tagged: Vec<&IndexEntry> = in_language
                .iter()
                .copied()
                .filter(|e| e.tags.iter().any(|t| wanted.contains(t)))
                .collect();
            if tagged.is_empty() {
                (in_language, TagFilter::FellBack)
            } else {
                (tagged, TagFilter::Applied)
            }
        };

        let mut scored: Vec<(&str, f64)> = candidates
            .iter()
            .map(|e| {
                let score = cosine(query, &e.embedding).map_err(IndexError::Query)?;
                Ok((e.passage_id.as_str(), score))
            })
            .collect::<Result<_, IndexError>>()?;
        scored.sort_by(|a, b| rank_order(*a, *b));

        let hits = scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (id, score))| RetrievalHit {
                passage_id: id.to_string(),
                score,
                rank: i + 1,
            })
            .collect();
        Ok(Retrieval {
            hits,
            tag_filter,
            candidates: candidates.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<SourceDocument> {
        vec![
            SourceDocument {
                doc_id: "en-1".into(),
                language: Language::En,
                title: "Variables".into(),
                body: "Variables store data for later use.\n\nA loop repeats a block of code.\n\nFunctions group statements under a name.".into(),
                section_tags: vec!["section-1".into()],
            },
            SourceDocument {
                doc_id: "en-2".into(),
                language: Language::En,
                title: "Drawing".into(),
                body: "The ellipse function draws a circle when width equals height.".into(),
                section_tags: vec!["section-3".into()],
            },
            SourceDocument {
                doc_id: "fr-1".into(),
                language: Language::Fr,
                title: "Variables (FR)".into(),
                body: "Les variables stockent des données.".into(),
                section_tags: vec!["section-1".into()],
            },
        ]
    }

    fn index() -> (Index, ReferenceEmbedder) {
        let e = ReferenceEmbedder::default();
        (Index::build_from_documents(&docs(), &e).unwrap(), e)
    }

    #[test]
    fn verbatim_question_retrieves_its_passage_first() {
        let (idx, e) = index();
        let r = idx
            .retrieve(&e, "A loop repeats a block of code.", Language::En, None, 5)
            .unwrap();
        assert_eq!(r.hits[0].passage_id, "en-1#1");
        assert!((r.hits[0].score - 1.0).abs() <= 1e-6);
        assert_eq!(r.hits.len(), 4);
        assert_eq!(r.hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3, 4]);
    }

    #[test]
    fn language_filter() {
        let (idx, e) = index();
        let r = idx.retrieve(&e, "variables données", Language::Fr, None, 5).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].passage_id, "fr-1#0");
    }

    #[test]
    fn tag_filter_applies_and_falls_back() {
        let (idx, e) = index();
        let tags = vec!["Section-3".to_string()];
        let r = idx.retrieve(&e, "loop", Language::En, Some(&tags), 5).unwrap();
        assert_eq!(r.tag_filter, TagFilter::Applied);
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].passage_id, "en-2#0");

        let typo = vec!["sectoin-3".to_string()];
        let r = idx.retrieve(&e, "loop", Language::En, Some(&typo), 5).unwrap();
        assert_eq!(r.tag_filter, TagFilter::FellBack);
        assert_eq!(r.hits.len(), 4);

        let r = idx.retrieve(&e, "loop", Language::En, Some(&[]), 5).unwrap();
        assert_eq!(r.tag_filter, TagFilter::None);
    }

    #[test]
    fn titles_resolve() {
        let (idx, _) = index();
        assert_eq!(idx.title_of("en-2#0"), Some("Drawing"));
        assert_eq!(idx.title_of("nope#0"), None);
    }

    #[test]
    fn errors() {
        let (idx, e) = index();
        assert!(matches!(idx.retrieve(&e, "loop", Language::En, None, 0), Err(IndexError::InvalidK)));
        assert!(matches!(idx.retrieve(&e, " ", Language::En, None, 5), Err(IndexError::Query(_))));
        let other = ReferenceEmbedder::new(64);
        assert!(matches!(
            idx.retrieve(&other, "loop", Language::En, None, 5),
            Err(IndexError::ProviderMismatch { .. })
        ));
        assert!(matches!(
            Index::build(vec![], BTreeMap::new(), &e),
            Err(IndexError::NoPassages)
        ));
    }

    struct Failing;
    impl EmbeddingProvider for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn dim(&self) -> usize {
            4
        }
        fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
            if text.contains("circle") {
                Err(EmbedError::Provider("boom".into()))
            } else {
                Ok(Embedding::normalized(vec![1.0, 0.0, 0.0, 0.0]))
            }
        }
    }

    #[test]
    fn provider_failure_names_the_passage() {
        let err = Index::build_from_documents(&docs(), &Failing).unwrap_err();
        assert!(err.to_string().contains("en-2#0"), "{err}");
    }

    #[test]
    fn ties_break_by_passage_id() {
        let passages: Vec<Passage> = ["b#0", "a#0", "c#0"]
            .iter()
            .map(|id| Passage {
                passage_id: id.to_string(),
                doc_id: id[..1].to_string(),
                language: Language::En,
                text: "same words".into(),
                tags: vec![],
                ordinal: 0,
            })
            .collect();
        let e = ReferenceEmbedder::default();
        let idx = Index::build(passages, BTreeMap::new(), &e).unwrap();
        let r = idx.retrieve(&e, "same words", Language::En, None, 3).unwrap();
        let ids: Vec<_> = r.hits.iter().map(|h| h.passage_id.as_str()).collect();
        assert_eq!(ids, ["a#0", "b#0", "c#0"]);
    }
}
