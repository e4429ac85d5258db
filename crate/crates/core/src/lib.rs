//! Bilingual course-material retrieval, cited answer generation, a
//! human-in-the-loop Q&A forum, and the metrics used to evaluate it.

pub mod corpus;
pub mod eval;
pub mod forum;
pub mod index;
pub mod language;
pub mod rag;

pub use corpus::{CorpusError, Passage, SourceDocument};
pub use index::{Index, IndexError};
pub use language::{detect_language, Language, LanguageVerdict};
pub use rag::{GeneratedAnswer, Pipeline, QuestionInput, RagError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Rag(#[from] RagError),
}
