//! Question answering over the passage bank: detect the language, retrieve
//! the top passages, assemble a grounded prompt, generate, and append the
//! citation block.

mod backend;
mod prompt;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::index::{EmbeddingProvider, Index, IndexError, Retrieval, RetrievalHit, DEFAULT_TOP_K};
use crate::language::{detect_language, Language, LanguageError, LanguageVerdict};

pub use backend::{
    first_sentence, BackendError, BackendKind, GenerationBackend, GenerationRequest,
    GenerationResponse, StubBackend,
};
pub use prompt::{ContextPassage, PromptBundle, PromptPolicy};

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error(transparent)]
    Language(#[from] LanguageError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("no course material available for language {language}")]
    NoContext { language: Language },
    #[error("cannot assemble a prompt without retrieved passages")]
    EmptyContext,
    #[error("retrieved passage {0:?} is missing from the index")]
    UnknownPassage(String),
    #[error("generation failed ({backend}): {source}")]
    Backend {
        backend: BackendKind,
        #[source]
        source: BackendError,
    },
    #[error("generation backend {0} returned an empty body")]
    EmptyBody(BackendKind),
}

/// The question as the pipeline sees it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionInput {
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub attachments: Vec<String>,
}

impl QuestionInput {
    pub fn new(text: impl Into<String>) -> Self {
        QuestionInput {
            text: text.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    pub body: String,
    pub citations: Vec<String>,
    pub generation_backend: BackendKind,
    pub latency_ms: u64,
}

/// Places retrieved passages in rank order under the policy directive.
pub fn assemble_prompt(
    question: &QuestionInput,
    language: Language,
    hits: &[RetrievalHit],
    index: &Index,
    policy: &PromptPolicy,
) -> Result<PromptBundle, RagError> {
    if hits.is_empty() {
        return Err(RagError::EmptyContext);
    }
    let mut ordered: Vec<&RetrievalHit> = hits.iter().collect();
    ordered.sort_by_key(|h| h.rank);
    let context_passages = ordered
        .into_iter()
        .map(|h| {
            let p = index
                .passage(&h.passage_id)
                .ok_or_else(|| RagError::UnknownPassage(h.passage_id.clone()))?;
            Ok(ContextPassage {
                passage_id: p.passage_id.clone(),
                title: index.title_of(&p.passage_id).map(str::to_string),
                text: p.text.clone(),
            })
        })
        .collect::<Result<Vec<_>, RagError>>()?;
    Ok(PromptBundle {
        system_directive: policy.directive(language),
        question_text: question.text.clone(),
        context_passages,
        attachment_refs: question.attachments.clone(),
        language,
    })
}

fn citation_block(bundle: &PromptBundle) -> String {
    let mut block = String::from("Sources:");
    for (i, p) in bundle.context_passages.iter().enumerate() {
        block.push_str(&format!("\n[{}] {}", i + 1, p.passage_id));
        if let Some(title) = &p.title {
            block.push_str(&format!(" ({title})"));
        }
    }
    block
}

/// Runs the backend and appends a citation block listing every context
/// passage in rank order.
pub fn generate(
    bundle: &PromptBundle,
    backend: &dyn GenerationBackend,
) -> Result<GeneratedAnswer, RagError> {
    if bundle.context_passages.is_empty() {
        return Err(RagError::EmptyContext);
    }
    let request = GenerationRequest {
        system_directive: bundle.system_directive.clone(),
        user_text: bundle.user_text(),
        context_texts: bundle.context_passages.iter().map(|p| p.text.clone()).collect(),
    };
    let started = Instant::now();
    let response = backend.generate(&request).map_err(|source| RagError::Backend {
        backend: backend.kind(),
        source,
    })?;
    let latency_ms = u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX);

    let text = response.body.trim();
    if text.is_empty() {
        return Err(RagError::EmptyBody(backend.kind()));
    }
    Ok(GeneratedAnswer {
        body: format!("{text}\n\n{}", citation_block(bundle)),
        citations: bundle.passage_ids().map(str::to_string).collect(),
        generation_backend: backend.kind(),
        latency_ms,
    })
}

/// Everything the pipeline decided on the way to an answer.
#[derive(Debug, Clone)]
pub struct AnswerTrace {
    pub verdict: LanguageVerdict,
    pub retrieval: Retrieval,
    pub bundle: PromptBundle,
    pub answer: GeneratedAnswer,
}

/// The end-to-end answering pipeline. Cheap to clone; the index is shared.
#[derive(Clone)]
pub struct Pipeline {
    index: Arc<Index>,
    embedder: Arc<dyn EmbeddingProvider>,
    backend: Arc<dyn GenerationBackend>,
    policy: PromptPolicy,
    top_k: usize,
}

impl Pipeline {
    pub fn new(
        index: Arc<Index>,
        embedder: Arc<dyn EmbeddingProvider>,
        backend: Arc<dyn GenerationBackend>,
    ) -> Self {
        Pipeline {
            index,
            embedder,
            backend,
            policy: PromptPolicy::default(),
            top_k: DEFAULT_TOP_K,
        }
    }

    pub fn with_policy(mut self, policy: PromptPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = k;
        self
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn answer_traced(&self, question: &QuestionInput) -> Result<AnswerTrace, RagError> {
        let verdict = detect_language(&question.text)?;
        let retrieval = self.index.retrieve(
            self.embedder.as_ref(),
            &question.text,
            verdict.language,
            Some(&question.tags),
            self.top_k,
        )?;
        if retrieval.hits.is_empty() {
            return Err(RagError::NoContext {
                language: verdict.language,
            });
        }
        let bundle = assemble_prompt(
            question,
            verdict.language,
            &retrieval.hits,
            &self.index,
            &self.policy,
        )?;
        let answer = generate(&bundle, self.backend.as_ref())?;
        Ok(AnswerTrace {
            verdict,
            retrieval,
            bundle,
            answer,
        })
    }

    pub fn answer_question(&self, question: &QuestionInput) -> Result<GeneratedAnswer, RagError> {
        self.answer_traced(question).map(|t| t.answer)
    }
}
