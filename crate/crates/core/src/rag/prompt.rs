use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::language::Language;

/// The two configurable policy clauses every directive carries verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPolicy {
    pub hint_clause: String,
    pub citation_clause: String,
}

impl Default for PromptPolicy {
    fn default() -> Self {
        PromptPolicy {
            hint_clause: "Give hints and suggestions that help the learner reach the answer \
                          on their own. Never write a complete solution or full code for an \
                          assignment."
                .to_string(),
            citation_clause: "End your answer by citing the numbered course passages you \
                              relied on."
                .to_string(),
        }
    }
}

impl PromptPolicy {
    pub fn directive(&self, language: Language) -> String {
        format!(
            "You are a teaching assistant answering a learner's question in the forum of an \
             introductory programming course.\n\
             Answer in {}.\n\
             Ground every statement in the supplied course passages. If they do not contain \
             the answer, say so and suggest asking a course facilitator.\n\
             {}\n\
             {}",
            language.name(),
            self.hint_clause,
            self.citation_clause
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPassage {
    pub passage_id: String,
    pub title: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_directive: String,
    pub question_text: String,
    pub context_passages: Vec<ContextPassage>,
    pub attachment_refs: Vec<String>,
    pub language: Language,
}

impl PromptBundle {
    pub fn passage_ids(&self) -> impl Iterator<Item = &str> {
        self.context_passages.iter().map(|p| p.passage_id.as_str())
    }

    /// Learner-side text: the question, followed by attachment references
    /// when there are any.
    pub fn user_text(&self) -> String {
        if self.attachment_refs.is_empty() {
            self.question_text.clone()
        } else {
            format!(
                "{}\n\nAttachments: {}",
                self.question_text,
                self.attachment_refs.join(", ")
            )
        }
    }

    /// Single-string rendering of the whole prompt, used for logging and by
    /// backends that take one text blob.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("### Instructions\n");
        out.push_str(&self.system_directive);
        out.push_str("\n\n### Course passages\n");
        for (i, p) in self.context_passages.iter().enumerate() {
            let _ = write!(out, "[{}] {}", i + 1, p.passage_id);
            if let Some(title) = &p.title {
                let _ = write!(out, " ({title})");
            }
            out.push('\n');
            out.push_str(&p.text);
            out.push_str("\n\n");
        }
        if !self.attachment_refs.is_empty() {
            out.push_str("### Attachments\n");
            for a in &self.attachment_refs {
                let _ = writeln!(out, "- {a}");
            }
            out.push('\n');
        }
        out.push_str("### Question\n");
        out.push_str(&self.question_text);
        out.push('\n');
        out
    }
}
