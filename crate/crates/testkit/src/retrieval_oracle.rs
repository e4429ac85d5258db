//! Exhaustive-scan retrieval recomputed from the raw passages.

use std::cmp::Ordering;

use coursemate_core::index::{Embedding, EmbeddingProvider};
use coursemate_core::{Language, Passage};

/// Plain sum of products in f64, clamped; zero vectors score 0.
pub fn dot(a: &Embedding, b: &Embedding) -> f64 {
    let (a, b) = (a.values(), b.values());
    assert_eq!(a.len(), b.len());
    if a.iter().all(|x| *x == 0.0) || b.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let mut sum = 0.0f64;
    for i in 0..a.len() {
        sum += a[i] as f64 * b[i] as f64;
    }
    sum.clamp(-1.0, 1.0)
}

/// Cosine from first principles: dot over the product of the norms.
pub fn cosine_from_scratch(a: &[f32], b: &[f32]) -> f64 {
    let mut ab = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        ab += *x as f64 * *y as f64;
        aa += *x as f64 * *x as f64;
        bb += *y as f64 * *y as f64;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Top `k` (passage id, score) pairs. Passages outside `lang` are skipped;
/// a tag filter keeps passages sharing any requested tag unless that would
/// leave nothing, in which case it is ignored.
pub fn top_k(
    passages: &[Passage],
    provider: &dyn EmbeddingProvider,
    question: &str,
    lang: Language,
    tags: Option<&[String]>,
    k: usize,
) -> Vec<(String, f64)> {
    let query = provider.embed(question).expect("query embeds");
    let wanted: Vec<String> = tags
        .unwrap_or(&[])
        .iter()
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();

    let same_lang: Vec<&Passage> = passages.iter().filter(|p| p.language == lang).collect();
    let tagged: Vec<&Passage> = same_lang
        .iter()
        .copied()
        .filter(|p| p.tags.iter().any(|t| wanted.contains(t)))
        .collect();
    let pool = if tagged.is_empty() { same_lang } else { tagged };

    let mut scored: Vec<(String, f64)> = pool
        .into_iter()
        .map(|p| {
            let e = provider.embed(&p.text).expect("passage embeds");
            (p.passage_id.clone(), dot(&query, &e))
        })
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    scored.truncate(k);
    scored
}
