//! Random bilingual course corpora and questions.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use coursemate_core::{Language, SourceDocument};

pub const EN_WORDS: &[&str] = &[
    "variable", "loop", "function", "ball", "paddle", "screen", "score", "color", "draw",
    "setup", "ellipse", "rectangle", "width", "height", "speed", "position", "bounce", "wall",
    "condition", "array", "index", "value", "integer", "float", "text", "touch", "frame",
    "game", "player", "assignment", "quiz", "certificate", "deadline", "grade", "lesson",
    "section", "error", "semicolon", "brace", "parameter", "return", "random", "circle",
];

pub const FR_WORDS: &[&str] = &[
    "variable", "boucle", "fonction", "balle", "raquette", "écran", "score", "couleur",
    "dessiner", "ellipse", "rectangle", "largeur", "hauteur", "vitesse", "position", "rebond",
    "mur", "condition", "tableau", "indice", "valeur", "entier", "texte", "toucher", "image",
    "jeu", "joueur", "devoir", "quiz", "certificat", "échéance", "note", "leçon", "section",
    "erreur", "accolade", "paramètre", "retour", "aléatoire", "cercle", "déclarer",
];

const EN_GLUE: &[&str] = &["the", "of", "and", "to", "is", "with", "how", "what", "my"];
const FR_GLUE: &[&str] = &["le", "la", "les", "de", "des", "et", "est", "dans", "comment"];

pub const TAGS: &[&str] = &[
    "section-1", "section-2", "section-3", "section-4", "section-5", "quiz", "admin",
];

fn words(lang: Language) -> (&'static [&'static str], &'static [&'static str]) {
    match lang {
        Language::En => (EN_WORDS, EN_GLUE),
        Language::Fr => (FR_WORDS, FR_GLUE),
    }
}

/// A sentence alternating content words with language-marking glue words.
pub fn sentence<R: Rng>(rng: &mut R, lang: Language, len: usize) -> String {
    let (content, glue) = words(lang);
    let mut out = Vec::with_capacity(len);
    for i in 0..len.max(1) {
        let w = if i % 2 == 1 {
            glue.choose(rng)
        } else {
            content.choose(rng)
        };
        out.push(*w.expect("non-empty word list"));
    }
    let mut s = out.join(" ");
    if let Some(first) = s.get(..1) {
        s = first.to_uppercase() + &s[1..];
    }
    s.push('.');
    s
}

pub fn paragraph<R: Rng>(rng: &mut R, lang: Language) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| {
            let len = rng.random_range(4..=14);
            sentence(rng, lang, len)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_tags<R: Rng>(rng: &mut R) -> Vec<String> {
    let n = rng.random_range(0..=2);
    let mut tags: Vec<&str> = TAGS.to_vec();
    tags.shuffle(rng);
    tags.into_iter().take(n).map(str::to_string).collect()
}

/// Documents in both languages totalling at most `max_passages` passages.
/// Each language gets at least one document.
pub fn random_corpus<R: Rng>(rng: &mut R, max_passages: usize) -> Vec<SourceDocument> {
    corpus(rng, max_passages, true)
}

/// Like [`random_corpus`] but with exactly `passages` passages.
pub fn corpus_of_size<R: Rng>(rng: &mut R, passages: usize) -> Vec<SourceDocument> {
    corpus(rng, passages, false)
}

fn corpus<R: Rng>(rng: &mut R, max_passages: usize, may_stop: bool) -> Vec<SourceDocument> {
    assert!(max_passages >= 2);
    let mut docs = Vec::new();
    let mut remaining = max_passages;
    let mut i = 0;
    while remaining > 0 {
        let lang = match i {
            0 => Language::En,
            1 => Language::Fr,
            _ => *Language::ALL.choose(rng).expect("two languages"),
        };
        // leave room for the second language
        let cap = if i == 0 { remaining - 1 } else { remaining };
        let n = rng.random_range(1..=cap.min(6));
        let body = (0..n)
            .map(|_| paragraph(rng, lang))
            .collect::<Vec<_>>()
            .join("\n\n");
        docs.push(SourceDocument {
            doc_id: format!("{}-doc-{i:03}", lang.code()),
            language: lang,
            title: format!("Document {i}"),
            body,
            section_tags: random_tags(rng),
        });
        remaining -= n;
        i += 1;
        if may_stop && i >= 2 && rng.random_bool(0.05) {
            break;
        }
    }
    docs
}

/// A short question in `lang`.
pub fn random_question<R: Rng>(rng: &mut R, lang: Language) -> String {
    let len = rng.random_range(3..=10);
    let mut s = sentence(rng, lang, len);
    s.pop();
    s.push_str(" ?");
    if lang == Language::En {
        s = s.replace(" ?", "?");
    }
    s
}
