use coursemate_core::language::{detect_language, Language, FR_STOPWORDS};
use coursemate_testkit::{fixture, lang_oracle};
use proptest::prelude::*;

#[test]
fn spec_examples_agree_with_stopword_oracle() {
    for (text, want) in [
        ("How do I declare a variable in my sketch?", Language::En),
        ("Comment déclarer une variable dans mon programme ?", Language::Fr),
    ] {
        assert_eq!(lang_oracle::stopword_verdict(text), want);
        assert_eq!(detect_language(text).unwrap().language, want);
    }
    let v = detect_language("x = 5").unwrap();
    assert_eq!((v.language, v.confidence), (Language::En, 0.5));
}

#[test]
fn pair_fixture_accuracy_and_flips() {
    let pairs = lang_oracle::load_pairs(&fixture("lang_pairs.tsv"));
    assert_eq!(pairs.len(), 200);
    let mut correct = 0;
    let mut flips = 0;
    let mut misses = Vec::new();
    for (en, fr) in &pairs {
        let ve = detect_language(en).unwrap().language;
        let vf = detect_language(fr).unwrap().language;
        correct += usize::from(ve == Language::En) + usize::from(vf == Language::Fr);
        if ve == Language::En && vf == Language::Fr {
            flips += 1;
        } else {
            misses.push((en.clone(), fr.clone()));
        }
    }
    let accuracy = correct as f64 / (2 * pairs.len()) as f64;
    assert!(accuracy >= 0.95, "accuracy {accuracy}, misses {misses:?}");
    assert!(flips * 100 >= pairs.len() * 95, "{flips} flips, misses {misses:?}");
}

#[test]
fn oracle_and_detector_mostly_agree_on_fixture() {
    let pairs = lang_oracle::load_pairs(&fixture("lang_pairs.tsv"));
    let texts: Vec<&String> = pairs.iter().flat_map(|(e, f)| [e, f]).collect();
    let agree = texts
        .iter()
        .filter(|t| lang_oracle::stopword_verdict(t) == detect_language(t).unwrap().language)
        .count();
    assert!(agree * 100 >= texts.len() * 90, "{agree}/{}", texts.len());
}

fn neutral_word() -> impl Strategy<Value = String> {
    "[bcdfgkmpvxz]{1,6}"
}

proptest! {
    #[test]
    fn deterministic(text in "\\PC{1,80}") {
        prop_assume!(!text.trim().is_empty());
        prop_assert_eq!(detect_language(&text).unwrap(), detect_language(&text).unwrap());
    }

    #[test]
    fn appending_diacritics_never_moves_towards_english(
        words in prop::collection::vec(neutral_word(), 1..6),
        extra in prop::collection::vec(prop::sample::select(vec!['é', 'è', 'ç', 'à']), 1..8),
    ) {
        let base = words.join(" ");
        let before = detect_language(&base).unwrap();
        let suffix: String = extra.iter().map(|c| format!(" {c}")).collect();
        let after = detect_language(&format!("{base}{suffix}")).unwrap();
        prop_assert!(after.fr_score >= before.fr_score);
        prop_assert_eq!(after.en_score, before.en_score);
        if before.language == Language::Fr {
            prop_assert_eq!(after.language, Language::Fr);
        }
        if before.en_score == before.fr_score {
            prop_assert_eq!(after.language, Language::Fr);
        }
    }

    #[test]
    fn french_stopwords_alone_give_french(idx in prop::collection::vec(0..FR_STOPWORDS.len(), 1..8)) {
        let text: Vec<&str> = idx.iter().map(|&i| FR_STOPWORDS[i]).collect();
        prop_assert_eq!(detect_language(&text.join(" ")).unwrap().language, Language::Fr);
    }

    #[test]
    fn confidence_is_a_share(text in "[a-zéèàç ]{1,60}") {
        prop_assume!(!text.trim().is_empty());
        let v = detect_language(&text).unwrap();
        prop_assert!((0.5..=1.0).contains(&v.confidence));
    }
}
