use corpusclean::anomaly::{classify, DEFAULT_CONTAMINATION};
use corpusclean::lexicons::default_special_chars;
use corpusclean::ngram_lm::{default_perplexity, DEFAULT_MIN_SENTENCES};
use corpusclean::{Document, FeatureConfig, Label, Resources, FEATURE_NAMES};

#[test]
fn default_values() {
    assert_eq!(DEFAULT_CONTAMINATION, 0.0769);
    assert_eq!(default_perplexity(), 500.0);
    assert_eq!(DEFAULT_MIN_SENTENCES, 10_000);
}

#[test]
fn threshold_boundary_removes() {
    assert_eq!(classify(0.5, 0.5), Label::Remove);
    assert_eq!(classify(0.4999, 0.5), Label::Keep);
}

#[test]
fn digits_and_punctuation_are_special() {
    let s = default_special_chars();
    for c in ['7', '!', '😀', '\u{a0}'] {
        assert!(s.contains(c), "{c:?}");
    }
    assert!(!s.contains('a'));
    assert!(!s.contains(' '));
}

#[test]
fn feature_numbering_puts_lid_seventh() {
    assert_eq!(FEATURE_NAMES[6], "s_lid");
    assert_eq!(FEATURE_NAMES[7], "s_ppl");
    assert_eq!(FEATURE_NAMES[0], "n_words");
}

#[test]
fn missing_model_gives_default_perplexity() {
    let f = corpusclean::extract_features(
        &Document::new("d", "xyz_Latn", "some words here"),
        &Resources::default(),
        &FeatureConfig::default(),
    );
    assert_eq!(f.s_ppl, 500.0);
    assert_eq!(f.s_lid, 1.0);
}
