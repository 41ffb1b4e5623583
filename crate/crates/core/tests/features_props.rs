use std::collections::HashSet;

use corpusclean::features::{
    char_repetition_ratio, extract_features, tokenize_with, word_repetition_ratio, FeatureConfig, Resources,
    TokenizerMode,
};
use corpusclean::{Document, Lexicons};
use proptest::prelude::*;

/// Duplicated k-gram occurrences over all occurrences, by pairwise comparison.
fn brute_dup<T: PartialEq>(items: &[T], k: usize) -> f64 {
    if items.len() < k {
        return 0.0;
    }
    let grams: Vec<&[T]> = (0..=items.len() - k).map(|i| &items[i..i + k]).collect();
    let dup = (0..grams.len())
        .filter(|&i| (0..grams.len()).any(|j| j != i && grams[j] == grams[i]))
        .count();
    dup as f64 / grams.len() as f64
}

fn resources() -> Resources {
    let mut lex = Lexicons::new();
    lex.insert_stopwords("eng_Latn", ["the", "a", "of"].iter().map(|s| s.to_string()).collect());
    lex.insert_flagged("eng_Latn", HashSet::from(["spam".to_string()]));
    Resources::new(lex)
}

fn text_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        "\\PC{0,80}",
        "[ab \n]{0,60}",
        "(the|a|spam|of|x|😀|!!|中文|ß|\u{301}| |\n){0,40}",
    ]
}

proptest! {
    #[test]
    fn ranges_hold_for_any_text(text in text_strategy(), lang in prop_oneof![Just("eng_Latn"), Just("zho_Hani")]) {
        let doc = Document::new("d", lang, text);
        let f = extract_features(&doc, &resources(), &FeatureConfig::default());
        prop_assert!(f.n_words >= 0.0 && f.n_words.fract() == 0.0);
        for v in [f.r_char_rep, f.r_word_rep, f.r_special, f.r_stop, f.r_flag, f.s_lid] {
            prop_assert!((0.0..=1.0).contains(&v), "{v}");
        }
        prop_assert!(f.s_ppl >= 1.0);
    }

    #[test]
    fn char_repetition_matches_brute_force(text in "[abc ]{0,60}", k in 1usize..12) {
        let chars: Vec<char> = text.chars().collect();
        prop_assert_eq!(char_repetition_ratio(&text, k).unwrap(), brute_dup(&chars, k));
    }

    #[test]
    fn word_repetition_matches_brute_force(words in prop::collection::vec("[ab]{1,2}", 0..40), k in 1usize..4) {
        prop_assert_eq!(word_repetition_ratio(&words, k).unwrap(), brute_dup(&words, k));
    }

    #[test]
    fn fresh_suffix_cannot_raise_char_repetition(text in "[abc ]{0,60}", fresh_len in 1usize..30) {
        let k = 10;
        let fresh: String = (0..fresh_len).map(|i| char::from_u32(0x4E00 + i as u32).unwrap()).collect();
        let joined = format!("{text}{fresh}");
        let before = char_repetition_ratio(&text, k).unwrap();
        let after = char_repetition_ratio(&joined, k).unwrap();
        let chars: Vec<char> = joined.chars().collect();
        prop_assert_eq!(after, brute_dup(&chars, k));
        prop_assert!(after <= before);
    }

    #[test]
    fn tokenizer_is_total(text in text_strategy()) {
        for mode in [TokenizerMode::Words, TokenizerMode::Chars] {
            for t in tokenize_with(&text, mode) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize_with("Hello, World!", TokenizerMode::Words), ["hello", "world"]);
    assert_eq!(tokenize_with("😀😀 ... !!", TokenizerMode::Words), Vec::<String>::new());
    assert_eq!(tokenize_with("中文 abc", TokenizerMode::Chars), ["中", "文", "abc"]);
}
