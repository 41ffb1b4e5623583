//! Unicode general-category predicates.

use icu_properties::props::{GeneralCategory, GeneralCategoryGroup};
use icu_properties::CodePointMapData;

#[inline]
pub(crate) fn category(c: char) -> GeneralCategory {
    CodePointMapData::<GeneralCategory>::new().get(c)
}

/// Letters, marks and numbers: the characters that make up word tokens.
#[inline]
pub(crate) fn is_word_char(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_alphanumeric();
    }
    let gc = category(c);
    GeneralCategoryGroup::Letter.contains(gc)
        || GeneralCategoryGroup::Mark.contains(gc)
        || GeneralCategoryGroup::Number.contains(gc)
}

#[inline]
pub(crate) fn is_mark(c: char) -> bool {
    !c.is_ascii() && GeneralCategoryGroup::Mark.contains(category(c))
}

/// Punctuation, symbols (emoji included), numbers, separators and whitespace
/// controls, excluding the plain space U+0020.
pub(crate) fn is_default_special(c: char) -> bool {
    if c == ' ' {
        return false;
    }
    if c.is_ascii_alphabetic() {
        return false;
    }
    let gc = category(c);
    GeneralCategoryGroup::Punctuation.contains(gc)
        || GeneralCategoryGroup::Symbol.contains(gc)
        || GeneralCategoryGroup::Number.contains(gc)
        || GeneralCategoryGroup::Separator.contains(gc)
        || (gc == GeneralCategory::Control && c.is_whitespace())
}

#[cfg(test)]
pub(crate) fn is_letter_or_mark(c: char) -> bool {
    let gc = category(c);
    GeneralCategoryGroup::Letter.contains(gc) || GeneralCategoryGroup::Mark.contains(gc)
}

/// Scripts written without spaces between words.
pub(crate) fn is_unsegmented_script(c: char) -> bool {
    use icu_properties::props::Script;
    if c.is_ascii() {
        return false;
    }
    let sc = CodePointMapData::<Script>::new().get(c);
    sc == Script::Han
        || sc == Script::Hiragana
        || sc == Script::Katakana
        || sc == Script::Thai
        || sc == Script::Khmer
        || sc == Script::Lao
        || sc == Script::Myanmar
}
