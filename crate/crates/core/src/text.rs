//! Text normalization shared by the classifier, the gazetteer matcher and the
//! LLM guards.

use unicode_normalization::UnicodeNormalization;

/// A normalized token together with its character span in the NFC form of
/// the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// NFC-normalizes `text`.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Splits `text` into lowercase alphanumeric tokens.
///
/// The input is NFC-normalized first, then split on every run of
/// non-alphanumeric characters. Digits are ordinary token characters.
pub fn normalize(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// Like [`normalize`] but keeps character offsets into the NFC form.
pub fn tokenize(text: &str) -> Vec<Token> {
    let composed = nfc(text);
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut idx = 0;
    for ch in composed.chars() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = idx;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: idx,
            });
        }
        idx += 1;
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            start,
            end: idx,
        });
    }
    tokens
}

/// NFC, trim, and collapse internal whitespace runs to a single space.
/// Case is preserved.
pub fn collapse_whitespace(text: &str) -> String {
    nfc(text).split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Converts a free-form label ("Transfer funds between accounts") into a
/// lowercase snake_case identifier. Leading articles are dropped so that
/// "Pay a bill" and "Pay bill" agree.
pub fn slugify(label: &str) -> String {
    const FILLER: [&str; 3] = ["a", "an", "the"];
    normalize(label)
        .into_iter()
        .filter(|t| !FILLER.contains(&t.as_str()))
        .collect::<Vec<_>>()
        .join("_")
}

/// Byte offset of the `char_idx`-th character of `s` (or `s.len()`).
pub(crate) fn byte_offset(s: &str, char_idx: usize) -> usize {
    s.char_indices().nth(char_idx).map_or(s.len(), |(b, _)| b)
}

/// Substring by character offsets.
pub(crate) fn char_slice(s: &str, start: usize, end: usize) -> &str {
    &s[byte_offset(s, start)..byte_offset(s, end)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize("I want to cancel this account"),
            ["i", "want", "to", "cancel", "this", "account"]
        );
        assert!(normalize("").is_empty());
        assert_eq!(normalize("Transfer $400!"), ["transfer", "400"]);
    }

    #[test]
    fn decomposed_input_is_composed() {
        // "u" + COMBINING DIAERESIS
        let tokens = tokenize("nu\u{0308}mme verfüegbar");
        assert_eq!(tokens[0].text, "nümme");
        assert_eq!((tokens[0].start, tokens[0].end), (0, 5));
        assert_eq!(tokens[1].start, 6);
    }

    #[test]
    fn offsets_are_characters() {
        let t = tokenize("Grüße, 10012 Zürich");
        assert_eq!(t.len(), 3);
        assert_eq!(
            char_slice(&nfc("Grüße, 10012 Zürich"), t[2].start, t[2].end),
            "Zürich"
        );
    }

    #[test]
    fn slugify_drops_articles() {
        assert_eq!(slugify("Pay a bill"), "pay_bill");
        assert_eq!(slugify("Check account balance"), "check_account_balance");
    }

    #[test]
    fn collapse_keeps_case() {
        assert_eq!(
            collapse_whitespace("  Please  call\t001 \n"),
            "Please call 001"
        );
    }
}
