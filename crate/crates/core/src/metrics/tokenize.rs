//! Canonical tokenizer shared by every text metric.

use serde::{Deserialize, Serialize};

/// Lowercased tokens of one text, as produced by [`tokenize`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Concatenation used for the PAIR unit; both inputs are already split
    /// so no token can straddle the boundary.
    pub fn concat(&self, other: &TokenSequence) -> TokenSequence {
        let mut tokens = Vec::with_capacity(self.len() + other.len());
        tokens.extend_from_slice(&self.tokens);
        tokens.extend_from_slice(&other.tokens);
        TokenSequence { tokens }
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Splits `text` into maximal runs of letters, digits and apostrophes; every
/// other non-whitespace character is a token of its own. Output is lowercased.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            run_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(text[start..i].to_lowercase());
        }
        if !c.is_whitespace() {
            tokens.push(c.to_lowercase().collect());
        }
    }
    if let Some(start) = run_start {
        tokens.push(text[start..].to_lowercase());
    }
    TokenSequence { tokens }
}

/// True for tokens that carry at least one letter or digit.
pub fn is_word_token(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens
    }

    #[test]
    fn contraction_and_period() {
        assert_eq!(toks("It's unfair."), ["it's", "unfair", "."]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n").is_empty());
    }

    #[test]
    fn slash_splits_digits() {
        assert_eq!(toks("9/11 attacks"), ["9", "/", "11", "attacks"]);
    }

    #[test]
    fn unicode_letters_stay_together() {
        assert_eq!(toks("Éxito señor—ok"), ["éxito", "señor", "—", "ok"]);
    }

    #[test]
    fn repeated_punctuation_is_split() {
        assert_eq!(toks("well..."), ["well", ".", ".", "."]);
    }

    #[test]
    fn word_token_filter() {
        assert!(is_word_token("it's"));
        assert!(is_word_token("9"));
        assert!(!is_word_token("'"));
        assert!(!is_word_token("."));
    }
}
