//! Small text helpers shared by several modules.

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of a string.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Lowercased alphanumeric word tokens, in order.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Phrase matcher over lowercased word tokens.
///
/// A phrase matches when its words appear as consecutive tokens, so
/// `"work on"` matches "Work on improving" but not "workon".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phrase {
    text: String,
    words: Vec<String>,
}

impl Phrase {
    pub fn new(text: &str) -> Option<Self> {
        let words = words(text);
        if words.is_empty() {
            return None;
        }
        Some(Self {
            text: text.trim().to_string(),
            words,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Token indices where the phrase starts.
    pub fn positions(&self, tokens: &[String]) -> Vec<usize> {
        if tokens.len() < self.words.len() {
            return Vec::new();
        }
        (0..=tokens.len() - self.words.len())
            .filter(|&i| tokens[i..i + self.words.len()] == self.words[..])
            .collect()
    }

    pub fn occurs_in(&self, tokens: &[String]) -> bool {
        !self.positions(tokens).is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_split_on_punctuation_and_lowercase() {
        assert_eq!(
            words("Work on it, ECTS-points! Æble"),
            vec!["work", "on", "it", "ects", "points", "æble"]
        );
        assert!(words("  ..  ").is_empty());
    }

    #[test]
    fn phrase_positions() {
        let p = Phrase::new("did not like").unwrap();
        let toks = words("I did not like it; she did not like it either");
        assert_eq!(p.positions(&toks), vec![1, 6]);
        assert!(Phrase::new(" -- ").is_none());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
