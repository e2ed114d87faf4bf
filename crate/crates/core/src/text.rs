//! Tokenization shared by every module: lowercase, split on any run of
//! non-alphanumeric characters.

use std::collections::BTreeSet;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "an", "the", "of", "with", "to", "in", "on", "into", "onto", "over", "under", "from",
    "for", "at", "by", "and", "or",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(BTreeSet<String>);

impl Default for StopWords {
    fn default() -> Self {
        Self::new(DEFAULT_STOP_WORDS.iter().copied())
    }
}

impl StopWords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Split a verb-noun action phrase ("chopping onions") into its verb and
/// content-noun tokens.
pub fn verb_and_nouns(phrase: &str, stop: &StopWords) -> Option<(String, Vec<String>)> {
    let mut tokens = tokenize(phrase).into_iter();
    let verb = tokens.next()?;
    let nouns = tokens.filter(|t| !stop.contains(t)).collect();
    Some((verb, nouns))
}

/// Content tokens of a noun phrase such as an ingredient name.
pub fn content_tokens(text: &str, stop: &StopWords) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !stop.contains(t)).collect()
}

/// Lowercase, collapse non-alphanumerics to `-`.
pub fn slug(text: &str) -> String {
    tokenize(text).join("-")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_runs() {
        assert_eq!(
            tokenize("Kewra & Rose-Water!!"),
            vec!["kewra", "rose", "water"]
        );
        assert!(tokenize("  ,;  ").is_empty());
    }

    #[test]
    fn verb_is_first_token() {
        let (v, n) = verb_and_nouns("Adding mint leaves to rice", &StopWords::default()).unwrap();
        assert_eq!(v, "adding");
        assert_eq!(n, vec!["mint", "leaves", "rice"]);
        assert!(verb_and_nouns("", &StopWords::default()).is_none());
    }
}
