//! Message ingestion: scrubbing platform artifacts and tokenizing into words.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// One scrubbed, tokenized message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub tokens: Vec<String>,
    /// Where the message came from, e.g. `line:17`.
    pub source_id: String,
}

impl Message {
    pub fn new(tokens: Vec<String>, source_id: impl Into<String>) -> Self {
        Message {
            tokens,
            source_id: source_id.into(),
        }
    }

    /// Scrub and tokenize `raw` into a message.
    pub fn from_raw(raw: &str, source_id: impl Into<String>) -> Self {
        Message::new(tokenize(&scrub_message(raw)), source_id)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// The universe of cover messages for one genre.
#[derive(Debug, Clone)]
pub struct Corpus {
    messages: Vec<Message>,
    vocabulary: BTreeMap<String, u64>,
    total_tokens: u64,
}

impl Corpus {
    /// Build a corpus from already-tokenized messages. Empty messages are
    /// dropped; an error is returned if nothing remains.
    pub fn from_messages(messages: Vec<Message>) -> Result<Self> {
        let messages: Vec<Message> = messages.into_iter().filter(|m| !m.is_empty()).collect();
        if messages.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut vocabulary = BTreeMap::new();
        let mut total_tokens = 0u64;
        for token in messages.iter().flat_map(|m| &m.tokens) {
            *vocabulary.entry(token.clone()).or_insert(0) += 1;
            total_tokens += 1;
        }
        Ok(Corpus {
            messages,
            vocabulary,
            total_tokens,
        })
    }

    /// Scrub and tokenize raw lines, keeping at most `limit` usable messages.
    /// Line numbers (1-based) become the source ids.
    pub fn from_lines<S: AsRef<str> + Sync>(lines: &[S], limit: Option<usize>) -> Result<Self> {
        let mut messages: Vec<Message> = lines
            .par_iter()
            .enumerate()
            .map(|(i, line)| Message::from_raw(line.as_ref(), format!("line:{}", i + 1)))
            .filter(|m| !m.is_empty())
            .collect();
        if let Some(limit) = limit {
            messages.truncate(limit);
        }
        Corpus::from_messages(messages)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Distinct tokens with their occurrence counts.
    pub fn vocabulary(&self) -> &BTreeMap<String, u64> {
        &self.vocabulary
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}

/// Lowercase `raw`, drop usernames, hashtags and URLs as whole tokens, and
/// strip punctuation from what remains. Digits are kept.
pub fn scrub_message(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for token in lowered.split_whitespace() {
        if is_platform_artifact(token) {
            continue;
        }
        let word: String = token.chars().filter(|c| c.is_alphanumeric()).collect();
        if word.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&word);
    }
    out
}

fn is_platform_artifact(token: &str) -> bool {
    let core = token.trim_start_matches(['"', '\'', '(', '[', '{', '<']);
    core.starts_with('@')
        || core.starts_with('#')
        || core.starts_with("www.")
        || token.contains("://")
}

/// Split on runs of whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Read a line-delimited UTF-8 file, one raw message per line.
pub fn load_corpus(path: impl AsRef<Path>, limit: Option<usize>) -> Result<Corpus> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = raw.lines().collect();
    Corpus::from_lines(&lines, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn scrub_removes_platform_tokens() {
        assert_eq!(scrub_message("@john Hello #fun http://x.co"), "hello");
        assert_eq!(scrub_message("see www.example.com now"), "see now");
        assert_eq!(scrub_message("(@someone) said hi"), "said hi");
    }

    #[test]
    fn scrub_strips_punctuation_keeps_digits() {
        assert_eq!(scrub_message("Poor cast, off!"), "poor cast off");
        assert_eq!(scrub_message("I'm 21 today..."), "im 21 today");
        assert_eq!(scrub_message("!!! ..."), "");
        assert_eq!(scrub_message(""), "");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("poor cast off"), toks(&["poor", "cast", "off"]));
        assert_eq!(tokenize("  a  b "), toks(&["a", "b"]));
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn toy_corpus_counts() {
        let c = Corpus::from_lines(&["the cat sat", "the cat ran", "a cat sat"], None).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.total_tokens(), 9);
        let words: Vec<&str> = c.vocabulary().keys().map(String::as_str).collect();
        assert_eq!(words, ["a", "cat", "ran", "sat", "the"]);
        assert_eq!(c.vocabulary()["cat"], 3);
    }

    #[test]
    fn limit_truncates_and_blank_lines_drop() {
        let c = Corpus::from_lines(&["", "the cat sat", "  ", "a cat sat"], Some(1)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.messages()[0].source_id, "line:2");
        assert!(matches!(
            Corpus::from_lines(&["", "   ", "#only @tags"], None),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn load_reports_io_error() {
        let err = load_corpus("/nonexistent/corpus.txt", None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    proptest! {
        #[test]
        fn scrub_is_idempotent(raw in "\\PC{0,60}") {
            let once = scrub_message(&raw);
            prop_assert_eq!(scrub_message(&once), once.clone());
        }

        #[test]
        fn scrubbed_tokens_respect_invariants(raw in "[ a-zA-Z@#:/.,!0-9]{0,80}") {
            for t in tokenize(&scrub_message(&raw)) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.starts_with('@') && !t.starts_with('#') && !t.contains("://"));
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }

        #[test]
        fn tokenize_is_stable_under_rejoin(text in "[ \\ta-z]{0,40}") {
            let t = tokenize(&text);
            prop_assert_eq!(tokenize(&t.join(" ")), t);
        }

        #[test]
        fn vocabulary_sums_to_total(lines in proptest::collection::vec("[a-d ]{1,12}", 1..20)) {
            if let Ok(c) = Corpus::from_lines(&lines, None) {
                prop_assert_eq!(c.vocabulary().values().sum::<u64>(), c.total_tokens());
            }
        }
    }
}
