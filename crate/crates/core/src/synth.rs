//! Seeded generator of tweet-like text for running the toolkit without a
//! real dataset.
//!
//! Words are drawn from a Zipf distribution over a fixed vocabulary, and
//! each word has a handful of preferred successors so that bigrams and
//! trigrams repeat the way phrases do in real text. Lines carry the usual
//! platform noise (mentions, hashtags, links, punctuation, capitals) so
//! that the scrubber has something to remove.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng as _;

use crate::seeds;

const COMMON: &[&str] = &[
    "i", "the", "to", "a", "you", "and", "it", "my", "is", "in", "for", "of", "me", "so", "on",
    "that", "have", "just", "but", "be", "not", "at", "day", "was", "now", "with", "get", "all",
    "this", "im", "good", "up", "go", "out", "today", "no", "like", "love", "work", "do", "going",
    "got", "your", "time", "too", "back", "what", "can", "u", "lol", "know", "one", "am", "really",
    "we", "well", "new", "its", "home", "there", "dont", "want", "see", "still", "oh", "night",
    "think", "will", "off", "when", "more", "had", "much", "are", "sleep", "been", "last", "some",
    "tomorrow", "miss", "need", "morning", "how", "feel", "great", "bad", "haha", "an", "then",
    "here", "why", "wish", "sad", "only", "right", "happy", "way", "about", "fun", "again", "cant",
    "from", "her", "twitter", "they", "week", "tonight", "would", "ready", "hope", "thanks", "if",
    "come", "he", "make", "sorry",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br",
    "cl", "dr", "fl", "gr", "pl", "st", "tr", "sh", "ch",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ea", "oo", "ai"];
const CODAS: &[&str] = &["", "n", "t", "s", "r", "l", "ck", "ng", "m", "p"];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub messages: usize,
    pub vocab_size: usize,
    pub zipf_exponent: f64,
    /// Probability that a word is followed by one of its preferred successors.
    pub collocation: f64,
    pub seed: u64,
    /// Add mentions, hashtags, links, punctuation and capitals.
    pub noise: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            messages: 10_000,
            vocab_size: 8_000,
            zipf_exponent: 1.0,
            collocation: 0.45,
            seed: 2020,
            noise: true,
        }
    }
}

/// Deterministic vocabulary of `size` distinct words, most frequent first.
pub fn vocabulary(size: usize) -> Vec<String> {
    let mut words: Vec<String> = COMMON.iter().take(size).map(|w| w.to_string()).collect();
    let mut seen: std::collections::HashSet<String> = words.iter().cloned().collect();
    let syllables: Vec<String> = ONSETS
        .iter()
        .flat_map(|o| {
            VOWELS
                .iter()
                .flat_map(move |v| CODAS.iter().map(move |c| format!("{o}{v}{c}")))
        })
        .collect();
    let mut i = 0usize;
    while words.len() < size {
        // interleave so neighbouring ranks do not share a prefix
        let a = &syllables[(i * 7919) % syllables.len()];
        let b = &syllables[(i / syllables.len() + i * 31) % syllables.len()];
        let w = if i.is_multiple_of(3) {
            a.clone()
        } else {
            format!("{a}{b}")
        };
        if seen.insert(w.clone()) {
            words.push(w);
        }
        i += 1;
    }
    words
}

/// Generate `cfg.messages` raw lines.
pub fn generate(cfg: &SynthConfig) -> Vec<String> {
    let vocab = vocabulary(cfg.vocab_size.max(2));
    let weights: Vec<f64> = (1..=vocab.len())
        .map(|r| (r as f64).powf(-cfg.zipf_exponent))
        .collect();
    let zipf = WeightedIndex::new(&weights).expect("positive weights");
    let mut rng = seeds::rng(cfg.seed);
    let successors: Vec<[usize; 4]> = (0..vocab.len())
        .map(|_| std::array::from_fn(|_| zipf.sample(&mut rng)))
        .collect();

    let mut lines = Vec::with_capacity(cfg.messages);
    for _ in 0..cfg.messages {
        let len = match rng.gen_range(0..20) {
            0 => rng.gen_range(1..3),
            _ => rng.gen_range(4..=22),
        };
        let mut words: Vec<String> = Vec::with_capacity(len + 3);
        let mut prev = zipf.sample(&mut rng);
        words.push(vocab[prev].clone());
        for _ in 1..len {
            prev = if rng.gen_bool(cfg.collocation) {
                successors[prev][rng.gen_range(0..4)]
            } else {
                zipf.sample(&mut rng)
            };
            words.push(vocab[prev].clone());
        }
        if cfg.noise {
            add_noise(&mut words, &mut rng);
        }
        lines.push(words.join(" "));
    }
    lines
}

fn add_noise(words: &mut Vec<String>, rng: &mut seeds::Rng) {
    if rng.gen_bool(0.3) {
        words.insert(0, format!("@user{}", rng.gen_range(0..5000)));
    }
    if rng.gen_bool(0.1) {
        words.push(format!("#tag{}", rng.gen_range(0..300)));
    }
    if rng.gen_bool(0.06) {
        words.push(format!("http://t.co/{:x}", rng.gen::<u32>()));
    }
    if rng.gen_bool(0.3) {
        let first = words
            .iter_mut()
            .find(|w| !w.starts_with('@'))
            .expect("non-empty");
        let mut c = first.chars();
        if let Some(h) = c.next() {
            *first = h.to_uppercase().chain(c).collect();
        }
    }
    if rng.gen_bool(0.4) {
        let p = ["!", ".", "...", "?", ","][rng.gen_range(0..5)];
        let i = rng.gen_range(0..words.len());
        words[i].push_str(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::ngram::NGramModel;

    #[test]
    fn vocabulary_is_distinct_and_sized() {
        let v = vocabulary(3000);
        assert_eq!(v.len(), 3000);
        let set: std::collections::HashSet<&String> = v.iter().collect();
        assert_eq!(set.len(), 3000);
        assert!(v.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            messages: 200,
            ..Default::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = SynthConfig {
            seed: 1,
            ..cfg.clone()
        };
        assert_ne!(generate(&cfg), generate(&other));
    }

    #[test]
    fn default_corpus_populates_every_band() {
        let lines = generate(&SynthConfig::default());
        let corpus = Corpus::from_lines(&lines, None).unwrap();
        assert_eq!(corpus.len(), 10_000);
        let model = NGramModel::build(&corpus, 1).unwrap();
        for band in crate::eval::default_bands() {
            let n = model.unigrams().filter(|&(_, c)| band.contains(c)).count();
            assert!(n >= 10, "band {band} has {n} words");
        }
    }
}
