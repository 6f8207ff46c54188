//! Codeword insertion (sender) and codeword extraction (receiver).

use rand::Rng as _;
use serde::{Serialize, Serializer};

use crate::codebook::{Codebook, Secret};
use crate::corpus::{Corpus, Message};
use crate::error::{Error, Result};
use crate::ngram::NGramModel;
use crate::seeds;

/// Covers shorter than this are redrawn.
pub const MIN_COVER_LEN: usize = 3;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StegoOptions {
    pub seed: u64,
    /// Screen covers for accidental codewords and check that the stego
    /// decodes back to the secret. When off, the first usable cover is
    /// used as drawn, so false codes reach the receiver.
    pub validate: bool,
    pub max_attempts: usize,
}

impl Default for StegoOptions {
    fn default() -> Self {
        StegoOptions {
            seed: 0,
            validate: true,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl StegoOptions {
    pub fn seeded(seed: u64) -> Self {
        StegoOptions {
            seed,
            ..Default::default()
        }
    }
}

/// A steganized message together with the cover it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StegoResult {
    #[serde(serialize_with = "as_text")]
    pub stego: Message,
    #[serde(serialize_with = "as_text")]
    pub cover: Message,
    pub inserted_positions: Vec<usize>,
    pub attempts: usize,
    pub density: f64,
}

fn as_text<S: Serializer>(m: &Message, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.text())
}

impl StegoResult {
    /// The stego tokens with the inserted positions removed.
    pub fn recovered_cover(&self) -> Vec<&str> {
        let mut skip = self.inserted_positions.iter().peekable();
        self.stego
            .tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                if skip.peek() == Some(&i) {
                    skip.next();
                    false
                } else {
                    true
                }
            })
            .map(|(_, t)| t.as_str())
            .collect()
    }

    /// The tokens found at the inserted positions.
    pub fn inserted_words(&self) -> Vec<&str> {
        self.inserted_positions
            .iter()
            .map(|&i| self.stego.tokens[i].as_str())
            .collect()
    }
}

pub fn contains_codeword<S: AsRef<str>>(tokens: &[S], cb: &Codebook) -> bool {
    tokens.iter().any(|t| cb.is_codeword(t.as_ref()))
}

/// Sum of `ln(1 + count)` over every n-gram (2 ≤ n ≤ max_n) that the word
/// at `pos` would take part in after insertion.
pub fn insertion_score<S: AsRef<str>>(
    model: &NGramModel,
    tokens: &[S],
    pos: usize,
    word: &str,
) -> Result<f64> {
    if pos < 1 || pos + 1 > tokens.len() {
        return Err(Error::param(format!(
            "insertion index {pos} is not between two of {} tokens",
            tokens.len()
        )));
    }
    Ok(score_at(model, tokens, pos, word))
}

fn score_at<S: AsRef<str>>(model: &NGramModel, tokens: &[S], pos: usize, word: &str) -> f64 {
    let mut with: Vec<&str> = Vec::with_capacity(tokens.len() + 1);
    with.extend(tokens[..pos].iter().map(AsRef::as_ref));
    with.push(word);
    with.extend(tokens[pos..].iter().map(AsRef::as_ref));

    let mut score = 0.0;
    for n in 2..=model.max_n() {
        if with.len() < n {
            break;
        }
        let first = pos.saturating_sub(n - 1);
        let last = pos.min(with.len() - n);
        for start in first..=last {
            score += (model.count_unchecked(&with[start..start + n]) as f64).ln_1p();
        }
    }
    score
}

/// The inter-word index in `[min_pos, len - 1]` with the highest insertion
/// score, leftmost on ties.
pub fn best_position<S: AsRef<str>>(
    model: &NGramModel,
    tokens: &[S],
    word: &str,
    min_pos: usize,
) -> Result<usize> {
    let lo = min_pos.max(1);
    let hi = tokens.len().checked_sub(1).ok_or(Error::NoPosition)?;
    if lo > hi {
        return Err(Error::NoPosition);
    }
    let mut best = (lo, f64::NEG_INFINITY);
    for pos in lo..=hi {
        let s = score_at(model, tokens, pos, word);
        if s > best.1 {
            best = (pos, s);
        }
    }
    Ok(best.0)
}

/// Insert the codewords for `secret` into `cover`, left to right, each at
/// its best position after the previous one.
pub fn embed(
    secret: &Secret,
    cb: &Codebook,
    model: &NGramModel,
    cover: &Message,
) -> Result<StegoResult> {
    secret.check(cb)?;
    if cover.len() < 2 {
        return Err(Error::NoPosition);
    }
    let mut tokens = cover.tokens.clone();
    let mut positions: Vec<usize> = Vec::with_capacity(secret.len());
    for sym in &secret.symbols {
        let word = cb.map_symbol(sym)?;
        let min_pos = positions.last().map_or(1, |p| p + 1);
        let pos = best_position(model, &tokens, word, min_pos)?;
        tokens.insert(pos, word.to_owned());
        positions.push(pos);
    }
    let density = positions.len() as f64 / tokens.len() as f64;
    Ok(StegoResult {
        stego: Message::new(tokens, cover.source_id.clone()),
        cover: cover.clone(),
        inserted_positions: positions,
        attempts: 1,
        density,
    })
}

/// Hide `secret` in a randomly drawn cover from `covers`.
///
/// Draws covers with the seeded generator until one is usable: at least
/// [`MIN_COVER_LEN`] tokens and, with validation on, free of codewords and
/// decoding back to `secret` after insertion.
pub fn steganize(
    secret: &Secret,
    cb: &Codebook,
    model: &NGramModel,
    covers: &Corpus,
    opts: StegoOptions,
) -> Result<StegoResult> {
    secret.check(cb)?;
    if opts.max_attempts < 1 {
        return Err(Error::param("max_attempts must be at least 1"));
    }
    let messages = covers.messages();
    let mut rng = seeds::rng(opts.seed);
    for attempt in 1..=opts.max_attempts {
        let cover = &messages[rng.gen_range(0..messages.len())];
        if cover.len() < MIN_COVER_LEN {
            continue;
        }
        if opts.validate && contains_codeword(&cover.tokens, cb) {
            continue;
        }
        let mut result = embed(secret, cb, model, cover)?;
        if opts.validate && decode(&result.stego.tokens, cb) != *secret {
            continue;
        }
        result.attempts = attempt;
        return Ok(result);
    }
    Err(Error::SteganizationFailed {
        attempts: opts.max_attempts,
    })
}

/// Read every codeword left to right.
pub fn decode<S: AsRef<str>>(tokens: &[S], cb: &Codebook) -> Secret {
    Secret::new(
        tokens
            .iter()
            .filter_map(|t| cb.unmap_word(t.as_ref()))
            .map(str::to_owned)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;

    const COVER: &str = "poor cast off to the trash heap when no longer usefull";
    const STEGO: &str = "poor cast off to the good trash heap when no longer really usefull";

    fn paper_codebook() -> Codebook {
        Codebook::from_pairs([("2", "good"), ("1", "really")]).unwrap()
    }

    fn toy() -> NGramModel {
        let c = Corpus::from_lines(&["the cat sat", "the cat ran", "a cat sat"], None).unwrap();
        NGramModel::build(&c, 2).unwrap()
    }

    fn secret(s: &str) -> Secret {
        Secret::new(s.chars().map(String::from).collect())
    }

    #[test]
    fn codeword_detection() {
        let cb = paper_codebook();
        assert!(!contains_codeword(&tokenize(COVER), &cb));
        assert!(contains_codeword(&["the", "good", "dog"], &cb));
        let empty = Codebook::from_pairs(Vec::<(String, String)>::new()).unwrap();
        assert!(!contains_codeword(&["good"], &empty));
    }

    #[test]
    fn insertion_score_examples() {
        let m = toy();
        let s = insertion_score(&m, &["the", "sat"], 1, "cat").unwrap();
        assert!((s - 2.0 * 3f64.ln()).abs() < 1e-12);
        assert!((s - 2.197).abs() < 1e-3);
        assert_eq!(
            insertion_score(&m, &["the", "sat"], 1, "zebra").unwrap(),
            0.0
        );
        assert_eq!(s, insertion_score(&m, &["the", "sat"], 1, "cat").unwrap());
        assert!(insertion_score(&m, &["the", "sat"], 0, "cat").is_err());
        assert!(insertion_score(&m, &["the", "sat"], 2, "cat").is_err());
    }

    #[test]
    fn best_position_examples() {
        let m = toy();
        let toks = ["the", "sat", "ran"];
        let p2 = insertion_score(&m, &toks, 2, "cat").unwrap();
        assert!((p2 - 2f64.ln()).abs() < 1e-12);
        assert_eq!(best_position(&m, &toks, "cat", 1).unwrap(), 1);
        assert_eq!(best_position(&m, &["x", "y", "z", "w"], "q", 2).unwrap(), 2);
        assert!(matches!(
            best_position(&m, &toks, "cat", 3),
            Err(Error::NoPosition)
        ));
    }

    #[test]
    fn decode_examples() {
        let cb = paper_codebook();
        assert_eq!(decode(&tokenize(STEGO), &cb).to_string(), "21");
        assert!(decode(&tokenize(COVER), &cb).is_empty());
        let one = Codebook::from_pairs([("2", "good")]).unwrap();
        assert_eq!(decode(&["good", "x", "good"], &one).to_string(), "22");
    }

    #[test]
    fn steganize_worked_example_cover() {
        let corpus = Corpus::from_lines(&[COVER], None).unwrap();
        let model = NGramModel::build(&corpus, 3).unwrap();
        let cb = paper_codebook();
        let r = steganize(&secret("21"), &cb, &model, &corpus, StegoOptions::seeded(5)).unwrap();
        assert_eq!(decode(&r.stego.tokens, &cb).to_string(), "21");
        assert_eq!(r.recovered_cover(), tokenize(COVER));
        assert_eq!(r.inserted_words(), ["good", "really"]);
        assert_eq!(r.stego.len(), 13);
        assert!((r.density - 2.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn empty_secret_leaves_cover() {
        let corpus = Corpus::from_lines(&[COVER], None).unwrap();
        let model = NGramModel::build(&corpus, 2).unwrap();
        let r = steganize(
            &Secret::default(),
            &paper_codebook(),
            &model,
            &corpus,
            StegoOptions::default(),
        )
        .unwrap();
        assert_eq!(r.stego, r.cover);
        assert_eq!(r.density, 0.0);
        assert!(r.inserted_positions.is_empty());
    }

    #[test]
    fn steganize_errors() {
        let corpus =
            Corpus::from_lines(&["the good day really", "really good stuff here"], None).unwrap();
        let model = NGramModel::build(&corpus, 2).unwrap();
        let cb = paper_codebook();
        let err = steganize(
            &secret("1"),
            &cb,
            &model,
            &corpus,
            StegoOptions {
                max_attempts: 25,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::SteganizationFailed { attempts: 25 }));
        assert!(matches!(
            steganize(&secret("9"), &cb, &model, &corpus, StegoOptions::default()),
            Err(Error::Parameter(_))
        ));
        // without validation the contaminated cover goes through and mis-decodes
        let raw = steganize(
            &secret("1"),
            &cb,
            &model,
            &corpus,
            StegoOptions {
                validate: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(decode(&raw.stego.tokens, &cb), secret("1"));
    }

    #[test]
    fn short_covers_are_skipped() {
        let corpus = Corpus::from_lines(&["hi there"], None).unwrap();
        let model = NGramModel::build(&corpus, 2).unwrap();
        let err = steganize(
            &secret("2"),
            &paper_codebook(),
            &model,
            &corpus,
            StegoOptions {
                max_attempts: 3,
                ..Default::default()
            },
        );
        assert!(matches!(
            err,
            Err(Error::SteganizationFailed { attempts: 3 })
        ));
    }

    fn word() -> impl Strategy<Value = String> {
        prop_oneof!["a", "b", "c", "d", "e", "f", "g"].prop_map(String::from)
    }

    proptest! {
        #[test]
        fn round_trip_and_structure(
            lines in proptest::collection::vec(proptest::collection::vec(word(), 3..10), 1..15),
            syms in proptest::collection::vec(0usize..3, 0..5),
            seed in any::<u64>(),
        ) {
            let joined: Vec<String> = lines.iter().map(|l| l.join(" ")).collect();
            let corpus = Corpus::from_lines(&joined, None).unwrap();
            let model = NGramModel::build(&corpus, 3).unwrap();
            let cb = Codebook::from_pairs([("0", "x"), ("1", "y"), ("2", "z")]).unwrap();
            let s = Secret::new(syms.iter().map(|i| i.to_string()).collect());
            let r = steganize(&s, &cb, &model, &corpus, StegoOptions::seeded(seed)).unwrap();
            prop_assert_eq!(decode(&r.stego.tokens, &cb), s.clone());
            prop_assert_eq!(r.recovered_cover(), r.cover.tokens.iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert!(r.inserted_positions.windows(2).all(|w| w[0] < w[1]));
            let expected: Vec<&str> = s.symbols.iter().map(|x| cb.map_symbol(x).unwrap()).collect();
            prop_assert_eq!(r.inserted_words(), expected);
            prop_assert_eq!(r.stego.len(), r.cover.len() + s.len());
            prop_assert!(r.inserted_positions.iter().all(|&p| p >= 1 && p + 1 < r.stego.len()));
            prop_assert_eq!(r.clone(), steganize(&s, &cb, &model, &corpus, StegoOptions::seeded(seed)).unwrap());
        }
    }
}
