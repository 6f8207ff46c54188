//! The shared secret: a bijection between secret symbols and codewords.
//!
//! A codebook file is the key the sender and receiver agree on beforehand.
//! It is never transmitted over the cover channel; anyone holding it can
//! read every message.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::NGramModel;
use crate::seeds;

const CODEBOOK_FORMAT_VERSION: u32 = 1;

/// Inclusive band of unigram occurrence counts. `hi = None` is unbounded,
/// written `lo+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Band {
    pub lo: u64,
    pub hi: Option<u64>,
}

impl Band {
    pub fn new(lo: u64, hi: Option<u64>) -> Result<Self> {
        if lo < 1 {
            return Err(Error::param("band lower bound must be at least 1"));
        }
        if matches!(hi, Some(h) if h < lo) {
            return Err(Error::param("band upper bound below lower bound"));
        }
        Ok(Band { lo, hi })
    }

    pub fn contains(&self, count: u64) -> bool {
        count >= self.lo && self.hi.is_none_or(|h| count <= h)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "{}-{}", self.lo, hi),
            None => write!(f, "{}+", self.lo),
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("band {s:?} is not of the form lo-hi or lo+"));
        let s = s.trim();
        if let Some(lo) = s.strip_suffix('+') {
            return Band::new(lo.trim().parse().map_err(|_| bad())?, None);
        }
        let (lo, hi) = s.split_once('-').ok_or_else(bad)?;
        Band::new(
            lo.trim().parse().map_err(|_| bad())?,
            Some(hi.trim().parse().map_err(|_| bad())?),
        )
    }
}

/// The default alphabet: the ten decimal digits.
pub fn digit_alphabet() -> Vec<String> {
    (0..10).map(|d| d.to_string()).collect()
}

/// Parse a comma-separated alphabet, or split a single run of characters
/// into one symbol per character ("0123" or "a,b,c").
pub fn parse_alphabet(s: &str) -> Vec<String> {
    if s.contains(',') {
        s.split(',')
            .map(|x| x.trim().to_owned())
            .filter(|x| !x.is_empty())
            .collect()
    } else {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    alphabet: Vec<String>,
    forward: HashMap<String, String>,
    inverse: HashMap<String, String>,
    band: Option<Band>,
    seed: Option<u64>,
}

impl Codebook {
    /// Build a codebook from explicit `(symbol, codeword)` pairs; the pair
    /// order defines the alphabet order.
    pub fn from_pairs<S: Into<String>, W: Into<String>>(
        pairs: impl IntoIterator<Item = (S, W)>,
    ) -> Result<Self> {
        let (alphabet, words): (Vec<String>, Vec<String>) =
            pairs.into_iter().map(|(s, w)| (s.into(), w.into())).unzip();
        Self::assemble(alphabet, words, None, None)
    }

    fn assemble(
        alphabet: Vec<String>,
        words: Vec<String>,
        band: Option<Band>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut forward = HashMap::with_capacity(alphabet.len());
        let mut inverse = HashMap::with_capacity(alphabet.len());
        for (sym, word) in alphabet.iter().zip(&words) {
            if sym.is_empty() {
                return Err(Error::Validation("empty symbol".into()));
            }
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!(
                    "codeword {word:?} is not a single token"
                )));
            }
            if forward.insert(sym.clone(), word.clone()).is_some() {
                return Err(Error::Validation(format!("symbol {sym:?} appears twice")));
            }
            if inverse.insert(word.clone(), sym.clone()).is_some() {
                return Err(Error::Validation(format!(
                    "codeword {word:?} is mapped from two symbols"
                )));
            }
        }
        Ok(Codebook {
            alphabet,
            forward,
            inverse,
            band,
            seed,
        })
    }

    /// Sample `|alphabet|` distinct words whose unigram count lies in `band`,
    /// uniformly without replacement, and assign them to the symbols in
    /// alphabet order.
    pub fn select(model: &NGramModel, band: Band, alphabet: &[String], seed: u64) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::param("alphabet must not be empty"));
        }
        let mut eligible: Vec<&str> = model
            .unigrams()
            .filter(|&(_, c)| band.contains(c))
            .map(|(w, _)| w)
            .collect();
        if eligible.len() < alphabet.len() {
            return Err(Error::InsufficientBand {
                band,
                found: eligible.len(),
                needed: alphabet.len(),
            });
        }
        eligible.sort_unstable();
        let mut rng = seeds::rng(seed);
        let picks = index::sample(&mut rng, eligible.len(), alphabet.len());
        let words = picks.iter().map(|i| eligible[i].to_owned()).collect();
        Self::assemble(alphabet.to_vec(), words, Some(band), Some(seed))
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn band(&self) -> Option<Band> {
        self.band
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    pub fn map_symbol(&self, symbol: &str) -> Result<&str> {
        self.forward
            .get(symbol)
            .map(String::as_str)
            .ok_or_else(|| Error::param(format!("symbol {symbol:?} is not in the alphabet")))
    }

    pub fn unmap_word(&self, word: &str) -> Option<&str> {
        self.inverse.get(word).map(String::as_str)
    }

    pub fn is_codeword(&self, word: &str) -> bool {
        self.inverse.contains_key(word)
    }

    /// Codewords in alphabet order.
    pub fn codewords(&self) -> impl Iterator<Item = &str> {
        self.alphabet.iter().map(move |s| self.forward[s].as_str())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CodebookFile {
            version: Some(CODEBOOK_FORMAT_VERSION),
            alphabet: self.alphabet.clone(),
            forward: self
                .forward
                .iter()
                .map(|(s, w)| (s.clone(), w.clone()))
                .collect(),
            band: self.band,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodebookFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        match file.version {
            Some(CODEBOOK_FORMAT_VERSION) => {}
            Some(v) => return Err(Error::Format(format!("unsupported codebook version {v}"))),
            None => return Err(Error::Format("missing version field".into())),
        }
        if file.forward.len() != file.alphabet.len() {
            return Err(Error::Validation(
                "forward map does not cover the alphabet exactly".into(),
            ));
        }
        let mut words = Vec::with_capacity(file.alphabet.len());
        for sym in &file.alphabet {
            let w = file
                .forward
                .get(sym)
                .ok_or_else(|| Error::Validation(format!("symbol {sym:?} has no codeword")))?;
            words.push(w.clone());
        }
        Self::assemble(file.alphabet, words, file.band, file.seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    version: Option<u32>,
    alphabet: Vec<String>,
    forward: BTreeMap<String, String>,
    band: Option<Band>,
    seed: Option<u64>,
}

/// A secret: an ordered sequence of alphabet symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Secret {
    pub symbols: Vec<String>,
}

impl Secret {
    pub fn new(symbols: Vec<String>) -> Self {
        Secret { symbols }
    }

    /// Parse `text` against `cb`'s alphabet. Whitespace-separated input is
    /// split on whitespace ("2 1"); otherwise each character is one symbol
    /// ("21").
    pub fn parse(text: &str, cb: &Codebook) -> Result<Self> {
        let symbols: Vec<String> = if text.trim().contains(char::is_whitespace) {
            text.split_whitespace().map(str::to_owned).collect()
        } else {
            text.trim().chars().map(String::from).collect()
        };
        let secret = Secret { symbols };
        secret.check(cb)?;
        Ok(secret)
    }

    pub fn check(&self, cb: &Codebook) -> Result<()> {
        match self.symbols.iter().find(|s| !cb.forward.contains_key(*s)) {
            Some(s) => Err(Error::param(format!(
                "secret symbol {s:?} is not in the codebook alphabet"
            ))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.symbols.iter().all(|s| s.chars().count() == 1) {
            self.symbols.iter().try_for_each(|s| f.write_str(s))
        } else {
            f.write_str(&self.symbols.join(" "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use proptest::prelude::*;

    fn paper_codebook() -> Codebook {
        Codebook::from_pairs([("2", "good"), ("1", "really")]).unwrap()
    }

    fn toy() -> NGramModel {
        let c = Corpus::from_lines(&["the cat sat", "the cat ran", "a cat sat"], None).unwrap();
        NGramModel::build(&c, 2).unwrap()
    }

    #[test]
    fn band_parsing() {
        assert_eq!("4-6".parse::<Band>().unwrap(), Band { lo: 4, hi: Some(6) });
        assert_eq!("14+".parse::<Band>().unwrap(), Band { lo: 14, hi: None });
        assert_eq!(Band { lo: 14, hi: None }.to_string(), "14+");
        assert!("0-3".parse::<Band>().is_err());
        assert!("6-4".parse::<Band>().is_err());
        assert!("x".parse::<Band>().is_err());
        assert!(Band { lo: 14, hi: None }.contains(10_000));
        assert!(!Band { lo: 4, hi: Some(6) }.contains(7));
    }

    #[test]
    fn select_on_toy_model() {
        let m = toy();
        let band = Band::new(2, Some(3)).unwrap();
        let alphabet = parse_alphabet("01");
        let cb = Codebook::select(&m, band, &alphabet, 17).unwrap();
        let words: Vec<&str> = cb.codewords().collect();
        assert_eq!(words.len(), 2);
        assert_ne!(words[0], words[1]);
        for w in &words {
            assert!(["the", "cat", "sat"].contains(w));
            assert!(band.contains(m.word_count(w)));
        }
        assert_eq!(cb, Codebook::select(&m, band, &alphabet, 17).unwrap());
    }

    #[test]
    fn select_errors_and_forced_choice() {
        let m = toy();
        let err = Codebook::select(&m, Band::new(100, Some(200)).unwrap(), &digit_alphabet(), 1)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientBand {
                found: 0,
                needed: 10,
                ..
            }
        ));

        let only_cat = Band::new(3, Some(3)).unwrap();
        for seed in 0..20 {
            let cb = Codebook::select(&m, only_cat, &["0".to_string()], seed).unwrap();
            assert_eq!(cb.map_symbol("0").unwrap(), "cat");
        }
    }

    #[test]
    fn map_and_unmap() {
        let cb = paper_codebook();
        assert_eq!(cb.map_symbol("2").unwrap(), "good");
        assert_eq!(cb.map_symbol("1").unwrap(), "really");
        assert!(cb.map_symbol("x").is_err());
        assert_eq!(cb.unmap_word("good"), Some("2"));
        assert_eq!(cb.unmap_word("trash"), None);
        for s in cb.alphabet() {
            assert_eq!(cb.unmap_word(cb.map_symbol(s).unwrap()), Some(s.as_str()));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        let cb = paper_codebook();
        cb.save(&path).unwrap();
        assert_eq!(Codebook::load(&path).unwrap(), cb);

        let selected = Codebook::select(
            &toy(),
            Band::new(1, None).unwrap(),
            &parse_alphabet("012"),
            9,
        )
        .unwrap();
        assert_eq!(
            Codebook::from_json(&selected.to_json().unwrap()).unwrap(),
            selected
        );
    }

    #[test]
    fn load_rejects_bad_files() {
        let dup = r#"{"version":1,"alphabet":["1","2"],"forward":{"1":"good","2":"good"},"band":null,"seed":null}"#;
        assert!(matches!(
            Codebook::from_json(dup),
            Err(Error::Validation(_))
        ));
        let unversioned = r#"{"alphabet":["1"],"forward":{"1":"good"},"band":null,"seed":null}"#;
        assert!(matches!(
            Codebook::from_json(unversioned),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            Codebook::from_json("not json"),
            Err(Error::Format(_))
        ));
        let missing = r#"{"version":1,"alphabet":["1","2"],"forward":{"1":"good","3":"bad"},"band":null,"seed":null}"#;
        assert!(matches!(
            Codebook::from_json(missing),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn secret_parsing() {
        let cb = paper_codebook();
        assert_eq!(Secret::parse("21", &cb).unwrap().symbols, ["2", "1"]);
        assert_eq!(Secret::parse("2 1", &cb).unwrap().symbols, ["2", "1"]);
        assert!(Secret::parse("", &cb).unwrap().is_empty());
        assert!(Secret::parse("2x", &cb).is_err());
        assert_eq!(Secret::parse("21", &cb).unwrap().to_string(), "21");
    }

    proptest! {
        #[test]
        fn selection_respects_band_and_bijection(lo in 1u64..4, width in 0u64..3, seed in any::<u64>()) {
            let c = Corpus::from_lines(
                &["a b c d e f", "a b c d e", "a b c d", "a b c", "a b", "a", "g h i j k l m"],
                None,
            ).unwrap();
            let m = NGramModel::build(&c, 1).unwrap();
            let band = Band::new(lo, Some(lo + width)).unwrap();
            match Codebook::select(&m, band, &parse_alphabet("01"), seed) {
                Ok(cb) => {
                    for s in cb.alphabet() {
                        let w = cb.map_symbol(s).unwrap();
                        prop_assert!(band.contains(m.word_count(w)));
                        prop_assert_eq!(cb.unmap_word(w), Some(s.as_str()));
                    }
                    prop_assert_eq!(cb.clone(), Codebook::select(&m, band, &parse_alphabet("01"), seed).unwrap());
                }
                Err(Error::InsufficientBand { found, .. }) => prop_assert!(found < 2),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
