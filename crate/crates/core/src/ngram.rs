//! N-gram frequency tables over a corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Message};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_N: usize = 3;
const MODEL_FORMAT_VERSION: u32 = 1;

/// A normalized probability map keyed by space-joined gram.
pub type Distribution = BTreeMap<String, f64>;

/// Occurrence counts of every n-gram (1 ≤ n ≤ `max_n`) seen inside a
/// message. Grams never span message boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    max_n: usize,
    // counts[n - 1] holds the order-n table, keyed by the space-joined gram.
    counts: Vec<HashMap<String, u64>>,
    totals: Vec<u64>,
}

impl NGramModel {
    pub fn build(corpus: &Corpus, max_n: usize) -> Result<Self> {
        Self::from_messages(corpus.messages(), max_n)
    }

    pub fn from_messages(messages: &[Message], max_n: usize) -> Result<Self> {
        if max_n < 1 {
            return Err(Error::param("max_n must be at least 1"));
        }
        let counts = messages
            .par_chunks(512)
            .map(|chunk| {
                let mut tables = vec![HashMap::new(); max_n];
                for m in chunk {
                    count_into(&mut tables, &m.tokens);
                }
                tables
            })
            .reduce(
                || vec![HashMap::new(); max_n],
                |mut acc, part| {
                    for (into, from) in acc.iter_mut().zip(part) {
                        for (gram, c) in from {
                            *into.entry(gram).or_insert(0) += c;
                        }
                    }
                    acc
                },
            );
        let totals = counts
            .iter()
            .map(|t: &HashMap<String, u64>| t.values().sum())
            .collect();
        Ok(NGramModel {
            max_n,
            counts,
            totals,
        })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// Total n-gram occurrences at order `n`.
    pub fn total(&self, n: usize) -> u64 {
        n.checked_sub(1)
            .and_then(|i| self.totals.get(i))
            .copied()
            .unwrap_or(0)
    }

    pub fn vocab_size(&self) -> usize {
        self.counts[0].len()
    }

    /// Number of distinct grams at order `n`.
    pub fn distinct(&self, n: usize) -> usize {
        self.table(n).map_or(0, HashMap::len)
    }

    fn table(&self, n: usize) -> Option<&HashMap<String, u64>> {
        n.checked_sub(1).and_then(|i| self.counts.get(i))
    }

    /// Exact occurrence count of `gram`; zero when unseen.
    pub fn count<S: AsRef<str>>(&self, gram: &[S]) -> Result<u64> {
        if gram.is_empty() || gram.len() > self.max_n {
            return Err(Error::param(format!(
                "gram length {} outside 1..={}",
                gram.len(),
                self.max_n
            )));
        }
        Ok(self.count_unchecked(gram))
    }

    pub(crate) fn count_unchecked<S: AsRef<str>>(&self, gram: &[S]) -> u64 {
        let key = join(gram);
        self.counts[gram.len() - 1].get(&key).copied().unwrap_or(0)
    }

    /// Occurrence count of a single word.
    pub fn word_count(&self, word: &str) -> u64 {
        self.counts[0].get(word).copied().unwrap_or(0)
    }

    /// Iterate over the unigram table.
    pub fn unigrams(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts[0].iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Distinct grams at order `n`.
    pub fn grams(&self, n: usize) -> impl Iterator<Item = &str> {
        self.table(n)
            .into_iter()
            .flat_map(|t| t.keys().map(String::as_str))
    }

    /// Laplace-smoothed unigram probabilities over `vocabulary`:
    /// `p(w) = (count(w) + λ) / (total + λ·|vocabulary|)`.
    pub fn unigram_distribution<'a, I>(&self, smoothing: f64, vocabulary: I) -> Result<Distribution>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.ngram_distribution(1, smoothing, vocabulary)
    }

    /// Order-`n` generalization of [`unigram_distribution`](Self::unigram_distribution);
    /// `support` holds space-joined grams.
    pub fn ngram_distribution<'a, I>(
        &self,
        n: usize,
        smoothing: f64,
        support: I,
    ) -> Result<Distribution>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let table = self
            .table(n)
            .ok_or_else(|| Error::param(format!("order {n} outside 1..={}", self.max_n)))?;
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::param(
                "smoothing must be a finite non-negative number",
            ));
        }
        let support: BTreeSet<&str> = support.into_iter().collect();
        let denom = self.total(n) as f64 + smoothing * support.len() as f64;
        if denom <= 0.0 {
            return Err(Error::Domain("distribution has zero total mass".into()));
        }
        Ok(support
            .into_iter()
            .map(|g| {
                let c = table.get(g).copied().unwrap_or(0) as f64;
                (g.to_owned(), (c + smoothing) / denom)
            })
            .collect())
    }

    /// Mean of `ln(1 + count(g))` over every n-gram `g` of `tokens`, all
    /// orders up to `max_n`. Higher means more corpus-typical.
    pub fn plausibility_score<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::param("cannot score an empty token sequence"));
        }
        let mut sum = 0.0;
        let mut grams = 0usize;
        for n in 1..=self.max_n.min(tokens.len()) {
            for window in tokens.windows(n) {
                sum += (self.count_unchecked(window) as f64).ln_1p();
                grams += 1;
            }
        }
        Ok(sum / grams as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_file(file)
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

    fn to_file(&self) -> ModelFile {
        let counts = self
            .counts
            .iter()
            .map(|t| {
                let mut rows: Vec<(String, u64)> = t.iter().map(|(g, &c)| (g.clone(), c)).collect();
                rows.sort_unstable();
                rows
            })
            .collect();
        ModelFile {
            version: Some(MODEL_FORMAT_VERSION),
            max_n: self.max_n,
            totals: self.totals.clone(),
            counts,
        }
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        match file.version {
            Some(MODEL_FORMAT_VERSION) => {}
            Some(v) => return Err(Error::Format(format!("unsupported model version {v}"))),
            None => return Err(Error::Format("missing version field".into())),
        }
        if file.max_n < 1 || file.counts.len() != file.max_n || file.totals.len() != file.max_n {
            return Err(Error::Format("order tables do not match max_n".into()));
        }
        let mut counts = Vec::with_capacity(file.max_n);
        for (i, rows) in file.counts.into_iter().enumerate() {
            let n = i + 1;
            let mut table = HashMap::with_capacity(rows.len());
            for (gram, c) in rows {
                if gram.split(' ').count() != n || gram.split(' ').any(str::is_empty) {
                    return Err(Error::Validation(format!(
                        "gram {gram:?} is not of order {n}"
                    )));
                }
                if table.insert(gram.clone(), c).is_some() {
                    return Err(Error::Validation(format!("duplicate gram {gram:?}")));
                }
            }
            counts.push(table);
        }
        for (i, t) in counts.iter().enumerate() {
            if t.values().sum::<u64>() != file.totals[i] {
                return Err(Error::Validation(format!(
                    "order {} total does not match counts",
                    i + 1
                )));
            }
        }
        Ok(NGramModel {
            max_n: file.max_n,
            counts,
            totals: file.totals,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: Option<u32>,
    max_n: usize,
    totals: Vec<u64>,
    counts: Vec<Vec<(String, u64)>>,
}

fn count_into(tables: &mut [HashMap<String, u64>], tokens: &[String]) {
    for (i, table) in tables.iter_mut().enumerate() {
        for window in tokens.windows(i + 1) {
            *table.entry(window.join(" ")).or_insert(0) += 1;
        }
    }
}

pub(crate) fn join<S: AsRef<str>>(gram: &[S]) -> String {
    let mut key = String::new();
    for (i, t) in gram.iter().enumerate() {
        if i > 0 {
            key.push(' ');
        }
        key.push_str(t.as_ref());
    }
    key
}
