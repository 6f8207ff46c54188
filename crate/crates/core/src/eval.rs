//! Decodability, density and detectability measurements.
//!
//! Every experiment derives one generator per trial from the master seed
//! (see [`crate::seeds`]), runs trials in parallel and reduces them in trial
//! order, so results are identical for any number of worker threads.
//!
//! Trials in different bands or at different densities share their cover
//! and secret draws, which keeps the comparison between rows paired.

use std::collections::BTreeSet;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::codebook::{Band, Codebook, Secret};
use crate::codec::{
    self, contains_codeword, decode, embed, StegoOptions, StegoResult, MIN_COVER_LEN,
};
use crate::corpus::{Corpus, Message};
use crate::error::{Error, Result};
use crate::ngram::{Distribution, NGramModel};
use crate::seeds::{self, stream, Rng};

pub const DEFAULT_SMOOTHING: f64 = 1.0;
pub const DEFAULT_SECRET_LEN: usize = 2;
pub const DEFAULT_BAND_TRIALS: usize = 2000;

/// The band ladder of the frequency experiment: 4-6, 6-8, 8-12, 14+.
pub fn default_bands() -> Vec<Band> {
    vec![
        Band { lo: 4, hi: Some(6) },
        Band { lo: 6, hi: Some(8) },
        Band {
            lo: 8,
            hi: Some(12),
        },
        Band { lo: 14, hi: None },
    ]
}

pub fn default_densities() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.3]
}

/// Fraction of stego tokens that are inserted codewords.
pub fn density(result: &StegoResult) -> Result<f64> {
    if result.stego.is_empty() {
        return Err(Error::param("density of an empty stego message"));
    }
    Ok(result.inserted_positions.len() as f64 / result.stego.len() as f64)
}

/// `Σ p(w)·ln(p(w)/q(w))` in nats. Both maps must share their support and
/// `q` must be positive wherever `p` is.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!(
            "support sizes differ ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    let mut sum = 0.0;
    for ((wp, &pv), (wq, &qv)) in p.iter().zip(q) {
        if wp != wq {
            return Err(Error::Domain(format!("supports differ at {wp:?} / {wq:?}")));
        }
        if !(pv >= 0.0 && qv >= 0.0) {
            return Err(Error::Domain(format!(
                "negative or NaN probability at {wp:?}"
            )));
        }
        if pv == 0.0 {
            continue;
        }
        if qv == 0.0 {
            return Err(Error::Domain(format!("q({wp:?}) = 0 where p > 0")));
        }
        sum += pv * (pv / qv).ln();
    }
    Ok(sum.max(0.0))
}

/// Smoothed order-`order` KL divergence between the corpus statistics and
/// those of `messages`, over the union of grams seen in either.
pub fn corpus_kl(
    model: &NGramModel,
    messages: &[Message],
    order: usize,
    smoothing: f64,
) -> Result<f64> {
    if order > model.max_n() {
        return Err(Error::param(format!(
            "KL order {order} exceeds the model's max_n {}",
            model.max_n()
        )));
    }
    let sample = NGramModel::from_messages(messages, order)?;
    let support: BTreeSet<&str> = model.grams(order).chain(sample.grams(order)).collect();
    let p = model.ngram_distribution(order, smoothing, support.iter().copied())?;
    let q = sample.ngram_distribution(order, smoothing, support.iter().copied())?;
    kl_divergence(&p, &q)
}

pub fn random_secret(rng: &mut Rng, alphabet: &[String], len: usize) -> Secret {
    Secret::new(
        (0..len)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone())
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub trials: usize,
    /// Trials where the receiver did not get the exact secret back,
    /// including trials where no stego could be produced.
    pub errors: usize,
    /// The subset of `errors` where steganization itself failed.
    pub failures: usize,
    pub decodability: f64,
    pub mean_density: f64,
    /// Smoothed unigram KL between the corpus and the produced stegos.
    /// Zero when no trial succeeded.
    pub kl_nats: f64,
    /// Accuracy of the plausibility distinguisher on the produced
    /// (cover, stego) pairs. 0.5 when no trial succeeded.
    pub distinguisher_accuracy: f64,
}

/// Run `trials` steganize-then-decode rounds with random secrets.
pub fn estimate_decodability(
    corpus: &Corpus,
    model: &NGramModel,
    cb: &Codebook,
    secret_len: usize,
    trials: usize,
    seed: u64,
    validate: bool,
) -> Result<EvalReport> {
    if trials < 1 {
        return Err(Error::param("trials must be at least 1"));
    }
    if cb.is_empty() && secret_len > 0 {
        return Err(Error::param("empty codebook cannot carry a secret"));
    }
    let outcomes: Vec<Result<Option<(StegoResult, bool)>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let t = t as u64;
            let secret = random_secret(
                &mut seeds::trial_rng(seed, stream::SECRET, t),
                cb.alphabet(),
                secret_len,
            );
            let opts = StegoOptions {
                seed: seeds::derive(seed, stream::COVER, t),
                validate,
                ..Default::default()
            };
            match codec::steganize(&secret, cb, model, corpus, opts) {
                Ok(r) => {
                    let ok = decode(&r.stego.tokens, cb) == secret;
                    Ok(Some((r, ok)))
                }
                Err(Error::SteganizationFailed { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut failures = 0;
    let mut misdecodes = 0;
    let mut produced = Vec::new();
    for o in outcomes {
        match o? {
            None => failures += 1,
            Some((r, ok)) => {
                if !ok {
                    misdecodes += 1;
                }
                produced.push(r);
            }
        }
    }
    let errors = failures + misdecodes;
    let (mean_density, kl_nats, distinguisher_accuracy) = if produced.is_empty() {
        (0.0, 0.0, 0.5)
    } else {
        let mean = produced.iter().map(|r| r.density).sum::<f64>() / produced.len() as f64;
        let stegos: Vec<Message> = produced.iter().map(|r| r.stego.clone()).collect();
        let kl = corpus_kl(model, &stegos, 1, DEFAULT_SMOOTHING)?;
        let pairs: Vec<(Message, Message)> =
            produced.into_iter().map(|r| (r.cover, r.stego)).collect();
        (mean, kl, distinguish(model, &pairs, seed)?.accuracy)
    };
    Ok(EvalReport {
        trials,
        errors,
        failures,
        decodability: 1.0 - errors as f64 / trials as f64,
        mean_density,
        kl_nats,
        distinguisher_accuracy,
    })
}

#[derive(Debug, Clone)]
pub struct BandExperiment {
    pub bands: Vec<Band>,
    pub alphabet: Vec<String>,
    pub trials: usize,
    pub secret_len: usize,
    pub seed: u64,
    pub validate: bool,
}

impl Default for BandExperiment {
    fn default() -> Self {
        BandExperiment {
            bands: default_bands(),
            alphabet: crate::codebook::digit_alphabet(),
            trials: DEFAULT_BAND_TRIALS,
            secret_len: DEFAULT_SECRET_LEN,
            seed: 0,
            validate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandExperimentRow {
    pub band: String,
    pub trials: usize,
    /// Trials whose decoded secret differs from the one sent.
    pub errors: usize,
    /// Trials where no usable cover was found within the attempt budget.
    pub failures: usize,
    pub codewords: Vec<String>,
    pub skipped: Option<String>,
}

/// For each band, select a codebook from that band and count how often the
/// receiver decodes something other than the secret.
pub fn run_band_experiment(
    corpus: &Corpus,
    model: &NGramModel,
    cfg: &BandExperiment,
) -> Result<Vec<BandExperimentRow>> {
    if cfg.bands.is_empty() {
        return Err(Error::param("at least one band is required"));
    }
    if cfg.trials < 1 {
        return Err(Error::param("trials must be at least 1"));
    }
    let mut rows = Vec::with_capacity(cfg.bands.len());
    for (bi, &band) in cfg.bands.iter().enumerate() {
        let cb_seed = seeds::derive(cfg.seed, stream::CODEBOOK, bi as u64);
        let cb = match Codebook::select(model, band, &cfg.alphabet, cb_seed) {
            Ok(cb) => cb,
            Err(e @ Error::InsufficientBand { .. }) => {
                rows.push(BandExperimentRow {
                    band: band.to_string(),
                    trials: 0,
                    errors: 0,
                    failures: 0,
                    codewords: Vec::new(),
                    skipped: Some(e.to_string()),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let outcomes: Vec<Result<Option<bool>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let t = t as u64;
                let secret = random_secret(
                    &mut seeds::trial_rng(cfg.seed, stream::SECRET, t),
                    cb.alphabet(),
                    cfg.secret_len,
                );
                let opts = StegoOptions {
                    seed: seeds::derive(cfg.seed, stream::COVER, t),
                    validate: cfg.validate,
                    ..Default::default()
                };
                match codec::steganize(&secret, &cb, model, corpus, opts) {
                    Ok(r) => Ok(Some(decode(&r.stego.tokens, &cb) == secret)),
                    Err(Error::SteganizationFailed { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut errors = 0;
        let mut failures = 0;
        for o in outcomes {
            match o? {
                Some(true) => {}
                Some(false) => errors += 1,
                None => failures += 1,
            }
        }
        rows.push(BandExperimentRow {
            band: band.to_string(),
            trials: cfg.trials,
            errors,
            failures,
            codewords: cb.codewords().map(str::to_owned).collect(),
            skipped: None,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct DensityExperiment {
    pub densities: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub smoothing: f64,
    /// Gram order of the KL comparison; 1 compares word frequencies.
    pub kl_order: usize,
}

impl Default for DensityExperiment {
    fn default() -> Self {
        DensityExperiment {
            densities: default_densities(),
            trials: 500,
            seed: 0,
            smoothing: DEFAULT_SMOOTHING,
            kl_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPoint {
    pub target: f64,
    /// Mean density actually reached over the produced stegos.
    pub achieved: f64,
    pub trials: usize,
    pub kl_nats: f64,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    /// The same covers with nothing inserted: the sampling-noise floor.
    pub control: DensityPoint,
    pub points: Vec<DensityPoint>,
    /// Trials that found no clean cover.
    pub cover_failures: usize,
}

/// Number of insertions that brings a cover of `len` tokens closest to
/// `target` density.
pub fn insertions_for(len: usize, target: f64) -> usize {
    (target * len as f64 / (1.0 - target)).round() as usize
}

/// Draw a cover with at least [`MIN_COVER_LEN`] tokens and no codewords.
pub fn draw_clean_cover<'a>(
    corpus: &'a Corpus,
    cb: &Codebook,
    rng: &mut Rng,
    max_attempts: usize,
) -> Option<&'a Message> {
    let messages = corpus.messages();
    (0..max_attempts)
        .map(|_| &messages[rng.gen_range(0..messages.len())])
        .find(|m| m.len() >= MIN_COVER_LEN && !contains_codeword(&m.tokens, cb))
}

struct PairedDraw<'a> {
    cover: &'a Message,
    // symbols in draw order; each density uses a prefix
    symbols: Vec<String>,
}

fn paired_draws<'a>(
    corpus: &'a Corpus,
    cb: &Codebook,
    trials: usize,
    seed: u64,
) -> Vec<Option<PairedDraw<'a>>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let t = t as u64;
            let cover = draw_clean_cover(
                corpus,
                cb,
                &mut seeds::trial_rng(seed, stream::COVER, t),
                codec::DEFAULT_MAX_ATTEMPTS,
            )?;
            let mut rng = seeds::trial_rng(seed, stream::SECRET, t);
            let max_k = insertions_for(cover.len(), 0.95).max(1);
            let symbols = random_secret(&mut rng, cb.alphabet(), max_k).symbols;
            Some(PairedDraw { cover, symbols })
        })
        .collect()
}

fn embed_at_density(
    draw: &PairedDraw<'_>,
    cb: &Codebook,
    model: &NGramModel,
    target: f64,
) -> Result<StegoResult> {
    let k = insertions_for(draw.cover.len(), target).max(1);
    let mut symbols = draw.symbols.clone();
    if symbols.len() < k {
        // extend deterministically by cycling; only reached for targets above 0.95
        let extra: Vec<String> = symbols
            .iter()
            .cycle()
            .take(k - symbols.len())
            .cloned()
            .collect();
        symbols.extend(extra);
    }
    symbols.truncate(k);
    embed(&Secret::new(symbols), cb, model, draw.cover)
}

/// Steganize random covers at each target density and measure the
/// smoothed KL divergence between corpus and stego statistics.
pub fn run_density_experiment(
    corpus: &Corpus,
    model: &NGramModel,
    cb: &Codebook,
    cfg: &DensityExperiment,
) -> Result<DensityCurve> {
    if cfg.trials < 1 {
        return Err(Error::param("trials must be at least 1"));
    }
    if cb.is_empty() {
        return Err(Error::param(
            "density experiment needs a non-empty codebook",
        ));
    }
    if let Some(d) = cfg.densities.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Error::param(format!("target density {d} outside (0, 1)")));
    }
    let draws = paired_draws(corpus, cb, cfg.trials, cfg.seed);
    let drawn: Vec<&PairedDraw<'_>> = draws.iter().flatten().collect();
    let cover_failures = cfg.trials - drawn.len();
    if drawn.is_empty() {
        return Err(Error::SteganizationFailed {
            attempts: codec::DEFAULT_MAX_ATTEMPTS,
        });
    }

    let covers: Vec<Message> = drawn.iter().map(|d| d.cover.clone()).collect();
    let control = DensityPoint {
        target: 0.0,
        achieved: 0.0,
        trials: covers.len(),
        kl_nats: corpus_kl(model, &covers, cfg.kl_order, cfg.smoothing)?,
        skipped: None,
    };

    let mut points = Vec::with_capacity(cfg.densities.len());
    for &target in &cfg.densities {
        let hostable = drawn
            .iter()
            .filter(|d| insertions_for(d.cover.len(), target) >= 1)
            .count();
        if hostable * 2 < drawn.len() {
            points.push(DensityPoint {
                target,
                achieved: 0.0,
                trials: 0,
                kl_nats: 0.0,
                skipped: Some(format!(
                    "only {hostable} of {} covers are long enough for density {target}",
                    drawn.len()
                )),
            });
            continue;
        }
        let results: Vec<StegoResult> = drawn
            .par_iter()
            .map(|d| embed_at_density(d, cb, model, target))
            .collect::<Result<_>>()?;
        let achieved = results.iter().map(|r| r.density).sum::<f64>() / results.len() as f64;
        let stegos: Vec<Message> = results.into_iter().map(|r| r.stego).collect();
        points.push(DensityPoint {
            target,
            achieved,
            trials: stegos.len(),
            kl_nats: corpus_kl(model, &stegos, cfg.kl_order, cfg.smoothing)?,
            skipped: None,
        });
    }
    Ok(DensityCurve {
        control,
        points,
        cover_failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinguisherReport {
    pub pairs: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `|2·accuracy − 1|`.
    pub advantage: f64,
    /// Binomial standard error of `accuracy` under chance (0.5).
    pub standard_error: f64,
}

/// Present each (cover, stego) pair in random order and call the text with
/// the lower plausibility score the stego. Ties go to the first text shown.
pub fn distinguish(
    model: &NGramModel,
    pairs: &[(Message, Message)],
    seed: u64,
) -> Result<DistinguisherReport> {
    if pairs.is_empty() {
        return Err(Error::param("distinguisher needs at least one pair"));
    }
    let verdicts: Vec<Result<bool>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (cover, stego))| {
            let stego_first = seeds::trial_rng(seed, stream::ORDER, i as u64).gen_bool(0.5);
            let (first, second) = if stego_first {
                (stego, cover)
            } else {
                (cover, stego)
            };
            let s1 = model.plausibility_score(&first.tokens)?;
            let s2 = model.plausibility_score(&second.tokens)?;
            let guess_first = s1 <= s2;
            Ok(guess_first == stego_first)
        })
        .collect();
    let mut correct = 0;
    for v in verdicts {
        if v? {
            correct += 1;
        }
    }
    let n = pairs.len() as f64;
    let accuracy = correct as f64 / n;
    Ok(DistinguisherReport {
        pairs: pairs.len(),
        correct,
        accuracy,
        advantage: (2.0 * accuracy - 1.0).abs(),
        standard_error: (0.25 / n).sqrt(),
    })
}

/// Fraction of pairs the plausibility distinguisher gets right.
pub fn distinguisher_accuracy(
    model: &NGramModel,
    pairs: &[(Message, Message)],
    seed: u64,
) -> Result<f64> {
    Ok(distinguish(model, pairs, seed)?.accuracy)
}

#[derive(Debug, Clone)]
pub struct DistinguishExperiment {
    pub pairs: usize,
    pub density: f64,
    pub seed: u64,
    /// Pair every cover with itself instead of a stego (chance-level control).
    pub identity: bool,
}

/// Build (cover, stego) pairs at `density` and run the distinguisher.
pub fn run_distinguish_experiment(
    corpus: &Corpus,
    model: &NGramModel,
    cb: &Codebook,
    cfg: &DistinguishExperiment,
) -> Result<DistinguisherReport> {
    if cfg.pairs < 1 {
        return Err(Error::param("pairs must be at least 1"));
    }
    if !cfg.identity && !(cfg.density > 0.0 && cfg.density < 1.0) {
        return Err(Error::param(format!(
            "target density {} outside (0, 1)",
            cfg.density
        )));
    }
    let draws = paired_draws(corpus, cb, cfg.pairs, cfg.seed);
    let pairs: Vec<(Message, Message)> = draws
        .par_iter()
        .flatten()
        .map(|d| {
            let stego = if cfg.identity {
                d.cover.clone()
            } else {
                embed_at_density(d, cb, model, cfg.density)?.stego
            };
            Ok((d.cover.clone(), stego))
        })
        .collect::<Result<_>>()?;
    distinguish(model, &pairs, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(pairs: &[(&str, f64)]) -> Distribution {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn kl_hand_values() {
        let p = dist(&[("a", 1.0), ("b", 0.0)]);
        let q = dist(&[("a", 0.5), ("b", 0.5)]);
        assert!((kl_divergence(&p, &q).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn kl_domain_errors() {
        let p = dist(&[("a", 0.5), ("b", 0.5)]);
        let zero = dist(&[("a", 1.0), ("b", 0.0)]);
        assert!(matches!(kl_divergence(&p, &zero), Err(Error::Domain(_))));
        let other = dist(&[("a", 0.5), ("c", 0.5)]);
        assert!(matches!(kl_divergence(&p, &other), Err(Error::Domain(_))));
        assert!(matches!(
            kl_divergence(&p, &dist(&[("a", 1.0)])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn unsmoothed_disjoint_vocabularies_fail() {
        let c = Corpus::from_lines(&["a b c", "a b"], None).unwrap();
        let m = NGramModel::build(&c, 1).unwrap();
        let other = vec![Message::new(vec!["x".into(), "y".into()], "")];
        assert!(matches!(
            corpus_kl(&m, &other, 1, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(corpus_kl(&m, &other, 1, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn density_examples() {
        let cover = Message::new(
            crate::corpus::tokenize("poor cast off to the trash heap when no longer usefull"),
            "",
        );
        let cb = Codebook::from_pairs([("2", "good"), ("1", "really")]).unwrap();
        let c = Corpus::from_messages(vec![cover.clone()]).unwrap();
        let m = NGramModel::build(&c, 2).unwrap();
        let r = embed(&Secret::new(vec!["2".into(), "1".into()]), &cb, &m, &cover).unwrap();
        assert!((density(&r).unwrap() - 2.0 / 13.0).abs() < 1e-12);
        assert!((density(&r).unwrap() - 0.1538).abs() < 1e-4);

        let empty = embed(&Secret::default(), &cb, &m, &cover).unwrap();
        assert_eq!(density(&empty).unwrap(), 0.0);

        let three = Message::new(vec!["a".into(), "b".into(), "c".into()], "");
        let r = embed(&Secret::new(vec!["2".into()]), &cb, &m, &three).unwrap();
        assert_eq!(density(&r).unwrap(), 0.25);

        let mut bad = r.clone();
        bad.stego.tokens.clear();
        assert!(density(&bad).is_err());
    }

    #[test]
    fn insertion_count_rounding() {
        assert_eq!(insertions_for(10, 0.05), 1);
        assert_eq!(insertions_for(9, 0.3), 4);
        assert_eq!(insertions_for(4, 0.05), 0);
    }

    #[test]
    fn single_pair_is_all_or_nothing() {
        let c = Corpus::from_lines(&["a b c d", "a b c"], None).unwrap();
        let m = NGramModel::build(&c, 2).unwrap();
        let pair = (
            c.messages()[0].clone(),
            Message::new(vec!["zz".into(), "a".into(), "qq".into()], ""),
        );
        for seed in 0..10 {
            let acc = distinguisher_accuracy(&m, std::slice::from_ref(&pair), seed).unwrap();
            assert!(acc == 0.0 || acc == 1.0);
        }
        assert!(distinguisher_accuracy(&m, &[], 0).is_err());
    }

    #[test]
    fn trials_must_be_positive() {
        let c = Corpus::from_lines(&["a b c d"], None).unwrap();
        let m = NGramModel::build(&c, 2).unwrap();
        let cb = Codebook::from_pairs([("0", "b")]).unwrap();
        assert!(estimate_decodability(&c, &m, &cb, 1, 0, 0, true).is_err());
    }

    fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            v.into_iter().map(|x| (x + 1e-9 / 8.0) / s).collect()
        })
    }

    proptest! {
        #[test]
        fn gibbs_inequality(p in probs(8), q in probs(8)) {
            let keys = ["a", "b", "c", "d", "e", "f", "g", "h"];
            let p: Distribution = keys.iter().map(|k| k.to_string()).zip(p).collect();
            let q: Distribution = keys.iter().map(|k| k.to_string()).zip(q).collect();
            prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
        }
    }
}
