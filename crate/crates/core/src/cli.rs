//! The `lingstego` command line.
//!
//! Exit codes: 0 success, 2 usage or I/O error, 3 insufficient band,
//! 4 steganization failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::codebook::{parse_alphabet, Band, Codebook, Secret};
use crate::codec::{self, StegoOptions, DEFAULT_MAX_ATTEMPTS};
use crate::corpus::{load_corpus, scrub_message, tokenize, Corpus};
use crate::error::Error;
use crate::eval::{self, BandExperiment, DensityExperiment, DistinguishExperiment};
use crate::ngram::{NGramModel, DEFAULT_MAX_N};
use crate::synth::{self, SynthConfig};
use crate::TOOL_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BAND: i32 = 3;
pub const EXIT_STEGO: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "lingstego",
    version,
    about = "Hide digit strings in ordinary text by n-gram guided codeword insertion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count n-grams over a line-delimited corpus and write the model as JSON.
    BuildModel {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_N)]
        max_n: usize,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a random codebook from a word-frequency band.
    GenCodebook {
        #[arg(long)]
        model: PathBuf,
        /// "lo-hi" or "lo+", in raw occurrence counts.
        #[arg(long)]
        band: Band,
        #[arg(long, default_value = "0123456789")]
        alphabet: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide a secret in a randomly chosen cover and print the stego text.
    Encode {
        #[arg(long, allow_hyphen_values = true)]
        secret: String,
        #[arg(long)]
        codebook: PathBuf,
        #[command(flatten)]
        sources: Sources,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_validate: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: usize,
        /// Also write the full result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the secret from a text (argument or standard input).
    Decode {
        #[arg(long)]
        codebook: PathBuf,
        text: Option<String>,
    },
    /// Run one of the evaluation experiments.
    Eval {
        #[command(subcommand)]
        experiment: EvalCommand,
    },
    /// Write a seeded synthetic tweet-like corpus, one message per line.
    SynthCorpus {
        #[arg(long, default_value_t = 10_000)]
        messages: usize,
        #[arg(long, default_value_t = 8_000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 2020)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct Sources {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Write JSON here and CSV next to it (same name, .csv extension).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print this format on standard output instead of the summary table.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Decode errors per codeword frequency band.
    Band {
        #[command(flatten)]
        sources: Sources,
        /// Repeatable; defaults to 4-6, 6-8, 8-12, 14+.
        #[arg(long = "band")]
        bands: Vec<Band>,
        #[arg(long, default_value = "0123456789")]
        alphabet: String,
        #[arg(long, default_value_t = eval::DEFAULT_BAND_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = eval::DEFAULT_SECRET_LEN)]
        secret_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// KL divergence of word statistics as codeword density grows.
    Density {
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = eval::default_densities())]
        densities: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = eval::DEFAULT_SMOOTHING)]
        lambda: f64,
        /// Gram order for the KL comparison (1 = word frequencies).
        #[arg(long, default_value_t = 1)]
        kl_order: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Plausibility distinguisher accuracy on (cover, stego) pairs.
    Distinguish {
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        /// Number of pairs.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pair each cover with itself (chance-level control).
        #[arg(long)]
        identity: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Steganize-and-decode rounds with random secrets.
    Decodability {
        #[command(flatten)]
        sources: Sources,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long, default_value_t = eval::DEFAULT_SECRET_LEN)]
        secret_len: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_validate: bool,
        #[command(flatten)]
        output: Output,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InsufficientBand { .. } => EXIT_BAND,
        Error::SteganizationFailed { .. } => EXIT_STEGO,
        _ => EXIT_USAGE,
    }
}

/// Parse `args` and run the command, writing to the given streams.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match dispatch(cli.command, stdin, out, err) {
        Ok(()) => EXIT_OK,
        Err(CliError::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Err(CliError::Stream(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

enum CliError {
    Lib(Error),
    Stream(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Stream(e)
    }
}

type CliResult = std::result::Result<(), CliError>;

fn load_sources(s: &Sources) -> Result<(Corpus, NGramModel), Error> {
    Ok((
        load_corpus(&s.corpus, s.limit)?,
        NGramModel::load(&s.model)?,
    ))
}

/// Output envelope: every artifact records the tool version, seed and the
/// configuration that produced it.
fn envelope(
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
    result: impl Serialize,
) -> serde_json::Value {
    json!({
        "tool": "lingstego",
        "version": TOOL_VERSION,
        "command": command,
        "seed": seed,
        "config": config,
        "result": result,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn emit(
    out: &mut dyn Write,
    output: &Output,
    json: &serde_json::Value,
    csv: &str,
    table: &str,
) -> CliResult {
    let json_text = serde_json::to_string_pretty(json).expect("json values serialize") + "\n";
    if let Some(path) = &output.out {
        write_file(path, &json_text)?;
        write_file(&path.with_extension("csv"), csv)?;
    }
    match output.format {
        Some(Format::Json) => out.write_all(json_text.as_bytes())?,
        Some(Format::Csv) => out.write_all(csv.as_bytes())?,
        None => out.write_all(table.as_bytes())?,
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn dispatch(
    command: Command,
    stdin: &mut dyn Read,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    match command {
        Command::BuildModel {
            corpus,
            max_n,
            limit,
            out: path,
        } => {
            let c = load_corpus(&corpus, limit)?;
            let model = NGramModel::build(&c, max_n)?;
            model.save(&path)?;
            writeln!(
                out,
                "messages: {}\nvocabulary: {}\ntokens: {}",
                c.len(),
                model.vocab_size(),
                c.total_tokens()
            )?;
            for n in 1..=max_n {
                writeln!(
                    out,
                    "order {n}: {} distinct, {} total",
                    model.distinct(n),
                    model.total(n)
                )?;
            }
        }
        Command::GenCodebook {
            model,
            band,
            alphabet,
            seed,
            out: path,
        } => {
            let m = NGramModel::load(&model)?;
            let occupancy = m.unigrams().filter(|&(_, c)| band.contains(c)).count();
            writeln!(out, "band {band}: {occupancy} eligible words")?;
            let cb = Codebook::select(&m, band, &parse_alphabet(&alphabet), seed)?;
            cb.save(&path)?;
            writeln!(out, "wrote {} codewords to {}", cb.len(), path.display())?;
        }
        Command::Encode {
            secret,
            codebook,
            sources,
            seed,
            no_validate,
            max_attempts,
            out: path,
        } => {
            let cb = Codebook::load(&codebook)?;
            let secret = Secret::parse(&secret, &cb)?;
            let (corpus, model) = load_sources(&sources)?;
            let opts = StegoOptions {
                seed,
                validate: !no_validate,
                max_attempts,
            };
            let result = codec::steganize(&secret, &cb, &model, &corpus, opts)?;
            writeln!(out, "{}", result.stego.text())?;
            if let Some(path) = path {
                let config = json!({
                    "secret": secret.to_string(),
                    "codebook": path_str(&codebook),
                    "corpus": path_str(&sources.corpus),
                    "model": path_str(&sources.model),
                    "limit": sources.limit,
                    "validate": !no_validate,
                    "max_attempts": max_attempts,
                });
                let doc = envelope("encode", Some(seed), config, &result);
                write_file(
                    &path,
                    &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"),
                )?;
            }
        }
        Command::Decode { codebook, text } => {
            let cb = Codebook::load(&codebook)?;
            let text = match text {
                Some(t) => t,
                None => {
                    let mut buf = String::new();
                    stdin.read_to_string(&mut buf)?;
                    buf
                }
            };
            let secret = codec::decode(&tokenize(&scrub_message(&text)), &cb);
            writeln!(out, "{secret}")?;
        }
        Command::Eval { experiment } => run_eval(experiment, out, err)?,
        Command::SynthCorpus {
            messages,
            vocab_size,
            seed,
            out: path,
        } => {
            let lines = synth::generate(&SynthConfig {
                messages,
                vocab_size,
                seed,
                ..Default::default()
            });
            let mut text = lines.join("\n");
            text.push('\n');
            write_file(&path, &text)?;
            writeln!(out, "wrote {} messages to {}", lines.len(), path.display())?;
        }
    }
    Ok(())
}

fn run_eval(experiment: EvalCommand, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    match experiment {
        EvalCommand::Band {
            sources,
            bands,
            alphabet,
            trials,
            secret_len,
            seed,
            output,
        } => {
            let (corpus, model) = load_sources(&sources)?;
            let cfg = BandExperiment {
                bands: if bands.is_empty() {
                    eval::default_bands()
                } else {
                    bands
                },
                alphabet: parse_alphabet(&alphabet),
                trials,
                secret_len,
                seed,
                validate: false,
            };
            let rows = eval::run_band_experiment(&corpus, &model, &cfg)?;
            for r in rows.iter().filter(|r| r.skipped.is_some()) {
                writeln!(
                    err,
                    "skipped band {}: {}",
                    r.band,
                    r.skipped.as_deref().unwrap_or("")
                )?;
            }
            let config = json!({
                "corpus": path_str(&sources.corpus),
                "model": path_str(&sources.model),
                "limit": sources.limit,
                "bands": cfg.bands.iter().map(Band::to_string).collect::<Vec<_>>(),
                "alphabet": cfg.alphabet,
                "trials": trials,
                "secret_len": secret_len,
                "validate": false,
            });
            let doc = envelope("eval band", Some(seed), config, &rows);
            let mut csv = String::from("band,trials,errors,failures,codewords,skipped\n");
            let mut table = format!(
                "{:<10} {:>7} {:>7} {:>9}  codewords\n",
                "band", "trials", "errors", "failures"
            );
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.band,
                    r.trials,
                    r.errors,
                    r.failures,
                    r.codewords.join(" "),
                    csv_field(r.skipped.as_deref().unwrap_or(""))
                );
                let _ = writeln!(
                    table,
                    "{:<10} {:>7} {:>7} {:>9}  {}",
                    r.band,
                    r.trials,
                    r.errors,
                    r.failures,
                    r.skipped
                        .as_deref()
                        .map_or_else(|| r.codewords.join(" "), |s| format!("skipped: {s}"))
                );
            }
            emit(out, &output, &doc, &csv, &table)
        }
        EvalCommand::Density {
            sources,
            codebook,
            densities,
            trials,
            seed,
            lambda,
            kl_order,
            output,
        } => {
            let (corpus, model) = load_sources(&sources)?;
            let cb = Codebook::load(&codebook)?;
            let cfg = DensityExperiment {
                densities,
                trials,
                seed,
                smoothing: lambda,
                kl_order,
            };
            let curve = eval::run_density_experiment(&corpus, &model, &cb, &cfg)?;
            for p in curve.points.iter().filter(|p| p.skipped.is_some()) {
                writeln!(
                    err,
                    "skipped density {}: {}",
                    p.target,
                    p.skipped.as_deref().unwrap_or("")
                )?;
            }
            let config = json!({
                "corpus": path_str(&sources.corpus),
                "model": path_str(&sources.model),
                "limit": sources.limit,
                "codebook": path_str(&codebook),
                "densities": cfg.densities,
                "trials": trials,
                "lambda": lambda,
                "kl_order": kl_order,
            });
            let doc = envelope("eval density", Some(seed), config, &curve);
            let mut csv = String::from("target_density,achieved_density,trials,kl_nats,skipped\n");
            let mut table = format!(
                "{:>8} {:>9} {:>7} {:>10}\n",
                "target", "achieved", "trials", "kl_nats"
            );
            for p in std::iter::once(&curve.control).chain(&curve.points) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    p.target,
                    p.achieved,
                    p.trials,
                    p.kl_nats,
                    csv_field(p.skipped.as_deref().unwrap_or(""))
                );
                let _ = writeln!(
                    table,
                    "{:>8.3} {:>9.4} {:>7} {:>10.5}{}",
                    p.target,
                    p.achieved,
                    p.trials,
                    p.kl_nats,
                    p.skipped
                        .as_deref()
                        .map(|s| format!("  skipped: {s}"))
                        .unwrap_or_default()
                );
            }
            emit(out, &output, &doc, &csv, &table)
        }
        EvalCommand::Distinguish {
            sources,
            codebook,
            density,
            trials,
            seed,
            identity,
            output,
        } => {
            let (corpus, model) = load_sources(&sources)?;
            let cb = Codebook::load(&codebook)?;
            let cfg = DistinguishExperiment {
                pairs: trials,
                density,
                seed,
                identity,
            };
            let report = eval::run_distinguish_experiment(&corpus, &model, &cb, &cfg)?;
            let config = json!({
                "corpus": path_str(&sources.corpus),
                "model": path_str(&sources.model),
                "limit": sources.limit,
                "codebook": path_str(&codebook),
                "density": density,
                "pairs": trials,
                "identity": identity,
            });
            let doc = envelope("eval distinguish", Some(seed), config, &report);
            let csv = format!(
                "pairs,correct,accuracy,advantage,standard_error\n{},{},{},{},{}\n",
                report.pairs,
                report.correct,
                report.accuracy,
                report.advantage,
                report.standard_error
            );
            let table = format!(
                "pairs: {}\ncorrect: {}\naccuracy: {:.4} (chance 0.5, s.e. {:.4})\nadvantage: {:.4}\n",
                report.pairs, report.correct, report.accuracy, report.standard_error, report.advantage
            );
            emit(out, &output, &doc, &csv, &table)
        }
        EvalCommand::Decodability {
            sources,
            codebook,
            secret_len,
            trials,
            seed,
            no_validate,
            output,
        } => {
            let (corpus, model) = load_sources(&sources)?;
            let cb = Codebook::load(&codebook)?;
            let report = eval::estimate_decodability(
                &corpus,
                &model,
                &cb,
                secret_len,
                trials,
                seed,
                !no_validate,
            )?;
            let config = json!({
                "corpus": path_str(&sources.corpus),
                "model": path_str(&sources.model),
                "limit": sources.limit,
                "codebook": path_str(&codebook),
                "secret_len": secret_len,
                "trials": trials,
                "validate": !no_validate,
            });
            let doc = envelope("eval decodability", Some(seed), config, &report);
            let csv = format!(
                "trials,errors,failures,decodability,mean_density,kl_nats,distinguisher_accuracy\n{},{},{},{},{},{},{}\n",
                report.trials,
                report.errors,
                report.failures,
                report.decodability,
                report.mean_density,
                report.kl_nats,
                report.distinguisher_accuracy
            );
            let table = format!(
                "trials: {}\nerrors: {} ({} steganization failures)\ndecodability D: {:.4}\nmean density d: {:.4}\nunigram KL: {:.5} nats\ndistinguisher accuracy: {:.4}\n",
                report.trials,
                report.errors,
                report.failures,
                report.decodability,
                report.mean_density,
                report.kl_nats,
                report.distinguisher_accuracy
            );
            emit(out, &output, &doc, &csv, &table)
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
