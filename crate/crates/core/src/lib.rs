//! Codeword-insertion linguistic steganography.
//!
//! A sender and receiver share a [`Codebook`] mapping secret symbols to
//! ordinary corpus words. The sender picks a cover message from a corpus of
//! the target genre and inserts the codewords at the inter-word positions
//! whose surrounding n-grams are most frequent in that corpus. The receiver
//! recovers the secret by scanning the text for codewords.
//!
//! The [`eval`] module measures how well this works: decodability (does the
//! receiver get the exact secret back), density (codewords per transmitted
//! word) and detectability (KL divergence of word statistics and the
//! accuracy of a plausibility-based distinguisher).

pub mod cli;
pub mod codebook;
pub mod codec;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod ngram;
pub mod seeds;
pub mod synth;

pub use codebook::{Band, Codebook, Secret};
pub use codec::{decode, steganize, StegoOptions, StegoResult};
pub use corpus::{load_corpus, scrub_message, tokenize, Corpus, Message};
pub use error::{Error, Result};
pub use ngram::NGramModel;

/// Version string embedded in every artifact the tool writes.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
