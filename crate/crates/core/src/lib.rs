//! Word-boundary extraction from unsegmented phoneme streams.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole
//! algorithmic pipeline:
//!
//! * [`corpus`]: phoneme inventories, gold-segmented corpora, splits and
//!   synthetic lexicon corpora.
//! * [`predictor`]: next-symbol distributions (interpolated Witten-Bell
//!   n-grams and a seeded Dirichlet baseline).
//! * [`cues`]: entropy, surprisal, rank and utterance-boundary probability
//!   per position.
//! * [`segmenter`]: peak, threshold and relative boundary placement.
//! * [`evaluator`]: boundary precision/recall/F1, cue x strategy grids and
//!   McNemar tests.
//! * [`probe`]: balanced, word-disjoint logistic probes on embeddings.
//! * [`analysis`]: word-final phoneme statistics and correlations.
//! * [`tokenizer`]: cue-driven and frequency merge tables.
//!
//! File formats and the command line live in the companion `segcue` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod corpus;
pub mod cues;
mod error;
pub mod evaluator;
pub mod predictor;
pub mod probe;
pub mod segmenter;
pub mod tokenizer;

pub use error::{Error, Result};

/// Reserved symbol separating utterances in the modelling stream.
pub const UB_SYMBOL: &str = "<UB>";
