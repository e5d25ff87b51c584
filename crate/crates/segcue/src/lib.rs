//! File formats, reports and pipeline glue around [`segcue_core`].
//!
//! The algorithms live in the core crate and are re-exported here so that
//! callers only need one dependency.

#![forbid(unsafe_code)]

mod error;
pub mod merges_io;
pub mod model_io;
pub mod pipeline;
pub mod report;
pub mod trace_io;

pub use error::{Error, Result};
pub use segcue_core::Error as CoreError;
pub use segcue_core::{analysis, corpus, cues, evaluator, predictor, probe, segmenter, tokenizer, UB_SYMBOL};

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` exactly. The output is a valid JSON number.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
