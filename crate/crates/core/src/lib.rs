//! Sequence-to-sequence toolkit for text-to-gloss translation.
//!
//! Builds encoder-decoder transformers on a minimal reverse-mode autodiff
//! tape, trains them with label-smoothed cross-entropy under a Noam
//! schedule, scores hypotheses with BLEU and ROUGE-L, and searches the
//! architecture grid by coordinate descent.

pub mod cli;
pub mod data;
pub mod error;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod search;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
