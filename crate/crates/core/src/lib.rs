//! Few-shot keyword spotting with temporally structured embeddings.
//!
//! The engine is split into the stages a recording passes through:
//!
//! - [`frontend`]: WAV decoding, preparation to 16 kHz mono, segmentation,
//!   log-Mel and HFCC features.
//! - [`labels`]: keyword and relative-position targets for training segments.
//! - [`tacos`]: the joint keyword/position angular-margin loss, its
//!   gradients, the adaptive scale and a small frame-wise embedder.
//! - [`dtw`]: template assembly, cosine cost matrices, sub-sequence DTW and
//!   detection post-processing.
//! - [`eval`]: event-based micro-averaged metrics and threshold tuning.
//! - [`dataset`]: corpus layout loading and the synthetic toy corpus.
//! - [`pipeline`]: glue used by the `kws` binary and the acceptance suite.
//!
//! Data-parallel loops use rayon when the `parallel` feature is enabled
//! (the default) and fall back to sequential iteration otherwise; results
//! are identical either way.

pub mod config;
pub mod dataset;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod frontend;
mod io_util;
pub mod labels;
pub mod tacos;
pub mod matrix;
pub mod par;
pub mod pipeline;

pub use error::{KwsError, Result};
pub use matrix::Matrix;
