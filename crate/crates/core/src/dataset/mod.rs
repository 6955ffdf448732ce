//! Corpus layout, no-speech noise windows and the synthetic toy corpus.

pub mod layout;
pub mod noise;
pub mod toy;

pub use layout::{load_corpus, CorpusLayout, EvalSplit, TrainFile};
pub use noise::{sample_noise, NoiseWindow};
pub use toy::{gen_toy, gen_toy_with_truth, Planted, ToyDatasetSpec};
