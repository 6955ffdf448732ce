//! Audio preparation, segmentation and feature extraction.

pub mod audio;
pub mod features_io;
pub mod filter;
pub mod hfcc;
pub mod logmel;
pub mod resample;
pub mod segment;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub use audio::{load_clip, prepare_audio, read_wav, write_wav_pcm16, AudioClip, RawAudio};
pub use hfcc::{hfcc, HfccConfig, HfccExtractor};
pub use logmel::{LogMelExtractor, HOP as LOGMEL_HOP, N_MELS};
pub use segment::{segment_clip, Segment, SegmentMode, SegmentationConfig, Segmenter};

pub const SAMPLE_RATE: u32 = 16000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Logmel,
    Hfcc,
    Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Matrix,
    pub frame_step_s: f64,
    pub kind: FeatureKind,
}
