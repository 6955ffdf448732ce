use serde::{Deserialize, Serialize};

use super::audio::AudioClip;
use super::SAMPLE_RATE;
use crate::error::{KwsError, Result};

/// Round-off guard for second-to-sample conversions (0.3 * 16000 is not an
/// exact integer in binary floating point).
const SAMPLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub seg_len_s: f64,
    pub train_overlap_s: f64,
    pub infer_hop_samples: usize,
    pub pad_samples: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self::with_length(0.25)
    }
}

impl SegmentationConfig {
    /// Training overlap of one fifth of the segment, inference hop of 256.
    pub fn with_length(seg_len_s: f64) -> Self {
        Self {
            seg_len_s,
            train_overlap_s: seg_len_s / 5.0,
            infer_hop_samples: 256,
            pad_samples: (seg_len_s * SAMPLE_RATE as f64 / 2.0 + SAMPLE_EPS).floor() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.seg_len_s > 0.0 && self.seg_len_s.is_finite()) {
            return Err(KwsError::param("segment length must be positive"));
        }
        if !(self.train_overlap_s > 0.0 && self.train_overlap_s < self.seg_len_s) {
            return Err(KwsError::param(
                "training overlap must lie strictly between 0 and the segment length",
            ));
        }
        if self.infer_hop_samples == 0 {
            return Err(KwsError::param("inference hop must be at least one sample"));
        }
        let expected = (self.seg_len_s * SAMPLE_RATE as f64 / 2.0 + SAMPLE_EPS).floor() as usize;
        if self.pad_samples != expected {
            return Err(KwsError::param(format!(
                "pad_samples must be {expected} for a {} s segment",
                self.seg_len_s
            )));
        }
        if self.train_step() == 0 {
            return Err(KwsError::param("training step rounds to zero samples"));
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.seg_len_s * SAMPLE_RATE as f64 - SAMPLE_EPS).ceil() as usize
    }

    pub fn train_step(&self) -> usize {
        ((self.seg_len_s - self.train_overlap_s) * SAMPLE_RATE as f64).round() as usize
    }

    pub fn step(&self, mode: SegmentMode) -> usize {
        match mode {
            SegmentMode::Train => self.train_step(),
            SegmentMode::Infer => self.infer_hop_samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f32>,
    /// Center of the window in seconds relative to the unpadded clip start.
    pub center_time_s: f64,
    pub index: usize,
}

/// Lazy view of a clip's segmentation; extracts windows on demand so long
/// recordings never materialize every overlapping window at once.
#[derive(Debug, Clone)]
pub struct Segmenter<'a> {
    samples: &'a [f32],
    window: usize,
    step: usize,
    pad: usize,
    count: usize,
}

impl<'a> Segmenter<'a> {
    pub fn new(clip: &'a AudioClip, cfg: &SegmentationConfig, mode: SegmentMode) -> Result<Self> {
        cfg.validate()?;
        if clip.samples.is_empty() {
            return Err(KwsError::param("clip must contain at least one sample"));
        }
        let window = cfg.window_samples();
        let step = cfg.step(mode);
        let pad = cfg.pad_samples;
        let count = segment_count(clip.samples.len(), window, step, pad);
        Ok(Self {
            samples: &clip.samples,
            window,
            step,
            pad,
            count,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn segment(&self, index: usize) -> Segment {
        let start = (index * self.step) as isize - self.pad as isize;
        let n = self.samples.len() as isize;
        let samples = (0..self.window as isize)
            .map(|k| {
                let i = start + k;
                if (0..n).contains(&i) {
                    self.samples[i as usize]
                } else {
                    0.0
                }
            })
            .collect();
        let center = (index * self.step) as f64 + self.window as f64 / 2.0 - self.pad as f64;
        Segment {
            samples,
            center_time_s: center / SAMPLE_RATE as f64,
            index,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.count).map(move |i| self.segment(i))
    }
}

/// Number of windows over a clip padded by `pad` zeros on both sides; a
/// padded clip shorter than one window still yields one zero-filled window.
pub fn segment_count(len: usize, window: usize, step: usize, pad: usize) -> usize {
    let padded = len + 2 * pad;
    if padded < window {
        1
    } else {
        (padded - window) / step + 1
    }
}

pub fn segment_clip(
    clip: &AudioClip,
    cfg: &SegmentationConfig,
    mode: SegmentMode,
) -> Result<Vec<Segment>> {
    let seg = Segmenter::new(clip, cfg, mode)?;
    Ok(seg.iter().collect())
}
