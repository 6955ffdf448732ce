//! Uniformly drawn background-noise windows for the no-speech class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KwsError, Result};
use crate::frontend::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseWindow {
    pub clip: usize,
    pub offset: usize,
}

impl NoiseWindow {
    pub fn samples<'a>(&self, clips: &'a [AudioClip], len: usize) -> &'a [f32] {
        &clips[self.clip].samples[self.offset..self.offset + len]
    }
}

/// `count` windows of `seg_len` samples, uniform over every valid window
/// position of every clip long enough to hold one.
pub fn sample_noise(clips: &[AudioClip], count: usize, seg_len: usize, seed: u64) -> Result<Vec<NoiseWindow>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if seg_len == 0 {
        return Err(KwsError::param("noise window length must be positive"));
    }
    // cumulative number of window positions per clip
    let mut cumulative = Vec::with_capacity(clips.len());
    let mut total = 0usize;
    for c in clips {
        total += (c.samples.len() + 1).saturating_sub(seg_len);
        cumulative.push(total);
    }
    if total == 0 {
        return Err(KwsError::param(format!(
            "no noise clip holds a window of {seg_len} samples"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let u = rng.gen_range(0..total);
            let clip = cumulative.partition_point(|&c| c <= u);
            let before = if clip == 0 { 0 } else { cumulative[clip - 1] };
            NoiseWindow {
                clip,
                offset: u - before,
            }
        })
        .collect())
}
