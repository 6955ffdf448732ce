use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};

use super::SAMPLE_RATE;
use crate::error::{KwsError, Result};
use crate::matrix::Matrix;

pub const N_FFT: usize = 1024;
pub const HOP: usize = 256;
pub const N_MELS: usize = 64;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Sparse triangular filter over FFT bins.
#[derive(Debug, Clone)]
pub(crate) struct TriangleFilter {
    pub first_bin: usize,
    pub weights: Vec<f64>,
}

impl TriangleFilter {
    pub fn from_edges(lo: f64, center: f64, hi: f64, n_fft: usize, rate: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let bin_hz = rate / n_fft as f64;
        let mut first_bin = None;
        let mut weights = Vec::new();
        for b in 0..n_bins {
            let f = b as f64 * bin_hz;
            let w = if f > lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            if w > 0.0 {
                first_bin.get_or_insert(b);
                weights.push(w);
            } else if first_bin.is_some() {
                break;
            }
        }
        Self {
            first_bin: first_bin.unwrap_or(0),
            weights,
        }
    }

    #[inline]
    pub fn apply(&self, spectrum: &[f64]) -> f64 {
        spectrum[self.first_bin..]
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s * w)
            .sum()
    }
}

/// Mel filterbank: `N_MELS` triangles with unit peak, equally spaced on the
/// HTK mel scale between 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    filters: Vec<TriangleFilter>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, rate: f64) -> Self {
        let top = hz_to_mel(rate / 2.0);
        let points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let filters = points
            .windows(3)
            .map(|w| TriangleFilter::from_edges(w[0], w[1], w[2], n_fft, rate))
            .collect();
        Self {
            filters,
            centers_hz: points[1..=n_mels].to_vec(),
        }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn project(&self, magnitude: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.filters) {
            *o = f.apply(magnitude);
        }
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Log-Mel magnitude spectrogram of fixed-length segments.
///
/// Frames are centered on multiples of the hop (zero padding of half a
/// window on each side); the frame count is forced to `ceil(len / hop)`.
#[derive(Clone)]
pub struct LogMelExtractor {
    segment_len: usize,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    bank: MelFilterbank,
}

impl std::fmt::Debug for LogMelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMelExtractor")
            .field("segment_len", &self.segment_len)
            .finish_non_exhaustive()
    }
}

impl LogMelExtractor {
    pub fn new(segment_len: usize) -> Self {
        Self {
            segment_len,
            fft: FftPlanner::new().plan_fft_forward(N_FFT),
            window: hann(N_FFT),
            bank: MelFilterbank::new(N_MELS, N_FFT, SAMPLE_RATE as f64),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.segment_len.div_ceil(HOP)
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    pub fn extract(&self, samples: &[f32]) -> Result<Matrix> {
        if samples.len() != self.segment_len {
            return Err(KwsError::param(format!(
                "segment has {} samples, expected {}",
                samples.len(),
                self.segment_len
            )));
        }
        let n_frames = self.n_frames();
        let half = (N_FFT / 2) as isize;
        let n = samples.len() as isize;
        let mut out = Matrix::zeros(n_frames, N_MELS);
        let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut mag = vec![0.0; N_FFT / 2 + 1];

        for t in 0..n_frames {
            let start = (t * HOP) as isize - half;
            for (k, (b, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                let i = start + k as isize;
                let x = if (0..n).contains(&i) {
                    samples[i as usize] as f64
                } else {
                    0.0
                };
                *b = Complex::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (m, b) in mag.iter_mut().zip(&buf) {
                *m = b.norm();
            }
            let row = out.row_mut(t);
            self.bank.project(&mag, row);
            row.iter_mut().for_each(|v| *v = (*v + LOG_FLOOR).ln());
        }
        Ok(out)
    }
}
