//! Human-factor cepstral coefficients: mel-spaced triangular filters whose
//! bandwidths follow the equivalent rectangular bandwidth (ERB) of the
//! auditory filter at each center frequency.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::audio::AudioClip;
use super::logmel::{hz_to_mel, mel_to_hz, TriangleFilter, LOG_FLOOR};
use super::{FeatureKind, FeatureMatrix, SAMPLE_RATE};
use crate::error::{KwsError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HfccConfig {
    pub n_filters: usize,
    pub erb_scale: f64,
    pub n_coeffs: usize,
    pub window_samples: usize,
    pub step_samples: usize,
    pub n_fft: usize,
    pub lowest_center_hz: f64,
    pub highest_center_hz: f64,
    pub delta_width: usize,
}

impl Default for HfccConfig {
    fn default() -> Self {
        Self {
            n_filters: 40,
            erb_scale: 1.0,
            n_coeffs: 13,
            window_samples: 640,
            step_samples: 160,
            n_fft: 1024,
            lowest_center_hz: 50.0,
            highest_center_hz: 7000.0,
            delta_width: 2,
        }
    }
}

/// Moore-Glasberg ERB in Hz for a center frequency in Hz.
pub fn erb_hz(center_hz: f64) -> f64 {
    let f = center_hz / 1000.0;
    6.23 * f * f + 93.39 * f + 28.52
}

#[derive(Clone)]
pub struct HfccExtractor {
    cfg: HfccConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    filters: Vec<TriangleFilter>,
    dct: Matrix,
}

impl std::fmt::Debug for HfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HfccExtractor").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl HfccExtractor {
    pub fn new(cfg: HfccConfig) -> Result<Self> {
        if cfg.n_coeffs == 0 || cfg.n_coeffs > cfg.n_filters {
            return Err(KwsError::param("n_coeffs must be in 1..=n_filters"));
        }
        if cfg.window_samples == 0 || cfg.step_samples == 0 || cfg.n_fft < cfg.window_samples {
            return Err(KwsError::param("invalid HFCC framing"));
        }
        let rate = SAMPLE_RATE as f64;
        let (m_lo, m_hi) = (hz_to_mel(cfg.lowest_center_hz), hz_to_mel(cfg.highest_center_hz));
        let filters = (0..cfg.n_filters)
            .map(|i| {
                let frac = i as f64 / (cfg.n_filters - 1).max(1) as f64;
                let fc = mel_to_hz(m_lo + frac * (m_hi - m_lo));
                let half = cfg.erb_scale * erb_hz(fc);
                TriangleFilter::from_edges(fc - half, fc, fc + half, cfg.n_fft, rate)
            })
            .collect();
        let window = (0..cfg.window_samples)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (cfg.window_samples - 1) as f64).cos())
            .collect();
        let nf = cfg.n_filters as f64;
        let mut dct = Matrix::zeros(cfg.n_coeffs, cfg.n_filters);
        for k in 0..cfg.n_coeffs {
            let norm = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for n in 0..cfg.n_filters {
                dct.set(k, n, norm * (PI * k as f64 * (n as f64 + 0.5) / nf).cos());
            }
        }
        Ok(Self {
            cfg,
            fft: FftPlanner::new().plan_fft_forward(cfg.n_fft),
            window,
            filters,
            dct,
        })
    }

    pub fn config(&self) -> &HfccConfig {
        &self.cfg
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.cfg.window_samples {
            0
        } else {
            (len - self.cfg.window_samples) / self.cfg.step_samples + 1
        }
    }

    /// Static cepstra, one row per frame.
    pub fn cepstra(&self, samples: &[f32]) -> Result<Matrix> {
        let n_frames = self.n_frames(samples.len());
        if n_frames == 0 {
            return Err(KwsError::param(format!(
                "clip of {} samples is shorter than one {}-sample HFCC window",
                samples.len(),
                self.cfg.window_samples
            )));
        }
        let c = &self.cfg;
        let mut buf = vec![Complex::new(0.0, 0.0); c.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; c.n_fft / 2 + 1];
        let mut log_energy = vec![0.0; c.n_filters];
        let mut out = Matrix::zeros(n_frames, c.n_coeffs);
        for t in 0..n_frames {
            let start = t * c.step_samples;
            buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
            for (k, w) in self.window.iter().enumerate() {
                buf[k] = Complex::new(samples[start + k] as f64 * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, b) in power.iter_mut().zip(&buf) {
                *p = b.norm_sqr();
            }
            for (e, f) in log_energy.iter_mut().zip(&self.filters) {
                *e = (f.apply(&power) + LOG_FLOOR).ln();
            }
            for k in 0..c.n_coeffs {
                out.set(t, k, crate::matrix::dot(self.dct.row(k), &log_energy));
            }
        }
        Ok(out)
    }

    /// Cepstra with first- and second-order regression deltas appended.
    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        let base = self.cepstra(&clip.samples)?;
        let d1 = deltas(&base, self.cfg.delta_width);
        let d2 = deltas(&d1, self.cfg.delta_width);
        let n = self.cfg.n_coeffs;
        let mut frames = Matrix::zeros(base.rows(), 3 * n);
        for t in 0..base.rows() {
            let row = frames.row_mut(t);
            row[..n].copy_from_slice(base.row(t));
            row[n..2 * n].copy_from_slice(d1.row(t));
            row[2 * n..].copy_from_slice(d2.row(t));
        }
        Ok(FeatureMatrix {
            frames,
            frame_step_s: self.cfg.step_samples as f64 / SAMPLE_RATE as f64,
            kind: FeatureKind::Hfcc,
        })
    }
}

/// Regression deltas over `±width` frames with edge replication.
pub fn deltas(m: &Matrix, width: usize) -> Matrix {
    let (rows, cols) = m.shape();
    let denom: f64 = 2.0 * (1..=width).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = Matrix::zeros(rows, cols);
    if rows == 0 || width == 0 {
        return out;
    }
    let last = rows as isize - 1;
    for t in 0..rows as isize {
        for n in 1..=width as isize {
            let fwd = m.row((t + n).min(last) as usize);
            let back = m.row((t - n).max(0) as usize);
            let row = out.row_mut(t as usize);
            for c in 0..cols {
                row[c] += n as f64 * (fwd[c] - back[c]) / denom;
            }
        }
    }
    out
}

/// HFCC features of a prepared clip (13 cepstra + deltas by default).
pub fn hfcc(clip: &AudioClip, n_coeffs: usize) -> Result<FeatureMatrix> {
    let cfg = HfccConfig {
        n_coeffs,
        ..HfccConfig::default()
    };
    HfccExtractor::new(cfg)?.extract(clip)
}
