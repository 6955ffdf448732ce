use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::filter::{filtfilt, Biquad};
use super::resample::SincResampler;
use super::SAMPLE_RATE;
use crate::error::{KwsError, Result};

pub const HIGHPASS_CUTOFF_HZ: f64 = 50.0;
/// Odd-reflection padding used by the zero-phase high-pass (0.1 s).
const HIGHPASS_PAD: usize = 1600;

/// Mono waveform with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, x| m.max(x.abs()))
    }
}

/// Raw decoded audio before preparation: one sample vector per channel.
#[derive(Debug, Clone)]
pub struct RawAudio {
    pub channels: Vec<Vec<f32>>,
    pub sample_rate: u32,
}

/// Mixdown, peak-normalize, resample to 16 kHz, then high-pass at 50 Hz.
pub fn prepare_audio(
    channels: &[Vec<f32>],
    sample_rate: u32,
    source_id: impl Into<String>,
) -> Result<AudioClip> {
    if sample_rate == 0 {
        return Err(KwsError::param("sample rate must be positive"));
    }
    let len = channels.first().map_or(0, Vec::len);
    if len == 0 {
        return Err(KwsError::Decode("no samples".into()));
    }
    if channels.iter().any(|c| c.len() != len) {
        return Err(KwsError::Decode("channels differ in length".into()));
    }

    let n_ch = channels.len() as f64;
    let mut mono: Vec<f64> = (0..len)
        .map(|i| channels.iter().map(|c| c[i] as f64).sum::<f64>() / n_ch)
        .collect();

    normalize_peak(&mut mono);
    let resampled = SincResampler::new(sample_rate, SAMPLE_RATE).process(&mono);
    let hp = Biquad::butterworth_highpass(HIGHPASS_CUTOFF_HZ, SAMPLE_RATE as f64);
    let mut filtered = filtfilt(&hp, &resampled, HIGHPASS_PAD);
    // resampling and filtering can overshoot slightly
    let peak = filtered.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 1.0 {
        filtered.iter_mut().for_each(|x| *x /= peak);
    }

    Ok(AudioClip {
        samples: filtered.into_iter().map(|x| x as f32).collect(),
        sample_rate: SAMPLE_RATE,
        source_id: source_id.into(),
    })
}

fn normalize_peak(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
}

pub fn read_wav(path: &Path) -> Result<RawAudio> {
    let mut reader = WavReader::open(path)
        .map_err(|e| KwsError::Decode(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let interleaved: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| KwsError::Decode(format!("{}: {e}", path.display())))?,
        SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| KwsError::Decode(format!("{}: {e}", path.display())))?
        }
    };
    let n_ch = spec.channels as usize;
    if n_ch == 0 || interleaved.is_empty() {
        return Err(KwsError::Decode(format!("{}: empty audio", path.display())));
    }
    let frames = interleaved.len() / n_ch;
    let channels = (0..n_ch)
        .map(|c| (0..frames).map(|f| interleaved[f * n_ch + c]).collect())
        .collect();
    Ok(RawAudio {
        channels,
        sample_rate: spec.sample_rate,
    })
}

/// Decode and prepare a WAV file in one step.
pub fn load_clip(path: &Path) -> Result<AudioClip> {
    let raw = read_wav(path)?;
    let id = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    prepare_audio(&raw.channels, raw.sample_rate, id)
}

/// Write mono 16-bit PCM.
pub fn write_wav_pcm16(path: &Path, samples: &[f32], sample_rate: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}
