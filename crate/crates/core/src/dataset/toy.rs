//! Deterministic synthetic corpus: tonal keyword patterns planted in noisy
//! "sentences" with filler sounds.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layout::{load_corpus, CorpusLayout};
use crate::error::{KwsError, Result};
use crate::eval::{write_annotations, Event};
use crate::frontend::{write_wav_pcm16, SAMPLE_RATE};

const SR: f64 = SAMPLE_RATE as f64;
const RAMP_S: f64 = 0.015;
const PEAK: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyDatasetSpec {
    pub n_keywords: usize,
    pub shots: usize,
    /// Sentences in each of the validation and test splits.
    pub n_sentences: usize,
    /// Standard deviation of the white background noise.
    pub noise_level: f64,
    pub noise_clips: usize,
    pub noise_clip_s: f64,
    pub seed: u64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        Self {
            n_keywords: 3,
            shots: 5,
            n_sentences: 40,
            noise_level: 0.02,
            noise_clips: 4,
            noise_clip_s: 3.0,
            seed: 0,
        }
    }
}

impl ToyDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_keywords < 2 {
            return Err(KwsError::param("the toy corpus needs at least 2 keywords"));
        }
        if self.shots == 0 {
            return Err(KwsError::param("at least one shot per keyword is required"));
        }
        if self.noise_clips == 0 || !(self.noise_clip_s >= 0.5) {
            return Err(KwsError::param("at least one noise clip of 0.5 s or more is required"));
        }
        if !(self.noise_level >= 0.0 && self.noise_level < 0.5) {
            return Err(KwsError::param("noise level must be in [0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    UpChirp,
    DownChirp,
    TonePair,
    Warble,
    Arpeggio,
}

const KINDS: [(Kind, &str); 5] = [
    (Kind::UpChirp, "up_chirp"),
    (Kind::DownChirp, "down_chirp"),
    (Kind::TonePair, "tone_pair"),
    (Kind::Warble, "warble"),
    (Kind::Arpeggio, "arpeggio"),
];

/// Spectro-temporal primitive of one keyword.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub name: String,
    kind: Kind,
    center_hz: f64,
    pub duration_s: f64,
}

impl Pattern {
    /// Instantaneous frequency at relative time `u` in [0, 1).
    fn freq(&self, u: f64, c: f64) -> f64 {
        match self.kind {
            Kind::UpChirp => c * (0.7 + 0.8 * u),
            Kind::DownChirp => c * (1.4 - 0.7 * u),
            Kind::TonePair => {
                if u < 0.5 {
                    c * 0.8
                } else {
                    c * 1.25
                }
            }
            Kind::Warble => c * (1.0 + 0.12 * (2.0 * PI * 3.0 * u).sin()),
            Kind::Arpeggio => c * [1.0, 1.26, 1.5][((u * 3.0) as usize).min(2)],
        }
    }

    /// One instance with the given stretch, pitch factor and level.
    fn render(&self, stretch: f64, pitch: f64, level: f64) -> Vec<f32> {
        let n = (self.duration_s * stretch * SR).round() as usize;
        let ramp = (RAMP_S * SR) as usize;
        let c = self.center_hz * pitch;
        let mut phase = 0.0f64;
        (0..n)
            .map(|k| {
                let u = k as f64 / n as f64;
                let f = self.freq(u, c);
                phase += 2.0 * PI * f / SR;
                let mut v = phase.sin();
                if 2.0 * f < 7500.0 {
                    v += 0.4 * (2.0 * phase).sin();
                }
                let edge = k.min(n - 1 - k);
                let env = if edge < ramp {
                    0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
                } else {
                    1.0
                };
                (level * env * v / 1.4) as f32
            })
            .collect()
    }
}

fn keyword_patterns(n: usize, rng: &mut ChaCha8Rng) -> Vec<Pattern> {
    (0..n)
        .map(|i| {
            let (kind, base) = KINDS[i % KINDS.len()];
            let name = if i < KINDS.len() {
                base.to_string()
            } else {
                format!("{base}_{}", i / KINDS.len() + 1)
            };
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            Pattern {
                name,
                kind,
                center_hz: 450.0 * (4500.0f64 / 450.0).powf(frac),
                duration_s: rng.gen_range(0.3..0.8),
            }
        })
        .collect()
}

/// A keyword instance placed in a sentence.
#[derive(Debug, Clone)]
pub struct Planted {
    pub keyword: String,
    pub start: usize,
    pub clean: Vec<f32>,
}

struct Generator<'a> {
    spec: &'a ToyDatasetSpec,
    patterns: Vec<Pattern>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn instance(&mut self, k: usize) -> Vec<f32> {
        let stretch = self.rng.gen_range(0.9..1.1);
        let pitch = self.rng.gen_range(0.97..1.03);
        let level = self.rng.gen_range(0.5..1.0);
        self.patterns[k].render(stretch, pitch, level)
    }

    fn background(&mut self, n: usize) -> Vec<f32> {
        let sigma = self.spec.noise_level;
        let mut brown = 0.0f64;
        (0..n)
            .map(|_| {
                let w: f64 = StandardNormal.sample(&mut self.rng);
                brown = 0.995 * brown + 0.05 * w;
                (sigma * (w + brown)) as f32
            })
            .collect()
    }

    /// Non-keyword sound: a short steady tone, a noise burst or a click train.
    fn filler(&mut self) -> Vec<f32> {
        let dur = self.rng.gen_range(0.1..0.5);
        let n = (dur * SR) as usize;
        let level = self.rng.gen_range(0.2..0.7);
        let ramp = (RAMP_S * SR) as usize;
        let env = |k: usize| {
            let e = k.min(n - 1 - k);
            if e < ramp {
                0.5 - 0.5 * (PI * e as f64 / ramp as f64).cos()
            } else {
                1.0
            }
        };
        match self.rng.gen_range(0..3) {
            0 => {
                let f = self.rng.gen_range(250.0..5000.0);
                (0..n)
                    .map(|k| (level * env(k) * (2.0 * PI * f * k as f64 / SR).sin()) as f32)
                    .collect()
            }
            1 => (0..n)
                .map(|k| {
                    let w: f64 = StandardNormal.sample(&mut self.rng);
                    (0.4 * level * env(k) * w) as f32
                })
                .collect(),
            _ => {
                let period = (SR / self.rng.gen_range(15.0..60.0)) as usize;
                (0..n)
                    .map(|k| if k % period < 24 { (level * env(k)) as f32 } else { 0.0 })
                    .collect()
            }
        }
    }

    fn seconds(&mut self, lo: f64, hi: f64) -> usize {
        (self.rng.gen_range(lo..hi) * SR) as usize
    }

    /// Training file: one isolated instance over background noise.
    fn training_sample(&mut self, k: usize) -> Vec<f32> {
        let inst = self.instance(k);
        let mut out = self.background(inst.len());
        out.iter_mut().zip(&inst).for_each(|(o, s)| *o += s);
        out
    }

    fn sentence(&mut self) -> (Vec<f32>, Vec<Planted>) {
        let n_kw = self.rng.gen_range(0..=3);
        let n_fill = self.rng.gen_range(0..=2);
        let mut items: Vec<Option<usize>> = (0..n_kw)
            .map(|_| Some(self.rng.gen_range(0..self.patterns.len())))
            .collect();
        items.extend(std::iter::repeat(None).take(n_fill));
        items.shuffle(&mut self.rng);

        let mut layout: Vec<(usize, Vec<f32>, Option<usize>)> = Vec::new();
        let mut cursor = self.seconds(0.2, 0.6);
        for item in items {
            let sound = match item {
                Some(k) => self.instance(k),
                None => self.filler(),
            };
            let len = sound.len();
            layout.push((cursor, sound, item));
            cursor += len + self.seconds(0.3, 0.8);
        }
        let total = cursor + self.seconds(0.1, 0.4);
        let mut audio = self.background(total);
        let mut planted = Vec::new();
        for (start, sound, item) in layout {
            audio[start..start + sound.len()]
                .iter_mut()
                .zip(&sound)
                .for_each(|(a, s)| *a += s);
            if let Some(k) = item {
                planted.push(Planted {
                    keyword: self.patterns[k].name.clone(),
                    start,
                    clean: sound,
                });
            }
        }
        (audio, planted)
    }

    fn noise_clip(&mut self) -> Vec<f32> {
        let n = (self.spec.noise_clip_s * SR) as usize;
        let mut audio = self.background(n);
        let mut cursor = self.seconds(0.0, 0.3);
        loop {
            let f = self.filler();
            if cursor + f.len() > n {
                break;
            }
            audio[cursor..cursor + f.len()]
                .iter_mut()
                .zip(&f)
                .for_each(|(a, s)| *a += s);
            cursor += f.len() + self.seconds(0.2, 0.6);
        }
        audio
    }
}

fn fit_peak(x: &mut [f32]) {
    let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
    if peak > PEAK {
        let g = (PEAK / peak) as f32;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Writes the corpus under `out` and returns its layout together with the
/// instances planted in every sentence (keyed by split and file name).
pub fn gen_toy_with_truth(
    spec: &ToyDatasetSpec,
    out: &Path,
) -> Result<(CorpusLayout, Vec<(String, String, Vec<Planted>)>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let patterns = keyword_patterns(spec.n_keywords, &mut rng);
    let mut g = Generator { spec, patterns, rng };

    for k in 0..g.patterns.len() {
        let dir = out.join("train").join(&g.patterns[k].name);
        fs::create_dir_all(&dir)?;
        for shot in 1..=spec.shots {
            let mut x = g.training_sample(k);
            fit_peak(&mut x);
            write_wav_pcm16(&dir.join(format!("{shot}.wav")), &x, SAMPLE_RATE)?;
        }
    }

    let noise_dir = out.join("noise");
    fs::create_dir_all(&noise_dir)?;
    for i in 0..spec.noise_clips {
        let mut x = g.noise_clip();
        fit_peak(&mut x);
        write_wav_pcm16(&noise_dir.join(format!("noise_{i:02}.wav")), &x, SAMPLE_RATE)?;
    }

    let mut truth = Vec::new();
    for split in ["val", "test"] {
        let dir = out.join(split).join("sentences");
        fs::create_dir_all(&dir)?;
        let mut events = Vec::new();
        for i in 0..spec.n_sentences {
            let name = format!("{split}_{i:03}.wav");
            let (mut audio, mut planted) = g.sentence();
            let peak = audio.iter().fold(0.0f32, |m, v| m.max(v.abs())) as f64;
            fit_peak(&mut audio);
            if peak > PEAK {
                let gain = (PEAK / peak) as f32;
                for p in &mut planted {
                    p.clean.iter_mut().for_each(|v| *v *= gain);
                }
            }
            write_wav_pcm16(&dir.join(&name), &audio, SAMPLE_RATE)?;
            for p in &planted {
                events.push(Event::new(
                    &name,
                    p.start as f64 / SR,
                    (p.start + p.clean.len()) as f64 / SR,
                    &p.keyword,
                ));
            }
            truth.push((split.to_string(), name, planted));
        }
        write_annotations(&out.join(split).join("annotations.tsv"), &events)?;
    }
    Ok((load_corpus(out)?, truth))
}

pub fn gen_toy(spec: &ToyDatasetSpec, out: &Path) -> Result<CorpusLayout> {
    gen_toy_with_truth(spec, out).map(|(layout, _)| layout)
}
