//! End-to-end stages shared by the command-line tool and the tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{FeatureSource, RunConfig};
use crate::dataset::{sample_noise, CorpusLayout, EvalSplit};
use crate::dtw::detect::{candidate_scores, match_all};
use crate::dtw::{detect_from_tracks, Template, TemplateAccumulator, TemplateTrack, Thresholds};
use crate::error::{KwsError, Result};
use crate::eval::{match_events, micro_f1, tune_thresholds, Counts, DetectionRecord, Event, MetricsReport, TuneResult};
use crate::frontend::{
    load_clip, AudioClip, HfccExtractor, LogMelExtractor, SegmentMode, SegmentationConfig, Segmenter, LOGMEL_HOP,
    SAMPLE_RATE,
};
use crate::labels::{
    augment_reversed, keyword_sample_labels, n_pos_from_counts, no_speech_label, KeywordLabelSpace, LabeledSegment,
};
use crate::matrix::Matrix;
use crate::par;
use crate::tacos::{train_toy_embedder, TrainedModel, TrainingCorpus};

/// Segments embedded per parallel batch while building a clip's frame grid.
const EMBED_CHUNK: usize = 512;

/// Log-Mel segmentation for one configuration.
#[derive(Debug, Clone)]
pub struct LogMelFrontend {
    seg: SegmentationConfig,
    logmel: LogMelExtractor,
}

impl LogMelFrontend {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let seg = cfg.frontend.segmentation();
        seg.validate()?;
        Ok(Self {
            logmel: LogMelExtractor::new(seg.window_samples()),
            seg,
        })
    }

    /// Log-Mel matrix of every training-mode segment.
    pub fn train_segments(&self, clip: &AudioClip) -> Result<Vec<Matrix>> {
        let s = Segmenter::new(clip, &self.seg, SegmentMode::Train)?;
        s.iter().map(|seg| self.logmel.extract(&seg.samples)).collect()
    }

    pub fn window_samples(&self) -> usize {
        self.seg.window_samples()
    }

    /// Frame embeddings of a whole clip: inference segments are embedded and
    /// their frames averaged on the common 256-sample grid. Grid cells whose
    /// frame center falls in the zero padding are cropped, so row `r` is
    /// centered `r` hops after the first in-clip frame.
    pub fn embed_clip(&self, clip: &AudioClip, model: &TrainedModel) -> Result<Matrix> {
        let s = Segmenter::new(clip, &self.seg, SegmentMode::Infer)?;
        let grid_step = self.seg.infer_hop_samples / LOGMEL_HOP;
        if grid_step * LOGMEL_HOP != self.seg.infer_hop_samples || grid_step == 0 {
            return Err(KwsError::Config("inference hop is not a multiple of the frame hop".into()));
        }
        let mut acc = TemplateAccumulator::new(model.embedder.out_dim());
        let indices: Vec<usize> = (0..s.len()).collect();
        for chunk in indices.chunks(EMBED_CHUNK) {
            let embedded = par::map(chunk, |&i| {
                let seg = s.segment(i);
                model.embed(&self.logmel.extract(&seg.samples)?)
            });
            for (&i, e) in chunk.iter().zip(embedded) {
                acc.add(i * grid_step, &e?)?;
            }
        }
        let grid = acc.finish()?;
        let pad = self.seg.pad_samples;
        let first = pad.div_ceil(LOGMEL_HOP);
        // clips shorter than one hop keep the frame nearest to them
        let end = (clip.samples.len() + pad)
            .div_ceil(LOGMEL_HOP)
            .max(first + 1)
            .min(grid.rows());
        let mut frames = Matrix::zeros(end - first, grid.cols());
        for r in first..end {
            frames.row_mut(r - first).copy_from_slice(grid.row(r));
        }
        round_to_f32(&mut frames);
        Ok(frames)
    }
}

fn round_to_f32(m: &mut Matrix) {
    for r in 0..m.rows() {
        for v in m.row_mut(r) {
            *v = *v as f32 as f64;
        }
    }
}

/// What detection frames are computed from.
#[derive(Debug, Clone)]
pub enum Features<'a> {
    Embedding { frontend: LogMelFrontend, model: &'a TrainedModel },
    Hfcc(HfccExtractor),
}

impl<'a> Features<'a> {
    pub fn new(cfg: &RunConfig, model: Option<&'a TrainedModel>) -> Result<Self> {
        match cfg.detect.features {
            FeatureSource::Embedding => {
                let model = model.ok_or_else(|| KwsError::Config("embedding features need a model".into()))?;
                Ok(Self::Embedding {
                    frontend: LogMelFrontend::new(cfg)?,
                    model,
                })
            }
            FeatureSource::Hfcc => Ok(Self::Hfcc(HfccExtractor::new(cfg.hfcc)?)),
        }
    }

    pub fn frame_hop_s(&self) -> f64 {
        match self {
            Self::Embedding { .. } => LOGMEL_HOP as f64 / SAMPLE_RATE as f64,
            Self::Hfcc(x) => x.config().step_samples as f64 / SAMPLE_RATE as f64,
        }
    }

    pub fn frames(&self, clip: &AudioClip) -> Result<Matrix> {
        match self {
            Self::Embedding { frontend, model } => frontend.embed_clip(clip, model),
            Self::Hfcc(x) => {
                let mut m = x.extract(clip)?.frames;
                round_to_f32(&mut m);
                Ok(m)
            }
        }
    }
}

/// Labeled log-Mel segments of the training split plus no-speech segments
/// drawn from the noise clips.
pub fn build_training_corpus(layout: &CorpusLayout, cfg: &RunConfig) -> Result<TrainingCorpus> {
    let frontend = LogMelFrontend::new(cfg)?;
    let space = KeywordLabelSpace::new(layout.keywords.clone(), cfg.train.reversed)?;
    let per_file = par::map(&layout.train, |f| -> Result<(usize, Vec<Matrix>)> {
        let clip = load_clip(&f.path)?;
        let kw = space
            .keyword_index(&f.keyword)
            .ok_or_else(|| KwsError::layout(&f.path, format!("unknown keyword `{}`", f.keyword)))?;
        Ok((kw, frontend.train_segments(&clip)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n_pos = n_pos_from_counts(per_file.iter().map(|(_, s)| s.len()))?;

    let mut segments = Vec::new();
    for (sample_id, (kw, feats)) in per_file.into_iter().enumerate() {
        let labels = keyword_sample_labels(&space, kw, feats.len(), n_pos, sample_id)?;
        for (features, label) in feats.into_iter().zip(labels) {
            segments.push(LabeledSegment { features, label, class: kw });
        }
    }

    let n_noise = (segments.len() as f64 * cfg.train.noise_ratio).round() as usize;
    if n_noise > 0 {
        let clips = layout
            .noise
            .iter()
            .map(|p| load_clip(p))
            .collect::<Result<Vec<_>>>()?;
        let win = frontend.window_samples();
        let windows = sample_noise(&clips, n_noise, win, cfg.seed)?;
        let feats = par::map(&windows, |w| frontend.logmel.extract(w.samples(&clips, win)))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let first_id = layout.train.len();
        for (k, features) in feats.into_iter().enumerate() {
            segments.push(LabeledSegment {
                features,
                label: no_speech_label(&space, n_pos, first_id + k)?,
                class: space.no_speech_class(),
            });
        }
    }

    if cfg.train.reversed {
        segments = augment_reversed(segments, &space)?;
    }
    Ok(TrainingCorpus { segments, space, n_pos })
}

pub fn train(layout: &CorpusLayout, cfg: &RunConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let corpus = build_training_corpus(layout, cfg)?;
    log::info!(
        "training on {} segments ({} classes, n_pos {})",
        corpus.segments.len(),
        corpus.space.n_kw(),
        corpus.n_pos
    );
    train_toy_embedder(&corpus, &cfg.train_config())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enrolled {
    /// File stem the template is stored under.
    pub name: String,
    pub source: PathBuf,
    pub template: Template,
}

/// One template per training file, named `<keyword>__<file stem>`.
pub fn enroll(layout: &CorpusLayout, features: &Features<'_>) -> Result<Vec<Enrolled>> {
    let hop = features.frame_hop_s();
    par::map(&layout.train, |f| {
        let clip = load_clip(&f.path)?;
        let frames = features.frames(&clip)?;
        let stem = f
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Enrolled {
            name: format!("{}__{}", f.keyword, stem),
            source: f.path.clone(),
            template: Template::new(frames, f.keyword.clone(), clip.duration_s(), hop)?,
        })
    })
    .into_iter()
    .collect()
}

/// Tracks of every template against one query file.
#[derive(Debug, Clone)]
pub struct ScoredFile {
    pub file: String,
    pub duration_s: f64,
    pub tracks: Vec<TemplateTrack>,
}

pub fn score_file(path: &Path, templates: &[Template], features: &Features<'_>) -> Result<ScoredFile> {
    let clip = load_clip(path)?;
    let frames = features.frames(&clip)?;
    Ok(ScoredFile {
        file: EvalSplit::file_name(path),
        duration_s: clip.duration_s(),
        tracks: match_all(templates, &frames)?,
    })
}

pub fn score_files(paths: &[PathBuf], templates: &[Template], features: &Features<'_>) -> Result<Vec<ScoredFile>> {
    par::map(paths, |p| score_file(p, templates, features))
        .into_iter()
        .collect()
}

/// Detections of every scored file, ordered by (file, onset, keyword).
pub fn resolve(
    scored: &[ScoredFile],
    templates: &[Template],
    thresholds: &Thresholds,
    cfg: &RunConfig,
) -> Result<Vec<DetectionRecord>> {
    let dcfg = cfg.detect_config();
    let mut out = Vec::new();
    for s in scored {
        for d in detect_from_tracks(templates, &s.tracks, s.duration_s, thresholds, &dcfg)? {
            out.push(DetectionRecord {
                file: s.file.clone(),
                onset_s: d.onset_s,
                offset_s: d.offset_s,
                keyword: d.keyword,
                score: d.score,
            });
        }
    }
    out.sort_by(|a, b| {
        a.file
            .cmp(&b.file)
            .then(a.onset_s.total_cmp(&b.onset_s))
            .then_with(|| a.keyword.cmp(&b.keyword))
    });
    Ok(out)
}

pub fn detect_files(
    paths: &[PathBuf],
    templates: &[Template],
    features: &Features<'_>,
    thresholds: &Thresholds,
    cfg: &RunConfig,
) -> Result<Vec<DetectionRecord>> {
    thresholds.check_covers(templates.iter().map(|t| t.keyword.as_str()))?;
    let scored = score_files(paths, templates, features)?;
    resolve(&scored, templates, thresholds, cfg)
}

pub fn evaluate(records: &[DetectionRecord], annotations: &[Event], cfg: &RunConfig) -> Result<MetricsReport> {
    let dets: Vec<Event> = records.iter().map(DetectionRecord::event).collect();
    Ok(micro_f1(match_events(annotations, &dets, &cfg.eval.collars())?))
}

/// Sorted distinct template keywords.
pub fn template_keywords(templates: &[Template]) -> Vec<String> {
    let mut v: Vec<String> = templates.iter().map(|t| t.keyword.clone()).collect();
    v.sort();
    v.dedup();
    v
}

/// Thresholds maximizing the F-score on a scored split.
pub fn tune(
    scored: &[ScoredFile],
    templates: &[Template],
    annotations: &[Event],
    cfg: &RunConfig,
) -> Result<TuneResult> {
    let keywords = template_keywords(templates);
    let mut scores: BTreeMap<String, Vec<f64>> = keywords.iter().map(|k| (k.clone(), Vec::new())).collect();
    for s in scored {
        for (t, track) in templates.iter().zip(&s.tracks) {
            scores
                .get_mut(&t.keyword)
                .expect("keyword listed")
                .extend(candidate_scores(std::slice::from_ref(track)));
        }
    }
    let collars = cfg.eval.collars();
    let evaluate = |th: &Thresholds| -> Result<Counts> {
        let dets: Vec<Event> = resolve(scored, templates, th, cfg)?
            .iter()
            .map(DetectionRecord::event)
            .collect();
        match_events(annotations, &dets, &collars)
    };
    tune_thresholds(cfg.eval.thresholds, &keywords, &scores, evaluate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub files: usize,
    pub templates: usize,
    pub workers: usize,
    pub audio_s: f64,
    pub wall_s: f64,
    /// Audio duration over wall-clock time; above 1 is faster than real time.
    pub real_time_factor: f64,
    pub detections: usize,
}

/// Times detection over `paths` including decoding and feature extraction.
pub fn bench(
    paths: &[PathBuf],
    templates: &[Template],
    features: &Features<'_>,
    thresholds: &Thresholds,
    cfg: &RunConfig,
) -> Result<(BenchReport, Vec<DetectionRecord>)> {
    let start = Instant::now();
    let scored = score_files(paths, templates, features)?;
    let records = resolve(&scored, templates, thresholds, cfg)?;
    let wall_s = start.elapsed().as_secs_f64();
    let audio_s: f64 = scored.iter().map(|s| s.duration_s).sum();
    let real_time_factor = if wall_s > 0.0 { audio_s / wall_s } else { 0.0 };
    Ok((
        BenchReport {
            files: paths.len(),
            templates: templates.len(),
            workers: par::current_workers(),
            audio_s,
            wall_s,
            real_time_factor,
            detections: records.len(),
        },
        records,
    ))
}
