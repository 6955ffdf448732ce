//! Effective configuration of a pipeline run.

use serde::{Deserialize, Serialize};

use crate::dataset::ToyDatasetSpec;
use crate::dtw::DetectConfig;
use crate::error::{KwsError, Result};
use crate::eval::{Collars, ThresholdMode};
use crate::frontend::{HfccConfig, SegmentationConfig, LOGMEL_HOP};
use crate::tacos::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Embedding,
    Hfcc,
}

impl std::str::FromStr for FeatureSource {
    type Err = KwsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(Self::Embedding),
            "hfcc" => Ok(Self::Hfcc),
            other => Err(KwsError::Config(format!("unknown feature source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendSection {
    pub seg_len_s: f64,
    pub infer_hop_samples: usize,
}

impl Default for FrontendSection {
    fn default() -> Self {
        let s = SegmentationConfig::default();
        Self {
            seg_len_s: s.seg_len_s,
            infer_hop_samples: s.infer_hop_samples,
        }
    }
}

impl FrontendSection {
    pub fn segmentation(&self) -> SegmentationConfig {
        SegmentationConfig {
            infer_hop_samples: self.infer_hop_samples,
            ..SegmentationConfig::with_length(self.seg_len_s)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub d_emb: usize,
    pub n_cluster: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Train with time-reversed keyword segments as extra classes.
    pub reversed: bool,
    /// Train with the positional loss; off is the keyword-only ablation.
    pub pos_loss: bool,
    /// No-speech segments drawn from noise, relative to the number of
    /// keyword segments.
    pub noise_ratio: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            d_emb: t.d_emb,
            n_cluster: t.n_cluster,
            lr: t.lr,
            epochs: t.epochs,
            batch: t.batch,
            reversed: true,
            pos_loss: true,
            noise_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub features: FeatureSource,
    pub min_dur_fraction: f64,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            features: FeatureSource::Embedding,
            min_dur_fraction: DetectConfig::default().min_dur_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub thresholds: ThresholdMode,
    pub onset_collar_s: f64,
    pub offset_collar_min_s: f64,
    pub offset_collar_fraction: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let c = Collars::default();
        Self {
            thresholds: ThresholdMode::Global,
            onset_collar_s: c.onset_s,
            offset_collar_min_s: c.offset_min_s,
            offset_collar_fraction: c.offset_fraction,
        }
    }
}

impl EvalSection {
    pub fn collars(&self) -> Collars {
        Collars {
            onset_s: self.onset_collar_s,
            offset_min_s: self.offset_collar_min_s,
            offset_fraction: self.offset_collar_fraction,
        }
    }
}

/// Every tunable constant of the engine. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub frontend: FrontendSection,
    pub train: TrainSection,
    pub detect: DetectSection,
    pub eval: EvalSection,
    pub hfcc: HfccConfig,
    pub toy: ToyDatasetSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            frontend: FrontendSection::default(),
            train: TrainSection::default(),
            detect: DetectSection::default(),
            eval: EvalSection::default(),
            hfcc: HfccConfig::default(),
            toy: ToyDatasetSpec::default(),
        }
    }
}

impl RunConfig {
    /// Small embedder sized for the synthetic corpus.
    pub fn toy() -> Self {
        let mut cfg = Self::default();
        cfg.train.d_emb = 32;
        cfg.train.n_cluster = 4;
        cfg.train.epochs = 200;
        cfg
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            d_emb: self.train.d_emb,
            n_cluster: self.train.n_cluster,
            lr: self.train.lr,
            epochs: self.train.epochs,
            batch: self.train.batch,
            seed: self.seed,
            pos_weight: if self.train.pos_loss { 1.0 } else { 0.0 },
        }
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            min_dur_fraction: self.detect.min_dur_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let seg = self.frontend.segmentation();
        seg.validate().map_err(as_config)?;
        if seg.infer_hop_samples != LOGMEL_HOP {
            return Err(KwsError::Config(format!(
                "infer_hop_samples must equal the log-Mel hop ({LOGMEL_HOP})"
            )));
        }
        self.train_config().validate().map_err(as_config)?;
        if !(self.train.noise_ratio >= 0.0 && self.train.noise_ratio.is_finite()) {
            return Err(KwsError::Config("noise_ratio must be non-negative".into()));
        }
        if !(self.detect.min_dur_fraction >= 0.0) {
            return Err(KwsError::Config("min_dur_fraction must be non-negative".into()));
        }
        let c = self.eval.collars();
        if !(c.onset_s >= 0.0 && c.offset_min_s >= 0.0 && c.offset_fraction >= 0.0) {
            return Err(KwsError::Config("collars must be non-negative".into()));
        }
        Ok(())
    }
}

fn as_config(e: KwsError) -> KwsError {
    match e {
        KwsError::Parameter(m) => KwsError::Config(m),
        other => other,
    }
}
