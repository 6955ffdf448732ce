//! Frame-wise affine embedder trained with the TACos loss.
//!
//! Each input frame (a log-Mel row) is mapped independently to an
//! embedding frame, so the time axis is preserved.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::loss::{joint_softmax, keyword_marginal, similarity, tacos_gradients, ClusterCenters, LossItem};
use super::scale::AdaptiveScale;
use crate::error::{KwsError, Result};
use crate::labels::{oversample_plan, KeywordLabelSpace, LabeledSegment};
use crate::matrix::Matrix;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEmbedder {
    in_dim: usize,
    out_dim: usize,
    /// `in_dim x out_dim`, row-major by input dimension.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl FrameEmbedder {
    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(KwsError::param("embedder parameter shapes disagree"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    fn random(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn embed(&self, frames: &Matrix) -> Result<Matrix> {
        if frames.cols() != self.in_dim {
            return Err(KwsError::param(format!(
                "embedder expects {} input dims, got {}",
                self.in_dim,
                frames.cols()
            )));
        }
        let mut out = Matrix::zeros(frames.rows(), self.out_dim);
        for t in 0..frames.rows() {
            let x = frames.row(t);
            let y = out.row_mut(t);
            y.copy_from_slice(&self.bias);
            for (i, &xi) in x.iter().enumerate() {
                let w = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
                y.iter_mut().zip(w).for_each(|(o, w)| *o += xi * w);
            }
        }
        Ok(out)
    }

    /// Fold a per-input standardization `(x - mean) / std` into the weights.
    fn fold_standardization(&mut self, mean: &[f64], std: &[f64]) {
        for d in 0..self.out_dim {
            let mut shift = 0.0;
            for i in 0..self.in_dim {
                let w = &mut self.weights[i * self.out_dim + d];
                *w /= std[i];
                shift += mean[i] * *w;
            }
            self.bias[d] -= shift;
        }
    }

    fn round_to_f32(&mut self) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *v = *v as f32 as f64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub d_emb: usize,
    pub n_cluster: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// 1 trains keyword + position; 0 is the keyword-only ablation.
    pub pos_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_emb: 128,
            n_cluster: 16,
            lr: 1e-2,
            epochs: 60,
            batch: 32,
            seed: 0,
            pos_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.n_cluster == 0 || self.batch == 0 || self.epochs == 0 {
            return Err(KwsError::param(
                "d_emb, n_cluster, batch and epochs must be positive",
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(KwsError::param("learning rate must be positive"));
        }
        if !(self.pos_weight >= 0.0) {
            return Err(KwsError::param("position loss weight must be non-negative"));
        }
        Ok(())
    }
}

/// Labeled log-Mel segments plus the label space they refer to.
#[derive(Debug, Clone)]
pub struct TrainingCorpus {
    pub segments: Vec<LabeledSegment>,
    pub space: KeywordLabelSpace,
    pub n_pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub embedder: FrameEmbedder,
    pub centers: ClusterCenters,
    pub scale: AdaptiveScale,
    pub space: KeywordLabelSpace,
    pub n_pos: usize,
    pub config: TrainConfig,
    /// Mean batch loss of every epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainedModel {
    pub fn embed(&self, frames: &Matrix) -> Result<Matrix> {
        self.embedder.embed(frames)
    }

    /// Keyword marginal of the joint softmax for one segment.
    pub fn keyword_posterior(&self, frames: &Matrix) -> Result<Vec<f64>> {
        let e = self.embed(frames)?;
        let theta = similarity(&e, &self.centers)?;
        Ok(keyword_marginal(&joint_softmax(&theta, self.scale.value)))
    }
}

struct Adam {
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

fn feature_stats(segments: &[LabeledSegment], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n = 0usize;
    for s in segments {
        for row in s.features.iter_rows() {
            for (i, &x) in row.iter().enumerate() {
                mean[i] += x;
                sq[i] += x * x;
            }
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    let std = mean
        .iter_mut()
        .zip(&sq)
        .map(|(m, s)| {
            *m /= n;
            (s / n - *m * *m).max(0.0).sqrt().max(1e-3)
        })
        .collect();
    (mean, std)
}

/// Mini-batch Adam on the TACos loss with one scale update per batch.
/// Every random draw comes from one stream seeded by `cfg.seed`, and all
/// reductions have a fixed order, so equal seeds give identical parameters.
pub fn train_toy_embedder(corpus: &TrainingCorpus, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let segs = &corpus.segments;
    let first = segs
        .first()
        .ok_or_else(|| KwsError::param("training corpus is empty"))?;
    let in_dim = first.features.cols();
    let n_kw = corpus.space.n_kw();
    for s in segs {
        if s.features.cols() != in_dim || s.features.rows() == 0 {
            return Err(KwsError::param("training segments disagree in feature shape"));
        }
        if s.label.y_kw.len() != n_kw || s.label.y_pos.n_pos() != corpus.n_pos {
            return Err(KwsError::param("training label shape does not match the label space"));
        }
    }

    let (mean, std) = feature_stats(segs, in_dim);
    let inputs: Vec<Matrix> = segs
        .iter()
        .map(|s| {
            let mut m = s.features.clone();
            for r in 0..m.rows() {
                for (i, x) in m.row_mut(r).iter_mut().enumerate() {
                    *x = (*x - mean[i]) / std[i];
                }
            }
            m
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut embedder = FrameEmbedder::random(in_dim, cfg.d_emb, &mut rng);
    let mut centers = ClusterCenters::random(cfg.n_cluster, n_kw, corpus.n_pos, cfg.d_emb, &mut rng);
    let mut scale = AdaptiveScale::initial(centers.n_cells());
    let mut adam_w = Adam::new(embedder.weights.len(), cfg.lr);
    let mut adam_b = Adam::new(embedder.bias.len(), cfg.lr);
    let mut adam_c = Adam::new(centers.as_slice().len(), cfg.lr);
    let classes: Vec<usize> = segs.iter().map(|s| s.class).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut plan = oversample_plan(&classes, &mut rng)?;
        plan.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in plan.chunks(cfg.batch) {
            let embeddings = par::map(chunk, |&i| embedder.embed(&inputs[i]))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<_> = chunk.iter().map(|&i| &segs[i].label).collect();
            let thetas = par::map(&embeddings, |e| similarity(e, &centers))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            scale.update(&thetas.iter().collect::<Vec<_>>(), &labels);

            let items: Vec<LossItem<'_>> = embeddings
                .iter()
                .zip(&labels)
                .map(|(e, l)| LossItem { embedding: e, label: l })
                .collect();
            let grads = tacos_gradients(&items, &centers, scale.value, cfg.pos_weight)?;
            if !grads.loss.total.is_finite() {
                return Err(KwsError::Training(format!(
                    "loss became {} in epoch {epoch} (scale {:.4})",
                    grads.loss.total, scale.value
                )));
            }
            epoch_loss += grads.loss.total * chunk.len() as f64;

            let pairs: Vec<(usize, &Matrix)> = chunk.iter().copied().zip(&grads.embeddings).collect();
            let partial = par::map(&pairs, |&(i, de)| {
                let x = &inputs[i];
                let mut dw = vec![0.0; in_dim * cfg.d_emb];
                let mut db = vec![0.0; cfg.d_emb];
                for t in 0..x.rows() {
                    let g = de.row(t);
                    db.iter_mut().zip(g).for_each(|(b, g)| *b += g);
                    for (xi, w) in x.row(t).iter().zip(dw.chunks_exact_mut(cfg.d_emb)) {
                        w.iter_mut().zip(g).for_each(|(w, g)| *w += xi * g);
                    }
                }
                (dw, db)
            });
            let (dw, db) = par::tree_reduce(partial, |(mut aw, mut ab), (bw, bb)| {
                aw.iter_mut().zip(&bw).for_each(|(a, b)| *a += b);
                ab.iter_mut().zip(&bb).for_each(|(a, b)| *a += b);
                (aw, ab)
            })
            .expect("non-empty batch");

            adam_w.apply(&mut embedder.weights, &dw);
            adam_b.apply(&mut embedder.bias, &db);
            adam_c.apply(centers.as_mut_slice(), &grads.centers);
        }
        let mean_loss = epoch_loss / plan.len() as f64;
        log::debug!("epoch {epoch}: loss {mean_loss:.5} scale {:.3}", scale.value);
        trace.push(mean_loss);
    }

    embedder.fold_standardization(&mean, &std);
    embedder.round_to_f32();
    for v in centers.as_mut_slice() {
        *v = *v as f32 as f64;
    }
    Ok(TrainedModel {
        embedder,
        centers,
        scale,
        space: corpus.space.clone(),
        n_pos: corpus.n_pos,
        config: *cfg,
        loss_trace: trace,
    })
}
