//! Joint keyword/position angular-margin loss over sub-clustered centers.
//!
//! For an embedding `e` (T frames) the similarity to cell `(kw, pos)` is the
//! temporal mean of the best per-frame cosine over that cell's cluster
//! centers. A single softmax over all cells is scaled by the adaptive scale;
//! its keyword marginal feeds the keyword term and its position marginal the
//! position term.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KwsError, Result};
use crate::labels::SegmentLabel;
use crate::matrix::{dot, norm, Matrix};
use crate::par;

/// Floor applied to marginal probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-30;

/// Trainable centers laid out as `[cluster][kw][pos][dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCenters {
    n_cluster: usize,
    n_kw: usize,
    n_pos: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ClusterCenters {
    pub fn from_vec(
        n_cluster: usize,
        n_kw: usize,
        n_pos: usize,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if n_cluster == 0 || n_kw == 0 || n_pos == 0 || dim == 0 {
            return Err(KwsError::param("cluster center dimensions must be positive"));
        }
        if data.len() != n_cluster * n_kw * n_pos * dim {
            return Err(KwsError::param("cluster center data has the wrong length"));
        }
        Ok(Self {
            n_cluster,
            n_kw,
            n_pos,
            dim,
            data,
        })
    }

    /// Unit-norm Gaussian directions.
    pub fn random<R: Rng>(n_cluster: usize, n_kw: usize, n_pos: usize, dim: usize, rng: &mut R) -> Self {
        let mut data = Vec::with_capacity(n_cluster * n_kw * n_pos * dim);
        for _ in 0..n_cluster * n_kw * n_pos {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = norm(&v);
            data.extend(v.iter().map(|x| x / n));
        }
        Self {
            n_cluster,
            n_kw,
            n_pos,
            dim,
            data,
        }
    }

    pub fn n_cluster(&self) -> usize {
        self.n_cluster
    }
    pub fn n_kw(&self) -> usize {
        self.n_kw
    }
    pub fn n_pos(&self) -> usize {
        self.n_pos
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_cells(&self) -> usize {
        self.n_kw * self.n_pos
    }

    #[inline]
    fn offset(&self, cluster: usize, cell: usize) -> usize {
        (cluster * self.n_cells() + cell) * self.dim
    }

    pub fn center(&self, cluster: usize, kw: usize, pos: usize) -> &[f64] {
        let o = self.offset(cluster, kw * self.n_pos + pos);
        &self.data[o..o + self.dim]
    }

    pub fn center_mut(&mut self, cluster: usize, kw: usize, pos: usize) -> &mut [f64] {
        let o = self.offset(cluster, kw * self.n_pos + pos);
        &mut self.data[o..o + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Unit-normalized copy plus the original norms.
    fn normalized(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut unit = self.data.clone();
        let mut norms = Vec::with_capacity(self.data.len() / self.dim);
        for (i, chunk) in unit.chunks_exact_mut(self.dim).enumerate() {
            let n = norm(chunk);
            if !(n > 0.0 && n.is_finite()) {
                return Err(KwsError::NumericDomain(format!(
                    "cluster center {i} has zero or non-finite norm"
                )));
            }
            chunk.iter_mut().for_each(|x| *x /= n);
            norms.push(n);
        }
        Ok((unit, norms))
    }
}

/// Per-frame winners of the max over clusters.
#[derive(Debug, Clone)]
struct SimilarityDetail {
    theta: Matrix,
    /// `[t][cell]` -> (winning cluster, cosine)
    winners: Vec<(usize, f64)>,
    unit_frames: Matrix,
    frame_norms: Vec<f64>,
}

fn check_shapes(e: &Matrix, c: &ClusterCenters) -> Result<()> {
    if e.cols() != c.dim {
        return Err(KwsError::param(format!(
            "embedding dimension {} does not match centers ({})",
            e.cols(),
            c.dim
        )));
    }
    if e.rows() == 0 {
        return Err(KwsError::param("embedding has no frames"));
    }
    Ok(())
}

fn similarity_detail(e: &Matrix, c: &ClusterCenters, unit_centers: &[f64]) -> Result<SimilarityDetail> {
    check_shapes(e, c)?;
    let (t_len, dim) = e.shape();
    let cells = c.n_cells();
    let mut unit_frames = e.clone();
    let mut frame_norms = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let row = unit_frames.row_mut(t);
        let n = norm(row);
        if !(n > 0.0 && n.is_finite()) {
            return Err(KwsError::NumericDomain(format!(
                "embedding frame {t} has zero or non-finite norm"
            )));
        }
        row.iter_mut().for_each(|x| *x /= n);
        frame_norms.push(n);
    }

    let mut winners = Vec::with_capacity(t_len * cells);
    let mut theta = Matrix::zeros(c.n_kw, c.n_pos);
    for t in 0..t_len {
        let f = unit_frames.row(t);
        for cell in 0..cells {
            let mut best = (0usize, f64::NEG_INFINITY);
            for k in 0..c.n_cluster {
                let o = (k * cells + cell) * dim;
                let cos = dot(f, &unit_centers[o..o + dim]).clamp(-1.0, 1.0);
                // strict comparison keeps the lowest index on ties
                if cos > best.1 {
                    best = (k, cos);
                }
            }
            winners.push(best);
            let v = theta.as_mut_slice();
            v[cell] += best.1;
        }
    }
    theta.scale(1.0 / t_len as f64);
    for v in theta.as_mut_slice() {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(SimilarityDetail {
        theta,
        winners,
        unit_frames,
        frame_norms,
    })
}

/// `theta[kw][pos]`: mean over frames of the best cosine to the cell's clusters.
pub fn similarity(e: &Matrix, c: &ClusterCenters) -> Result<Matrix> {
    let (unit, _) = c.normalized()?;
    Ok(similarity_detail(e, c, &unit)?.theta)
}

/// Softmax over all `(kw, pos)` cells of `scale * theta`.
pub fn joint_softmax(theta: &Matrix, scale: f64) -> Matrix {
    let max = theta
        .as_slice()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(scale * v));
    let mut s = theta.clone();
    let mut sum = 0.0;
    for v in s.as_mut_slice() {
        *v = (scale * *v - max).exp();
        sum += *v;
    }
    s.scale(1.0 / sum);
    s
}

/// Keyword marginal (sum over positions).
pub fn keyword_marginal(s: &Matrix) -> Vec<f64> {
    s.iter_rows().map(|r| r.iter().sum()).collect()
}

/// Position marginal (sum over keywords).
pub fn position_marginal(s: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; s.cols()];
    for r in s.iter_rows() {
        out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub theta: Matrix,
    pub s: Matrix,
    /// Sum of `y_kw * ln P(kw)`; non-positive.
    pub loss_kw: f64,
    /// Sum of `y_pos * ln P(pos)`; non-positive.
    pub loss_pos: f64,
    /// `-(loss_kw + pos_weight * loss_pos)`; non-negative.
    pub loss_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub items: Vec<LossOutput>,
    /// Mean over samples of each sample's mean segment loss.
    pub total: f64,
}

/// One embedding with its target.
#[derive(Debug, Clone, Copy)]
pub struct LossItem<'a> {
    pub embedding: &'a Matrix,
    pub label: &'a SegmentLabel,
}

fn check_label(label: &SegmentLabel, c: &ClusterCenters) -> Result<()> {
    if label.y_kw.len() != c.n_kw || label.y_pos.weights.len() != c.n_pos {
        return Err(KwsError::param(format!(
            "label shape ({}, {}) does not match centers ({}, {})",
            label.y_kw.len(),
            label.y_pos.weights.len(),
            c.n_kw,
            c.n_pos
        )));
    }
    Ok(())
}

/// Weight of each item: 1 / (number of samples * segments of its sample).
fn sample_weights(batch: &[LossItem<'_>]) -> Vec<f64> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for it in batch {
        *counts.entry(it.label.sample_id).or_default() += 1;
    }
    let k = counts.len() as f64;
    batch
        .iter()
        .map(|it| 1.0 / (k * counts[&it.label.sample_id] as f64))
        .collect()
}

fn item_loss(theta: Matrix, label: &SegmentLabel, scale: f64, pos_weight: f64) -> LossOutput {
    let s = joint_softmax(&theta, scale);
    let p_kw = keyword_marginal(&s);
    let p_pos = position_marginal(&s);
    let xlogp = |y: &[f64], p: &[f64]| -> f64 {
        y.iter()
            .zip(p)
            .filter(|(&y, _)| y != 0.0)
            .map(|(&y, &p)| y * p.max(PROB_FLOOR).ln())
            .sum()
    };
    let loss_kw = xlogp(&label.y_kw, &p_kw);
    let loss_pos = xlogp(&label.y_pos.weights, &p_pos);
    LossOutput {
        theta,
        s,
        loss_kw,
        loss_pos,
        loss_total: -(loss_kw + pos_weight * loss_pos),
    }
}

pub fn tacos_loss(
    batch: &[LossItem<'_>],
    centers: &ClusterCenters,
    scale: f64,
    pos_weight: f64,
) -> Result<BatchLoss> {
    let (unit, _) = centers.normalized()?;
    let items = par::map(batch, |it| -> Result<LossOutput> {
        check_label(it.label, centers)?;
        let d = similarity_detail(it.embedding, centers, &unit)?;
        Ok(item_loss(d.theta, it.label, scale, pos_weight))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let weights = sample_weights(batch);
    let terms: Vec<f64> = items
        .iter()
        .zip(&weights)
        .map(|(o, w)| w * o.loss_total)
        .collect();
    let total = par::tree_reduce(terms, |a, b| a + b).unwrap_or(0.0);
    Ok(BatchLoss { items, total })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Vec<Matrix>,
    /// Same layout as [`ClusterCenters::as_slice`].
    pub centers: Vec<f64>,
    pub loss: BatchLoss,
}

/// Analytic gradients of the batch loss. The scale is a constant; the max
/// over clusters passes gradient only to the attaining (lowest-index) cluster.
pub fn tacos_gradients(
    batch: &[LossItem<'_>],
    centers: &ClusterCenters,
    scale: f64,
    pos_weight: f64,
) -> Result<Gradients> {
    let (unit, center_norms) = centers.normalized()?;
    let weights = sample_weights(batch);
    let dim = centers.dim;
    let cells = centers.n_cells();
    let indexed: Vec<(usize, &LossItem<'_>)> = batch.iter().enumerate().collect();

    let per_item = par::map(&indexed, |&(i, it)| -> Result<(LossOutput, Matrix, Vec<f64>)> {
        check_label(it.label, centers)?;
        let d = similarity_detail(it.embedding, centers, &unit)?;
        let out = item_loss(d.theta.clone(), it.label, scale, pos_weight);
        let w = weights[i];

        let p_kw = keyword_marginal(&out.s);
        let p_pos = position_marginal(&out.s);
        // d(loss)/d(s[kw][pos])
        let mut g = Matrix::zeros(centers.n_kw, centers.n_pos);
        for kw in 0..centers.n_kw {
            for pos in 0..centers.n_pos {
                let mut v = 0.0;
                let yk = it.label.y_kw[kw];
                if yk != 0.0 && p_kw[kw] > PROB_FLOOR {
                    v -= yk / p_kw[kw];
                }
                let yp = it.label.y_pos.weights[pos];
                if yp != 0.0 && p_pos[pos] > PROB_FLOOR {
                    v -= pos_weight * yp / p_pos[pos];
                }
                g.set(kw, pos, v);
            }
        }
        let sg: f64 = dot(out.s.as_slice(), g.as_slice());
        // through the softmax and the scale, averaged over frames
        let t_len = it.embedding.rows();
        let dtheta: Vec<f64> = out
            .s
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .map(|(s, g)| w * scale * s * (g - sg) / t_len as f64)
            .collect();

        let mut de = Matrix::zeros(t_len, dim);
        let mut dc = vec![0.0; centers.data.len()];
        for t in 0..t_len {
            let f = d.unit_frames.row(t);
            let inv_norm = 1.0 / d.frame_norms[t];
            let de_row = de.row_mut(t);
            for (cell, &dth) in dtheta.iter().enumerate() {
                if dth == 0.0 {
                    continue;
                }
                let (k, cos) = d.winners[t * cells + cell];
                let o = (k * cells + cell) * dim;
                let cu = &unit[o..o + dim];
                let inv_c = 1.0 / center_norms[o / dim];
                for j in 0..dim {
                    de_row[j] += dth * (cu[j] - cos * f[j]) * inv_norm;
                    dc[o + j] += dth * (f[j] - cos * cu[j]) * inv_c;
                }
            }
        }
        Ok((out, de, dc))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut items = Vec::with_capacity(per_item.len());
    let mut embeddings = Vec::with_capacity(per_item.len());
    let mut center_grads = Vec::with_capacity(per_item.len());
    let mut terms = Vec::with_capacity(per_item.len());
    for ((out, de, dc), w) in per_item.into_iter().zip(&weights) {
        terms.push(w * out.loss_total);
        items.push(out);
        embeddings.push(de);
        center_grads.push(dc);
    }
    let centers_grad = par::tree_reduce(center_grads, |mut a, b| {
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        a
    })
    .unwrap_or_else(|| vec![0.0; centers.data.len()]);
    let total = par::tree_reduce(terms, |a, b| a + b).unwrap_or(0.0);
    Ok(Gradients {
        embeddings,
        centers: centers_grad,
        loss: BatchLoss { items, total },
    })
}
