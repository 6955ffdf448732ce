//! AdaCos-style dynamic softmax scale.
//!
//! Initial value `sqrt(2) * ln(C - 1)` for `C` cells. Once per batch:
//! `scale <- ln(B) / cos(min(pi/4, median_angle))`, where `B` is the batch
//! mean of the summed `exp(scale * theta)` over non-target cells and
//! `median_angle` is the batch median of the target-cell angle. The result is
//! clamped to `[MIN_SCALE, MAX_SCALE]`.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::labels::SegmentLabel;
use crate::matrix::Matrix;

pub const MIN_SCALE: f64 = 1.0;
pub const MAX_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScale {
    pub value: f64,
    pub n_cells: usize,
    pub updates: u64,
}

impl AdaptiveScale {
    pub fn initial(n_cells: usize) -> Self {
        let raw = SQRT_2 * ((n_cells as f64) - 1.0).max(1.0).ln();
        Self {
            value: raw.clamp(MIN_SCALE, MAX_SCALE),
            n_cells,
            updates: 0,
        }
    }

    /// One update from a batch of similarity matrices and their labels.
    /// Cells where `y_kw * y_pos > 0` count as targets.
    pub fn update(&mut self, thetas: &[&Matrix], labels: &[&SegmentLabel]) {
        *self = update_scale(thetas, labels, *self);
    }
}

pub fn update_scale(thetas: &[&Matrix], labels: &[&SegmentLabel], scale: AdaptiveScale) -> AdaptiveScale {
    if thetas.is_empty() || thetas.len() != labels.len() {
        return scale;
    }
    let mut b_sum = 0.0;
    let mut angles = Vec::with_capacity(thetas.len());
    for (theta, label) in thetas.iter().zip(labels) {
        let mut others = 0.0;
        let mut target_cos = 0.0;
        let mut target_mass = 0.0;
        for (kw, &yk) in label.y_kw.iter().enumerate() {
            for (pos, &yp) in label.y_pos.weights.iter().enumerate() {
                let th = theta.get(kw, pos);
                let w = yk * yp;
                if w > 0.0 {
                    target_cos += w * th;
                    target_mass += w;
                } else {
                    others += (scale.value * th).exp();
                }
            }
        }
        b_sum += others;
        if target_mass > 0.0 {
            angles.push((target_cos / target_mass).clamp(-1.0, 1.0).acos());
        }
    }
    let b_avg = b_sum / thetas.len() as f64;
    if angles.is_empty() || !(b_avg > 0.0) {
        return scale;
    }
    let median = median(&mut angles);
    let next = b_avg.ln() / median.min(FRAC_PI_4).cos();
    let value = if next.is_finite() {
        next.clamp(MIN_SCALE, MAX_SCALE)
    } else {
        scale.value
    };
    AdaptiveScale {
        value,
        n_cells: scale.n_cells,
        updates: scale.updates + 1,
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
