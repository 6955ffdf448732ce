//! Central finite differences for the TACos batch loss.

use kws_core::labels::{positional_label, PositionSpec, SegmentLabel};
use kws_core::matrix::cosine;
use kws_core::tacos::{tacos_gradients, tacos_loss, ClusterCenters, LossItem};
use kws_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub embeddings: Vec<Matrix>,
    pub labels: Vec<SegmentLabel>,
    pub centers: ClusterCenters,
    pub scale: f64,
}

pub const T: usize = 5;
pub const D: usize = 8;
pub const N_KW: usize = 3;
pub const N_POS: usize = 4;
pub const N_CLUSTER: usize = 2;
pub const BATCH: usize = 4;

/// Smallest gap between the best and second-best cluster cosine over all
/// frames and cells. Near zero the max is not differentiable.
fn min_cluster_gap(inst: &Instance) -> f64 {
    let mut gap = f64::INFINITY;
    for e in &inst.embeddings {
        for t in 0..e.rows() {
            for kw in 0..N_KW {
                for pos in 0..N_POS {
                    let mut cs: Vec<f64> = (0..N_CLUSTER)
                        .map(|k| cosine(e.row(t), inst.centers.center(k, kw, pos)).unwrap())
                        .collect();
                    cs.sort_by(|a, b| b.total_cmp(a));
                    gap = gap.min(cs[0] - cs[1]);
                }
            }
        }
    }
    gap
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let embeddings = (0..BATCH)
            .map(|_| {
                Matrix::from_vec(T, D, (0..T * D).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
            })
            .collect();
        let labels = (0..BATCH)
            .map(|_| {
                let mut y = vec![0.0; N_KW];
                // occasionally a mixed keyword label
                if rng.gen_bool(0.25) {
                    let lam: f64 = rng.gen();
                    y[rng.gen_range(0..N_KW)] += lam;
                    y[rng.gen_range(0..N_KW)] += 1.0 - lam;
                } else {
                    y[rng.gen_range(0..N_KW)] = 1.0;
                }
                let spec = if rng.gen_bool(0.2) {
                    PositionSpec::Uniform
                } else {
                    let lo = rng.gen_range(1..=N_POS);
                    PositionSpec::Interval(lo, rng.gen_range(lo..=N_POS))
                };
                SegmentLabel {
                    y_kw: y,
                    y_pos: positional_label(spec, N_POS).unwrap(),
                    sample_id: rng.gen_range(0..3),
                    segment_index: 1,
                    n_seg: 1,
                }
            })
            .collect();
        let centers = ClusterCenters::random(N_CLUSTER, N_KW, N_POS, D, &mut rng);
        let scale = rng.gen_range(1.0..10.0);
        let inst = Instance {
            embeddings,
            labels,
            centers,
            scale,
        };
        if min_cluster_gap(&inst) > 1e-3 {
            return inst;
        }
    }
}

fn loss(inst: &Instance, embeddings: &[Matrix], centers: &ClusterCenters, pos_weight: f64) -> f64 {
    let items: Vec<LossItem<'_>> = embeddings
        .iter()
        .zip(&inst.labels)
        .map(|(e, l)| LossItem { embedding: e, label: l })
        .collect();
    tacos_loss(&items, centers, inst.scale, pos_weight).unwrap().total
}

pub struct Comparison {
    pub checked: usize,
    pub worst_rel_error: f64,
}

/// Compares every analytic partial with a central difference of step `h`.
pub fn compare(inst: &Instance, h: f64, pos_weight: f64) -> Comparison {
    let items: Vec<LossItem<'_>> = inst
        .embeddings
        .iter()
        .zip(&inst.labels)
        .map(|(e, l)| LossItem { embedding: e, label: l })
        .collect();
    let grads = tacos_gradients(&items, &inst.centers, inst.scale, pos_weight).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut check = |analytic: f64, numeric: f64| {
        let mag = analytic.abs().max(numeric.abs());
        if mag > 1e-8 {
            worst = worst.max((analytic - numeric).abs() / mag);
            checked += 1;
        }
    };

    for b in 0..BATCH {
        for idx in 0..T * D {
            let mut plus = inst.embeddings.clone();
            plus[b].as_mut_slice()[idx] += h;
            let mut minus = inst.embeddings.clone();
            minus[b].as_mut_slice()[idx] -= h;
            let numeric = (loss(inst, &plus, &inst.centers, pos_weight)
                - loss(inst, &minus, &inst.centers, pos_weight))
                / (2.0 * h);
            check(grads.embeddings[b].as_slice()[idx], numeric);
        }
    }
    for idx in 0..inst.centers.as_slice().len() {
        let mut plus = inst.centers.clone();
        plus.as_mut_slice()[idx] += h;
        let mut minus = inst.centers.clone();
        minus.as_mut_slice()[idx] -= h;
        let numeric = (loss(inst, &inst.embeddings, &plus, pos_weight)
            - loss(inst, &inst.embeddings, &minus, pos_weight))
            / (2.0 * h);
        check(grads.centers[idx], numeric);
    }
    Comparison {
        checked,
        worst_rel_error: worst,
    }
}
