//! Keywords built from the same frames in different orders. Each keyword
//! also carries a constant spectral signature, so a frame-wise model can
//! name the keyword from any single frame; only the position targets ask
//! it to tell early frames from late ones.

use kws_core::labels::{keyword_sample_labels, no_speech_label, KeywordLabelSpace, LabeledSegment};
use kws_core::matrix::cosine;
use kws_core::tacos::{train_toy_embedder, TrainConfig, TrainingCorpus};
use kws_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FRAMES: usize = 16;
const DIM: usize = 64;
const ORDERS: [[usize; 4]; 3] = [[0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2]];

fn prototypes(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..5)
        .map(|_| (0..DIM).map(|_| rng.gen_range(-8.0..0.0)).collect())
        .collect()
}

fn segment(proto: &[f64], signature: &[f64], rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(FRAMES, DIM);
    for t in 0..FRAMES {
        for (d, (p, s)) in proto.iter().zip(signature).enumerate() {
            let n: f64 = rng.sample(StandardNormal);
            m.set(t, d, p + s + 0.3 * n);
        }
    }
    m
}

fn signatures(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..=ORDERS.len())
        .map(|_| (0..DIM).map(|_| rng.gen_range(-4.0..0.0)).collect())
        .collect()
}

struct Fixture {
    corpus: TrainingCorpus,
    protos: Vec<Vec<f64>>,
    sigs: Vec<Vec<f64>>,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let protos = prototypes(&mut rng);
    let sigs = signatures(&mut rng);
    let names = (0..ORDERS.len()).map(|k| format!("kw{k}")).collect();
    let space = KeywordLabelSpace::new(names, false).unwrap();
    let n_pos = 4;
    let mut segments = Vec::new();
    for (k, order) in ORDERS.iter().enumerate() {
        for shot in 0..6 {
            let sample_id = k * 6 + shot;
            let labels = keyword_sample_labels(&space, k, order.len(), n_pos, sample_id).unwrap();
            for (&p, label) in order.iter().zip(labels) {
                segments.push(LabeledSegment {
                    features: segment(&protos[p], &sigs[k], &mut rng),
                    label,
                    class: k,
                });
            }
        }
    }
    // the last prototype is background
    for i in 0..24 {
        segments.push(LabeledSegment {
            features: segment(&protos[4], &sigs[ORDERS.len()], &mut rng),
            label: no_speech_label(&space, n_pos, 100 + i).unwrap(),
            class: space.no_speech_class(),
        });
    }
    Fixture {
        corpus: TrainingCorpus { segments, space, n_pos },
        protos,
        sigs,
    }
}

/// Mean cosine between the embeddings of each keyword's first and last frame.
fn first_last_similarity(seed: u64, pos_weight: f64) -> f64 {
    let fx = fixture(seed);
    let cfg = TrainConfig {
        d_emb: 16,
        n_cluster: 2,
        epochs: 200,
        batch: 8,
        seed,
        pos_weight,
        ..TrainConfig::default()
    };
    let model = train_toy_embedder(&fx.corpus, &cfg).unwrap();
    let embed = |p: usize, k: usize| {
        let frame: Vec<f64> = fx.protos[p].iter().zip(&fx.sigs[k]).map(|(a, b)| a + b).collect();
        model.embed(&Matrix::from_rows(&[frame]).unwrap()).unwrap().row(0).to_vec()
    };
    let sims: Vec<f64> = ORDERS
        .iter()
        .enumerate()
        .map(|(k, o)| cosine(&embed(o[0], k), &embed(o[o.len() - 1], k)).expect("non-zero embeddings"))
        .collect();
    sims.iter().sum::<f64>() / sims.len() as f64
}

#[test]
fn positional_loss_makes_embeddings_vary_over_time() {
    let seeds = [0u64, 1, 2];
    let with_pos: f64 = seeds.iter().map(|&s| first_last_similarity(s, 1.0)).sum::<f64>() / 3.0;
    let kw_only: f64 = seeds.iter().map(|&s| first_last_similarity(s, 0.0)).sum::<f64>() / 3.0;
    assert!(with_pos < 0.9, "first/last similarity with positions {with_pos:.3}");
    eprintln!("first/last similarity: {with_pos:.3} with positions, {kw_only:.3} keyword-only");
    assert!(kw_only > with_pos, "keyword-only {kw_only:.3} vs with positions {with_pos:.3}");
}
