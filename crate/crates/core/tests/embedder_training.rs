use kws_core::labels::{
    keyword_sample_labels, no_speech_label, KeywordLabelSpace, LabeledSegment,
};
use kws_core::tacos::model_io::{decode_model, encode_model};
use kws_core::tacos::{train_toy_embedder, TrainConfig, TrainingCorpus};
use kws_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FRAMES: usize = 16;
const DIM: usize = 64;

/// Each keyword is a band of active bins that drifts upward over time.
fn keyword_frames(kw: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(FRAMES, DIM);
    for t in 0..FRAMES {
        for d in 0..DIM {
            m.set(t, d, rng.gen_range(-0.3..0.3));
        }
        let centre = 8 + 16 * kw + t / 4;
        for d in centre.saturating_sub(2)..(centre + 2).min(DIM) {
            m.set(t, d, m.get(t, d) + 3.0);
        }
    }
    m
}

fn corpus(seed: u64) -> TrainingCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = KeywordLabelSpace::new(vec!["a".into(), "b".into(), "c".into()], false).unwrap();
    let n_pos = 3;
    let mut segments = Vec::new();
    let mut sample = 0;
    for kw in 0..3 {
        for _ in 0..5 {
            for label in keyword_sample_labels(&space, kw, 3, n_pos, sample).unwrap() {
                segments.push(LabeledSegment {
                    features: keyword_frames(kw, &mut rng),
                    label,
                    class: kw,
                });
            }
            sample += 1;
        }
    }
    for _ in 0..10 {
        let noise = Matrix::from_vec(
            FRAMES,
            DIM,
            (0..FRAMES * DIM).map(|_| rng.gen_range(-0.3..0.3)).collect(),
        )
        .unwrap();
        segments.push(LabeledSegment {
            features: noise,
            label: no_speech_label(&space, n_pos, sample).unwrap(),
            class: space.no_speech_class(),
        });
        sample += 1;
    }
    TrainingCorpus {
        segments,
        space,
        n_pos,
    }
}

fn config() -> TrainConfig {
    TrainConfig {
        d_emb: 16,
        n_cluster: 2,
        epochs: 25,
        batch: 8,
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn training_reduces_loss_and_separates_classes() {
    let c = corpus(1);
    let model = train_toy_embedder(&c, &config()).unwrap();
    let trace = &model.loss_trace;
    assert!(trace.iter().all(|l| l.is_finite()));
    assert!(trace.last().unwrap() < &(0.5 * trace[0]), "{trace:?}");

    let correct = c
        .segments
        .iter()
        .filter(|s| {
            let p = model.keyword_posterior(&s.features).unwrap();
            let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            best == s.class
        })
        .count();
    assert!(correct as f64 >= 0.9 * c.segments.len() as f64, "{correct}/{}", c.segments.len());
}

#[test]
fn equal_seeds_give_identical_models() {
    let c = corpus(2);
    let a = train_toy_embedder(&c, &config()).unwrap();
    let b = train_toy_embedder(&c, &config()).unwrap();
    assert_eq!(encode_model(&a).unwrap(), encode_model(&b).unwrap());
    let other = TrainConfig { seed: 5, ..config() };
    let d = train_toy_embedder(&c, &other).unwrap();
    assert_ne!(a.embedder, d.embedder);
}

#[test]
fn model_roundtrips_through_kwem() {
    let model = train_toy_embedder(&corpus(3), &TrainConfig { epochs: 2, ..config() }).unwrap();
    let back = decode_model(&encode_model(&model).unwrap()).unwrap();
    assert_eq!(back.embedder, model.embedder);
    assert_eq!(back.centers, model.centers);
    assert_eq!(back.scale.value, model.scale.value);
    assert_eq!(back.space, model.space);
    assert_eq!(back.loss_trace, model.loss_trace);
}

#[test]
fn empty_corpus_is_rejected() {
    let mut c = corpus(0);
    c.segments.clear();
    assert!(train_toy_embedder(&c, &config()).is_err());
}
