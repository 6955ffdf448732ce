use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kws_core::dtw::detect::match_all;
use kws_core::dtw::{cost_matrix, subsequence_dtw, subsequence_dtw_rows, Template};
use kws_core::frontend::{AudioClip, HfccExtractor, HfccConfig};
use kws_core::Matrix;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    [("parallel", n), ("single", 1)]
        .into_iter()
        .map(|(name, t)| (name, rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap()))
        .collect()
}

fn dtw_sweeps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = random_matrix(&mut rng, 60, 32);
    let q = random_matrix(&mut rng, 4000, 32);
    let cost = cost_matrix(&t, &q).unwrap();
    let mut g = c.benchmark_group("subsequence_dtw");
    g.bench_function("columns", |b| b.iter(|| subsequence_dtw(black_box(&cost))));
    g.bench_function("rows", |b| b.iter(|| subsequence_dtw_rows(black_box(&cost))));
    g.finish();
}

fn template_matching(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let templates: Vec<Template> = (0..16)
        .map(|i| {
            let frames = random_matrix(&mut rng, 40 + i, 32);
            Template::new(frames, format!("kw{i}"), 0.6, 0.016).unwrap()
        })
        .collect();
    let query = random_matrix(&mut rng, 4000, 32);
    let mut g = c.benchmark_group("match_all");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| pool.install(|| match_all(black_box(&templates), black_box(&query)).unwrap()))
        });
    }
    g.finish();
}

fn hfcc_extraction(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f32> = (0..16_000 * 30).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let clip = AudioClip::new(samples, 16_000, "bench");
    let hfcc = HfccExtractor::new(HfccConfig::default()).unwrap();
    let mut g = c.benchmark_group("hfcc_30s");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| pool.install(|| hfcc.extract(black_box(&clip)).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, dtw_sweeps, template_matching, hfcc_extraction);
criterion_main!(benches);
