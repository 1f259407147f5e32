use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use halludetect_core::eval::{auroc, LabeledScore};
use halludetect_core::gaussian::fit_gaussian_matrix;
use halludetect_core::nalgebra::DMatrix;
use halludetect_core::{CmDetector, EmbeddingMatrix, MahalanobisConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0) + shift)
}

fn fit(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("fit_gaussian");
    for &(n, d) in &[(500, 64), (2000, 256)] {
        let rows = gaussian_rows(&mut rng, n, d, 0.0);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{n}x{d}")),
            &rows,
            |b, rows| {
                b.iter(|| {
                    fit_gaussian_matrix(black_box(rows.clone()), &MahalanobisConfig::with_k(5))
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn score(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 256;
    let cfg = MahalanobisConfig::with_k(5);
    let truthful = fit_gaussian_matrix(gaussian_rows(&mut rng, 1000, d, 0.0), &cfg).unwrap();
    let hallucinated = fit_gaussian_matrix(gaussian_rows(&mut rng, 1000, d, 0.5), &cfg).unwrap();
    let probe: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("mahalanobis/single", |b| {
        b.iter(|| truthful.mahalanobis(black_box(&probe)).unwrap())
    });

    let detector = CmDetector::new(truthful, hallucinated, 0.15).unwrap();
    let batch: Vec<f32> = (0..4096 * d)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    let batch = EmbeddingMatrix::new(4096, d, batch).unwrap();
    let ids: Vec<String> = (0..4096).map(|i| format!("row-{i}")).collect();
    c.bench_function("cm/batch_score_4096", |b| {
        b.iter(|| detector.batch_score(black_box(&batch), &ids).unwrap())
    });
}

fn roc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores: Vec<LabeledScore> = (0..100_000)
        .map(|i| LabeledScore::new(rng.random_range(0..1000) as f64 / 100.0, i % 3 == 0))
        .collect();
    c.bench_function("auroc/100k_tied", |b| {
        b.iter(|| auroc(black_box(&scores)).unwrap())
    });
}

criterion_group!(benches, fit, score, roc);
criterion_main!(benches);
