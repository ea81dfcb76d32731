use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use njcr_core::dictionary::build_dictionary;
use njcr_core::pipeline::{run_pipeline, Method, PipelineParams};
use njcr_core::solver::{solve_knjcr, solve_njcr, SolverConfig};
use njcr_core::synthetic::{generate_scene, BackgroundParams, SceneParams};
use njcr_core::{rx_detect, segment, PixelMatrix, SegmentParams, UnionDictionary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(l: usize, k: usize, n: usize) -> (PixelMatrix, UnionDictionary) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = DMatrix::from_fn(l, k, |_, _| rng.gen_range(0.0..1.0));
    let x = DMatrix::from_fn(l, n, |_, _| rng.gen_range(0.0..1.0));
    (
        PixelMatrix::from_columns(x).unwrap(),
        UnionDictionary::from_matrix(d, k - k / 10).unwrap(),
    )
}

fn scene(side: usize) -> SceneParams {
    SceneParams {
        background: BackgroundParams {
            width: side,
            height: side,
            ..BackgroundParams::default()
        },
        ..SceneParams::default()
    }
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("admm");
    let cfg = SolverConfig {
        max_iter: 50,
        ..SolverConfig::default()
    };
    for k in [50, 200] {
        let (x, d) = random_problem(50, k, 1000);
        group.bench_with_input(BenchmarkId::new("njcr_50_iter", k), &k, |b, _| {
            b.iter(|| solve_njcr(&x, &d, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("knjcr_50_iter", k), &k, |b, _| {
            b.iter(|| solve_knjcr(&x, &d, &cfg).unwrap())
        });
    }
    group.finish();
}

fn stages(c: &mut Criterion) {
    let s = generate_scene(&scene(50)).unwrap();
    let x = s.cube.flatten();
    let params = SegmentParams {
        target_count: 25,
        ..SegmentParams::default()
    };
    c.bench_function("rx_50x50", |b| b.iter(|| rx_detect(&x, 1e-6).unwrap()));
    c.bench_function("segment_50x50_s25", |b| {
        b.iter(|| segment(&s.cube, &params).unwrap())
    });
    let (rx, _) = rx_detect(&x, 1e-6).unwrap();
    let labels = segment(&s.cube, &params).unwrap();
    c.bench_function("dictionary_50x50", |b| {
        b.iter(|| build_dictionary(&x, &labels, &rx, &Default::default()).unwrap())
    });
}

fn end_to_end(c: &mut Criterion) {
    let s = generate_scene(&scene(40)).unwrap();
    let params = PipelineParams {
        method: Method::Njcr,
        segmentation: SegmentParams {
            target_count: 20,
            ..SegmentParams::default()
        },
        ..PipelineParams::default()
    };
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    group.bench_function("njcr_40x40", |b| {
        b.iter(|| run_pipeline(&s.cube, &params).unwrap())
    });
    group.finish();
}

criterion_group!(benches, solvers, stages, end_to_end);
criterion_main!(benches);
