use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sparse_music::analysis::{mutual_coherence, ric_bruteforce};
use sparse_music::harness::run_trial;
use sparse_music::music::{decompose, imaging_function, RankRule};
use sparse_music::solvers::{bpdn_solve, omp_solve, BpdnOptions};
use sparse_music::spectral::{draw_model, exact_covariances, identify_frequencies};
use sparse_music_bench::{column_problem, config, instance};
use std::hint::black_box;

fn music(c: &mut Criterion) {
    let mut g = c.benchmark_group("music");
    for n in [20, 100] {
        let inst = instance(n, 10, 50, 0.1);
        g.bench_with_input(BenchmarkId::new("decompose", n), &inst, |b, inst| {
            b.iter(|| decompose(black_box(&inst.data.y), RankRule::Fixed(10)).unwrap())
        });
        let dec = decompose(&inst.data.y, RankRule::Fixed(10)).unwrap();
        g.bench_with_input(BenchmarkId::new("imaging_2500", n), &inst, |b, inst| {
            b.iter(|| imaging_function(black_box(&dec), &inst.pair).unwrap())
        });
    }
    let cfg = config(100, 10, 50, 1.0);
    g.sample_size(10);
    g.bench_function("trial_n100_s10", |b| b.iter(|| run_trial(black_box(&cfg), 1)));
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    let inst = instance(20, 5, 30, 0.0);
    let p = column_problem(&inst, 0.0);
    let opts = BpdnOptions { tol: 1e-6, max_iters: 200, ..Default::default() };
    g.bench_function("bpdn_column_20x900", |b| b.iter(|| bpdn_solve(black_box(&p), &opts).unwrap()));
    g.bench_function("omp_column_20x900", |b| b.iter(|| omp_solve(black_box(&p), 5).unwrap()));
    g.finish();
}

fn analysis(c: &mut Criterion) {
    let mut g = c.benchmark_group("analysis");
    let inst = instance(8, 2, 6, 0.0);
    let m = inst.pair.phi_ext.clone();
    g.bench_function("coherence_8x36", |b| b.iter(|| mutual_coherence(black_box(&m)).unwrap()));
    g.sample_size(10);
    g.bench_function("ric_bruteforce_8x36_order3", |b| b.iter(|| ric_bruteforce(black_box(&m), 3).unwrap()));
    let model = draw_model(64, 4, 24, 1, 0).unwrap();
    let tri = exact_covariances(&model, 1.0);
    g.bench_function("spectral_identify_64", |b| b.iter(|| identify_frequencies(&model, black_box(&tri)).unwrap()));
    g.finish();
}

criterion_group!(benches, music, solvers, analysis);
criterion_main!(benches);
