use std::hint::black_box;

use conereach::lti::expm;
use conereach::SolverOptions;
use conereach_bench::toy_problem;
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{dmatrix, dvector};

fn bench_expm(c: &mut Criterion) {
    let a = dmatrix![1.0, 2.0, 0.0; 1.0, -1.0, 2.0; 1.0, 1.0, -1.0];
    c.bench_function("expm_3x3", |b| b.iter(|| expm(black_box(&a), 0.37).unwrap()));
}

fn bench_eval_j(c: &mut Criterion) {
    let prob = toy_problem(2000);
    let p = dvector![0.3, -1.2, 0.8];
    c.bench_function("eval_j_toy_n2000", |b| b.iter(|| prob.eval_j(black_box(&p))));
    c.bench_function("subgrad_j_toy_n2000", |b| b.iter(|| prob.subgrad_j(black_box(&p))));
}

fn bench_minimize(c: &mut Criterion) {
    let prob = toy_problem(2000);
    let opts = SolverOptions {
        n_restarts: 0,
        ..SolverOptions::default()
    };
    let mut group = c.benchmark_group("minimize");
    group.sample_size(10);
    group.bench_function("toy_n2000_single_start", |b| b.iter(|| prob.minimize_j(&opts).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_expm, bench_eval_j, bench_minimize);
criterion_main!(benches);
