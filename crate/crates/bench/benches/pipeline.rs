use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lodrefine::evaluation::c2m;
use lodrefine::pipeline::{prepare, refine, PipelineConfig};
use lodrefine::selection::{build_problem, solve};
use lodrefine::synth::{random_facade_fixture, shifted_facade_box};

fn end_to_end(c: &mut Criterion) {
    let fx = shifted_facade_box(1);
    let cfg = PipelineConfig::default();
    c.bench_function("refine_shifted_box", |b| {
        b.iter(|| refine(black_box(&fx.model), black_box(&fx.cloud), &cfg).unwrap())
    });
}

fn stages(c: &mut Criterion) {
    let fx = random_facade_fixture(1, 0.005, 7);
    let cfg = PipelineConfig::default();
    let prepared = prepare(&[&fx.model], &fx.cloud, &cfg).unwrap();
    c.bench_function("prepare_candidates", |b| {
        b.iter(|| prepare(&[black_box(&fx.model)], black_box(&fx.cloud), &cfg).unwrap())
    });
    let problem = build_problem(&prepared.candidates, &cfg.selection).unwrap();
    c.bench_function("solve_selection", |b| b.iter(|| solve(black_box(&problem), 60.0)));
    c.bench_function("c2m_coarse_model", |b| {
        b.iter(|| c2m(black_box(&fx.cloud.points), black_box(&fx.model.faces), false).unwrap())
    });
}

criterion_group!(benches, end_to_end, stages);
criterion_main!(benches);
