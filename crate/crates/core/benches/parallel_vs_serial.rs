//! Compares the data-parallel execution path against the sequential
//! fallback on the three hot loops: trajectory ensembles, outcome-pattern
//! projection, and the emission-window sweep.
//!
//! With `--no-default-features` the `exec::map_*` entry points are
//! themselves sequential, so the two sides of each comparison coincide;
//! the suite stays compilable to keep feature builds honest.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use herald_core::atom_cavity::SystemParams;
use herald_core::exec;
use herald_core::optics::SplitterAngle;
use herald_core::protocol::{emission_probability_p2, pattern_projection};
use herald_core::trajectories::simulate_trajectory;

fn params() -> SystemParams {
    SystemParams::balanced(10.0, 0.1, 1.0).unwrap()
}

fn all_patterns() -> Vec<[u8; 4]> {
    let mut patterns = Vec::with_capacity(35);
    for a in 0..=4u8 {
        for b in 0..=(4 - a) {
            for c in 0..=(4 - a - b) {
                patterns.push([a, b, c, 4 - a - b - c]);
            }
        }
    }
    patterns
}

fn bench_trajectories(c: &mut Criterion) {
    let p = params();
    let n = 4096usize;
    let mut group = c.benchmark_group("trajectory_ensemble");
    group.bench_with_input(BenchmarkId::new("parallel", n), &n, |bench, &n| {
        bench.iter(|| {
            exec::map_indexed(n, |i| {
                simulate_trajectory(&p, 0.2, 7, i as u64)
                    .unwrap()
                    .survived()
            })
        })
    });
    group.bench_with_input(BenchmarkId::new("serial", n), &n, |bench, &n| {
        bench.iter(|| {
            exec::map_indexed_sequential(n, |i| {
                simulate_trajectory(&p, 0.2, 7, i as u64)
                    .unwrap()
                    .survived()
            })
        })
    });
    group.finish();
}

fn bench_patterns(c: &mut Criterion) {
    let p = params();
    let angle = SplitterAngle::canonical();
    let patterns = all_patterns();
    let mut group = c.benchmark_group("pattern_projection");
    group.bench_function("parallel", |bench| {
        bench.iter(|| {
            exec::map_slice(black_box(&patterns), |pattern| {
                pattern_projection(&p, angle, *pattern).unwrap().norm_sq()
            })
        })
    });
    group.bench_function("serial", |bench| {
        bench.iter(|| {
            exec::map_slice_sequential(black_box(&patterns), |pattern| {
                pattern_projection(&p, angle, *pattern).unwrap().norm_sq()
            })
        })
    });
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let p = params();
    let taus: Vec<f64> = (0..1000).map(|i| 0.5 * i as f64 / 999.0).collect();
    let mut group = c.benchmark_group("window_sweep");
    group.bench_function("parallel", |bench| {
        bench.iter(|| {
            exec::map_slice(black_box(&taus), |tau| {
                emission_probability_p2(&p, &[*tau; 4]).unwrap()
            })
        })
    });
    group.bench_function("serial", |bench| {
        bench.iter(|| {
            exec::map_slice_sequential(black_box(&taus), |tau| {
                emission_probability_p2(&p, &[*tau; 4]).unwrap()
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bench_trajectories, bench_patterns, bench_sweep);
criterion_main!(benches);
