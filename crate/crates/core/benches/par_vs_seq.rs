//! Parallel vs sequential comparison of the two embarrassingly-parallel
//! hot paths: the feasibility scan and batch certificate scoring.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use agechemo::certificate::{assemble, canonical_scan_model, tothkot_recipe, CertInput};
use agechemo::equilibrium::solve_equilibrium;
use agechemo::model::toth_kot_assumption_b;
use agechemo::{indexed_map, indexed_map_seq};

fn scan_row(d: f64) -> bool {
    let (y, kt, l) = (2.0, 2.0, 1.0);
    let m = canonical_scan_model(y, kt, l, d, 1001);
    let eq = solve_equilibrium(&m).unwrap();
    tothkot_recipe(&m, &eq, y, kt, l).unwrap().is_feasible()
}

fn bench_scan(c: &mut Criterion) {
    let grid: Vec<f64> = (0..16).map(|i| 0.05 + 0.02 * i as f64).collect();
    let mut group = c.benchmark_group("feasibility_scan");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("parallel", grid.len()), &grid, |b, g| {
        b.iter(|| indexed_map(g.len(), |i| scan_row(g[i])))
    });
    group.bench_with_input(BenchmarkId::new("sequential", grid.len()), &grid, |b, g| {
        b.iter(|| indexed_map_seq(g.len(), |i| scan_row(g[i])))
    });
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let (y, kt, l, d) = (2.0, 0.5, 0.5, 1.0);
    let m = agechemo::model::toth_kot_model(y, kt, l, d, 2.0, 2001);
    let eq = solve_equilibrium(&m).unwrap();
    let data = toth_kot_assumption_b(y, kt, l, d, eq.theta);
    // A spread of inputs around the recipe point.
    let inputs: Vec<CertInput> = (0..64)
        .map(|i| {
            let s = 1.0 + 0.01 * i as f64;
            CertInput {
                sigma: 0.75 * s,
                epsilon: 0.2 / s,
                omega: 1.0,
                lambda: 0.0,
                r1: 1.0,
                r2: s,
                r3: 1.0,
                b: 0.05 / s,
                gamma: 0.8 * s,
                m: 1.5,
                f_bound: 8.0 * s,
            }
        })
        .collect();
    let score = |input: &CertInput| assemble(&m, &eq, &data, input).map(|c| c.lambda_min).unwrap_or(f64::NEG_INFINITY);
    let mut group = c.benchmark_group("certificate_scoring");
    group.bench_function("parallel", |b| {
        b.iter(|| indexed_map(inputs.len(), |i| score(&inputs[i])))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| indexed_map_seq(inputs.len(), |i| score(&inputs[i])))
    });
    group.finish();
}

criterion_group!(benches, bench_scan, bench_scoring);
criterion_main!(benches);
