//! Criterion comparison of the data-parallel execution path against the
//! sequential fallback on the two dominant workloads: spectral Gaussian
//! ensemble sampling and drift estimation batches.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use polchinski::exec::{map_indexed, map_indexed_seq};
use polchinski::lattice::TorusGrid;
use polchinski::potential::{ModelKind, ModelParams, WickConvention};
use polchinski::renorm::grad_vt_estimate;
use polchinski::rng::derived_rng;
use polchinski::scales::{sample_gaussian, ScaleParams};

fn gff_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("gff-ensemble-64x64x256");
    let grid = TorusGrid::new(64).unwrap();
    let params = ScaleParams::new(1.0, grid).unwrap();
    let cov = params.c_hat_table(f64::INFINITY).unwrap();
    let replicas = 256usize;
    let work = |r: usize| {
        let mut rng = derived_rng(7, &[r as u64]);
        let f = sample_gaussian(grid, &cov, &mut rng).unwrap();
        f.values().iter().sum::<f64>()
    };
    group.bench_function(BenchmarkId::new("parallel", replicas), |b| {
        b.iter(|| map_indexed(replicas, work))
    });
    group.bench_function(BenchmarkId::new("sequential", replicas), |b| {
        b.iter(|| map_indexed_seq(replicas, work))
    });
    group.finish();
}

fn drift_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("drift-batch-16x16x8");
    group.sample_size(10);
    let grid = TorusGrid::new(16).unwrap();
    let params = ScaleParams::new(1.0, grid).unwrap();
    let mp = ModelParams::new(ModelKind::Liouville, std::f64::consts::PI, 1.0, params).unwrap();
    let cov = params.c_hat_table(f64::INFINITY).unwrap();
    let mut rng = derived_rng(9, &[]);
    let phi = sample_gaussian(grid, &cov, &mut rng).unwrap();
    let evals = 8usize;
    let work = |r: usize| {
        let mut rng = derived_rng(11, &[r as u64]);
        grad_vt_estimate(&phi, 0.5, &mp, WickConvention::EpsilonPower, 256, &mut rng)
            .unwrap()
            .ess
    };
    group.bench_function(BenchmarkId::new("parallel", evals), |b| {
        b.iter(|| map_indexed(evals, work))
    });
    group.bench_function(BenchmarkId::new("sequential", evals), |b| {
        b.iter(|| map_indexed_seq(evals, work))
    });
    group.finish();
}

criterion_group!(benches, gff_ensemble, drift_batch);
criterion_main!(benches);
