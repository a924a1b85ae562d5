//! Rayon's global pool against a one-thread pool on the same build.
//!
//! Build with `--no-default-features` to time the plain sequential code path;
//! both groups then run identical single-threaded loops.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

use lewisrows::generate::gaussian_matrix;
use lewisrows::iterative::lewis_iterate;
use lewisrows::linalg::leverage_scores_exact;
use lewisrows::verify::distortion_estimate;
use lewisrows::{Matrix, WeightVector};

const SHAPES: [(usize, usize); 2] = [(20_000, 10), (100_000, 20)];

fn single_thread() -> ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()
}

/// Runs `f` once under the global pool and once under a one-thread pool.
fn compare<F>(c: &mut Criterion, name: &str, f: F)
where
    F: Fn(&Matrix) + Sync,
{
    let one = single_thread();
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    for (n, d) in SHAPES {
        let a = gaussian_matrix(n, d, 1);
        let label = format!("{n}x{d}");
        group.bench_with_input(BenchmarkId::new("parallel", &label), &a, |b, a| b.iter(|| f(a)));
        group.bench_with_input(BenchmarkId::new("sequential", &label), &a, |b, a| {
            b.iter(|| one.install(|| f(a)))
        });
    }
    group.finish();
}

fn leverage(c: &mut Criterion) {
    compare(c, "leverage", |a| {
        black_box(leverage_scores_exact(a).unwrap());
    });
}

fn lewis_step(c: &mut Criterion) {
    compare(c, "lewis_iterate_p1", |a| {
        let w = WeightVector::ones(a.rows());
        black_box(lewis_iterate(a, 1.0, 1.0, &w, 0).unwrap());
    });
}

fn distortion(c: &mut Criterion) {
    compare(c, "distortion_200_dirs", |a| {
        let half: Vec<usize> = (0..a.rows()).step_by(2).collect();
        let s = a.select_rows(&half).unwrap().scaled(2.0).unwrap();
        black_box(distortion_estimate(a, &s, 1.0, 200, 0).unwrap());
    });
}

criterion_group!(benches, leverage, lewis_step, distortion);
criterion_main!(benches);
