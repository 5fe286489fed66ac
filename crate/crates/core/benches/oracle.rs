//! Compares sequential and rayon-parallel frontier expansion of the
//! brute-force state-space enumeration.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use dpncheck_core::oracle::{enumerate_state_space_with, DomainBox, ExecMode};
use dpncheck_core::samples;

fn bench_enumeration(c: &mut Criterion) {
    let auction = samples::auction();
    let fines = samples::road_fines();
    let auction_box = DomainBox::from_range(-2, 2);
    let fines_box = DomainBox::from_range(0, 1);

    let mut group = c.benchmark_group("oracle_enumeration");
    group.sample_size(20);
    group.bench_function("auction_sequential", |b| {
        b.iter(|| {
            black_box(
                enumerate_state_space_with(
                    &auction,
                    &auction_box,
                    1,
                    1_000_000,
                    ExecMode::Sequential,
                )
                .unwrap(),
            )
        })
    });
    #[cfg(feature = "parallel")]
    group.bench_function("auction_parallel", |b| {
        b.iter(|| {
            black_box(
                enumerate_state_space_with(
                    &auction,
                    &auction_box,
                    1,
                    1_000_000,
                    ExecMode::Parallel,
                )
                .unwrap(),
            )
        })
    });
    group.bench_function("road_fines_sequential", |b| {
        b.iter(|| {
            black_box(
                enumerate_state_space_with(&fines, &fines_box, 1, 1_000_000, ExecMode::Sequential)
                    .unwrap(),
            )
        })
    });
    #[cfg(feature = "parallel")]
    group.bench_function("road_fines_parallel", |b| {
        b.iter(|| {
            black_box(
                enumerate_state_space_with(&fines, &fines_box, 1, 1_000_000, ExecMode::Parallel)
                    .unwrap(),
            )
        })
    });
    group.finish();
}

criterion_group!(benches, bench_enumeration);
criterion_main!(benches);
