use std::hint::black_box;

use alchemist_core::layout::{even_partitioning, plan_transfer, DistPair, Layout, ProcessGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn owner_lookup(c: &mut Criterion) {
    let grid = ProcessGrid::make(10, None).unwrap();
    let mut group = c.benchmark_group("owner");
    for pair in [DistPair::MC_MR, DistPair::VC_STAR, DistPair::STAR_VR] {
        let layout = Layout::new(grid, pair);
        group.bench_with_input(BenchmarkId::from_parameter(pair), &layout, |b, layout| {
            b.iter(|| {
                let mut acc = 0;
                for i in 0..100 {
                    for j in 0..100 {
                        acc += layout.owner(black_box(i), black_box(j));
                    }
                }
                acc
            })
        });
    }
    group.finish();
}

fn transfer_plan(c: &mut Criterion) {
    let grid = ProcessGrid::make(16, None).unwrap();
    let parts = even_partitioning(100_000, 32);
    let mut group = c.benchmark_group("plan_transfer");
    for pair in [DistPair::MC_MR, DistPair::VC_STAR, DistPair::STAR_VC] {
        let layout = Layout::new(grid, pair);
        group.bench_with_input(BenchmarkId::from_parameter(pair), &layout, |b, layout| {
            b.iter(|| plan_transfer(&parts, layout, 100_000, 1000, 8, black_box(1 << 20)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, owner_lookup, transfer_plan);
criterion_main!(benches);
