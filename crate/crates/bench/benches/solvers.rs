use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use robustz_bench::{dense_instance, scaling_instance};
use robustz_core::{build_sorted_list, greedy_max, greedy_min, hungarian_min, Case, Solver};
use std::hint::black_box;

fn greedy(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy");
    for nnz in [10_000usize, 20_000, 40_000, 80_000] {
        let d = scaling_instance(nnz, 1);
        let list = build_sorted_list(&d);
        group.throughput(Throughput::Elements(d.nnz() as u64));
        group.bench_with_input(BenchmarkId::new("min_case2", nnz), &list, |b, l| {
            b.iter(|| greedy_min(black_box(l), 200, Case::Case2))
        });
        group.bench_with_input(BenchmarkId::new("max_case1", nnz), &list, |b, l| {
            b.iter(|| greedy_max(black_box(l), 200, Case::Case1))
        });
    }
    group.finish();
}

fn full_test(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_test");
    group.sample_size(10);
    for nnz in [10_000usize, 20_000, 40_000, 80_000] {
        let d = scaling_instance(nnz, 2);
        group.throughput(Throughput::Elements(d.nnz() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(nnz), &d, |b, d| {
            b.iter(|| {
                Solver::new(black_box(d))
                    .unwrap()
                    .run_test(200, 0.05)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn hungarian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hungarian");
    group.sample_size(10);
    for k in [50usize, 100, 200, 400] {
        let d = dense_instance(k, 3);
        group.bench_with_input(BenchmarkId::from_parameter(k), &d, |b, d| {
            b.iter(|| hungarian_min(black_box(d)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, greedy, full_test, hungarian);
criterion_main!(benches);
