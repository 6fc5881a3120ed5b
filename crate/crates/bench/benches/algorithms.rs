use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dissim_bench::instance;
use dissim_core::decomposition::{decompose_greedy, decompose_lll, tau_exact, EXACT_CAP};
use dissim_core::subsets::{nsim_exact, nsim_greedy_direct, nsim_greedy_kway, nsim_upper_grid};
use dissim_core::Order;
use std::hint::black_box;

fn decompositions(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    group.sample_size(10);
    let (ds, g) = instance(4096, 3);
    for k in [1usize, 4, 16] {
        group.bench_with_input(BenchmarkId::new("greedy", k), &k, |b, &k| {
            b.iter(|| decompose_greedy(&g, &ds, black_box(k), Order::Natural).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("lll", k), &k, |b, &k| {
            b.iter(|| decompose_lll(&g, &ds, black_box(k), 22.0, 5, 50 * ds.n()).unwrap())
        });
    }
    let (small, gs) = instance(12, 3);
    group.bench_function("exact_n12_k1", |b| {
        b.iter(|| tau_exact(&gs, &small, 1, EXACT_CAP).unwrap())
    });
    group.finish();
}

fn subsets(c: &mut Criterion) {
    let mut group = c.benchmark_group("nsim");
    group.sample_size(10);
    let (ds, g) = instance(4096, 3);
    for k in [1usize, 4] {
        group.bench_with_input(BenchmarkId::new("direct", k), &k, |b, &k| {
            b.iter(|| nsim_greedy_direct(&g, black_box(k), Order::Natural).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("kway", k), &k, |b, &k| {
            b.iter(|| nsim_greedy_kway(&g, black_box(k), 11).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("upper_grid", k), &k, |b, &k| {
            b.iter(|| nsim_upper_grid(&ds, black_box(k), g.r_n()).unwrap())
        });
    }
    let (_, gs) = instance(14, 3);
    group.bench_function("exact_n14_k2", |b| b.iter(|| nsim_exact(&gs, 2, EXACT_CAP).unwrap()));
    group.finish();
}

criterion_group!(benches, decompositions, subsets);
criterion_main!(benches);
