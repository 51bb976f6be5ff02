use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mixnorm_bench::{bump, coupling_map, square};
use mixnorm_core::operators::CompositionOperator;
use mixnorm_core::{hardy_apply, mixed_norm, product_apply, DomainMask, ExponentVector, GridOperator, KernelSet};

fn bench_mixed_norm(c: &mut Criterion) {
    let p = ExponentVector::new(vec![2.0, 3.0]).unwrap();
    let mut group = c.benchmark_group("mixed_norm");
    for &m in &[250, 1000] {
        let f = bump(&square("y", m));
        group.throughput(Throughput::Elements((m * m) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &f, |b, f| b.iter(|| mixed_norm(f, &p).unwrap()));
    }
    group.finish();
}

fn bench_hardy(c: &mut Criterion) {
    let mut group = c.benchmark_group("hardy_apply");
    for &m in &[250, 1000] {
        let f = bump(&square("x", m));
        group.throughput(Throughput::Elements((m * m) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &f, |b, f| b.iter(|| hardy_apply(f).unwrap()));
    }
    group.finish();
}

fn bench_product(c: &mut Criterion) {
    let kernels = KernelSet::parse(&["exp(-x1*y1)", "1 + x1*x2*y2"]).unwrap();
    let mut group = c.benchmark_group("product_apply");
    for &m in &[50, 150] {
        let f = bump(&square("y", m));
        let x = square("x", m);
        let mask = DomainMask::full(x.shape());
        group.throughput(Throughput::Elements((m * m) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &f, |b, f| {
            b.iter(|| product_apply(&kernels, f, &x, &mask).unwrap())
        });
    }
    group.finish();
}

fn bench_pullback(c: &mut Criterion) {
    let mut group = c.benchmark_group("pullback");
    for &m in &[250, 1000] {
        let map = coupling_map(m);
        let target = square("y", m);
        group.throughput(Throughput::Elements((m * m) as u64));
        group.bench_function(BenchmarkId::new("plan", m), |b| {
            b.iter(|| CompositionOperator::triangular(&map, target.clone()).unwrap())
        });
        let op = CompositionOperator::triangular(&map, target.clone()).unwrap();
        let f = bump(&target);
        group.bench_function(BenchmarkId::new("apply", m), |b| b.iter(|| op.apply(&f).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_mixed_norm, bench_hardy, bench_product, bench_pullback);
criterion_main!(benches);
