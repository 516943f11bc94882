use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hulm::{gradient_example, messages, predict_distribution};
use hulm_bench::fixture;

const DIM: usize = 13;
const CLASSES: usize = 10;

fn by_length(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward/T");
    for len in [50, 100, 200, 400] {
        let (theta, x, y) = fixture(len, 100, DIM, CLASSES);
        group.throughput(Throughput::Elements(len as u64));
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| b.iter(|| messages(&x, &y, &theta).unwrap()));
    }
    group.finish();
}

fn by_hidden(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward/H");
    for hidden in [25, 50, 100, 200] {
        let (theta, x, y) = fixture(100, hidden, DIM, CLASSES);
        group.throughput(Throughput::Elements(hidden as u64));
        group.bench_with_input(BenchmarkId::from_parameter(hidden), &hidden, |b, _| b.iter(|| messages(&x, &y, &theta).unwrap()));
    }
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let (theta, x, _) = fixture(100, 100, DIM, CLASSES);
    c.bench_function("predict_distribution/T100_H100_K10", |b| b.iter(|| predict_distribution(&x, &theta).unwrap()));
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient_example/T");
    for len in [50, 100, 200] {
        let (theta, x, y) = fixture(len, 100, DIM, CLASSES);
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |b, _| b.iter(|| gradient_example(&x, &y, &theta).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, by_length, by_hidden, prediction, gradient);
criterion_main!(benches);
