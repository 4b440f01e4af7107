use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spinsol::transforms::{apply, hilbert, Method, Operator};
use spinsol::{Domain, GridField, C64};

fn transforms(c: &mut Criterion) {
    let line = Domain::LineTruncated { half_width: 40.0 };
    let circle = Domain::Periodic { period: 7.0 };
    let f = GridField::from_scalar(line, 4096, |x| C64::new((-x * x).exp(), 0.0));
    let p = GridField::from_scalar(circle, 512, |x| C64::new((x * 0.9).cos().exp(), 0.0));
    let mut g = c.benchmark_group("transforms");
    g.sample_size(20);
    g.bench_function("hilbert_line_4096", |b| b.iter(|| hilbert(black_box(&f)).unwrap()));
    g.bench_function("hilbert_circle_512", |b| b.iter(|| hilbert(black_box(&p)).unwrap()));
    g.bench_function("t_quadrature_4096", |b| {
        b.iter(|| apply(Operator::T { delta: 1.0 }, black_box(&f), Method::Quadrature).unwrap())
    });
    g.bench_function("t_spectral_4096", |b| {
        b.iter(|| apply(Operator::T { delta: 1.0 }, black_box(&f), Method::Spectral).unwrap())
    });
    g.finish();
}

criterion_group!(benches, transforms);
criterion_main!(benches);
