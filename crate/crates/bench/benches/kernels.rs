use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spinsol::{KernelCase, C64};

fn kernels(c: &mut Criterion) {
    let cases = [
        ("rational", KernelCase::rational()),
        ("trigonometric", KernelCase::trigonometric(7.0).unwrap()),
        ("hyperbolic", KernelCase::hyperbolic(1.0).unwrap()),
    ];
    let zs: Vec<C64> = (0..256).map(|k| C64::new(-3.0 + 0.023 * k as f64, 0.4 + 0.001 * k as f64)).collect();
    let mut g = c.benchmark_group("alpha_jet");
    for (name, case) in cases {
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut acc = C64::default();
                for z in &zs {
                    acc += case.alpha_jet(black_box(*z)).unwrap()[2];
                }
                acc
            })
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
