use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pefnn_bench::{model_config, random_field};
use pefnn_core::kernel::KernelMode;
use pefnn_core::net::{backward, Model, Tape};

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("model");
    g.sample_size(10);
    let u = random_field(4, 1, 64, 2);
    for (kernel, groups) in [(KernelMode::Dense, 1), (KernelMode::SingleRotation, 1), (KernelMode::MultipleRotation, 4)] {
        let label = format!("{kernel} g={groups}");
        let prepared = Model::new(model_config(kernel, groups, 12), 3).unwrap().prepare().unwrap();
        g.bench_with_input(BenchmarkId::new("predict 4x64^2", &label), &u, |b, u| {
            b.iter(|| prepared.predict(black_box(u)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("step + backward 4x64^2", &label), &u, |b, u| {
            b.iter(|| {
                let mut tape = Tape::new();
                let y = prepared.step(black_box(u), &mut tape).unwrap();
                backward(&mut tape, &y).unwrap()
            })
        });
    }
    let m = Model::new(model_config(KernelMode::SingleRotation, 1, 12), 4).unwrap();
    let latent = random_field(4, m.config.latent_channels(), 64, 5);
    g.bench_function("single layer 4x64^2", |b| b.iter(|| m.mc_fourier_layer(black_box(&latent), 0).unwrap()));
    g.finish();
}

criterion_group!(benches, network);
criterion_main!(benches);
