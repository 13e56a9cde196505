use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pefnn_bench::random_field;
use pefnn_core::tensor::{fft2, forward_block, ifft2_real_part};

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft2");
    for n in [32, 64, 128] {
        let f = random_field(4, 10, n, 1);
        g.bench_with_input(BenchmarkId::new("forward", n), &f, |b, f| b.iter(|| fft2(black_box(f))));
        let s = fft2(&f);
        g.bench_with_input(BenchmarkId::new("inverse", n), &s, |b, s| b.iter(|| ifft2_real_part(black_box(s))));
        let plane = f.data.slice(ndarray::s![0, 0, .., ..]).to_owned();
        g.bench_with_input(BenchmarkId::new("plane to block m=12", n), &plane, |b, p| {
            b.iter(|| forward_block(black_box(p.view()), 12))
        });
    }
    g.finish();
}

criterion_group!(benches, transforms);
criterion_main!(benches);
