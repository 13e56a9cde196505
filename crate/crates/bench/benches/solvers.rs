use criterion::{criterion_group, criterion_main, Criterion};
use pefnn_core::solvers::{
    flood_solve, grf_sample, make_synthetic_dem, ns_solve, swe_dambreak_solve, DemKind, FloodConfig, NsConfig, Rainfall,
    SweConfig,
};

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);

    let ns = NsConfig { horizon: 1.0, ..NsConfig::default() };
    let w0 = grf_sample(&ns.grf, ns.n, 0);
    g.bench_function("ns 64^2, t = 1", |b| b.iter(|| ns_solve(&w0, &ns).unwrap()));

    let swe = SweConfig::default();
    g.bench_function("swe dam break 32^2 (x4)", |b| b.iter(|| swe_dambreak_solve(&swe).unwrap()));

    let mut flood = FloodConfig::new(make_synthetic_dem(DemKind::Valley, 64, 0), 30.0, 0.035);
    flood.rainfall = Rainfall::Uniform { rate: 1e-5, duration: 900.0 };
    flood.horizon = 900.0;
    flood.record_interval = 300.0;
    g.bench_function("flood 64^2, 15 min rain", |b| b.iter(|| flood_solve(&flood).unwrap()));
    g.finish();
}

criterion_group!(benches, solvers);
criterion_main!(benches);
