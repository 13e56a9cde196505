use ndarray::{Array2, Array4, Axis};
use pefnn_core::solvers::{
    flood_solve, grf_sample, grf_spectrum, make_synthetic_dem, ns_solve, swe_dambreak_solve, swe_initial_depth, Boundary,
    BoundaryKind, DemKind, FloodConfig, GrfConfig, Inflow, NsConfig, Rainfall, SweConfig,
};
use pefnn_core::tensor::{fft2, rot90_plane};
use pefnn_core::{Error, Field};
use std::f64::consts::PI;

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn plane(t: &pefnn_core::Trajectory, k: usize) -> Array2<f64> {
    t.slice(k).index_axis(Axis(0), 0).to_owned()
}

#[test]
fn grf_zero_mean_and_repeatable() {
    let cfg = GrfConfig::default();
    let a = grf_sample(&cfg, 64, 5);
    assert!(a.data.mean().unwrap().abs() < 1e-12);
    assert_eq!(a.data, grf_sample(&cfg, 64, 5).data);
    assert_ne!(a.data, grf_sample(&cfg, 64, 6).data);
}

fn loglog_slope(ks: &[f64], ps: &[f64]) -> f64 {
    let xs: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let ys: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

#[test]
fn grf_spectrum_follows_power_law() {
    let (n, cfg) = (128, GrfConfig::default());
    let shells = 40;
    let mut power = vec![0.0; shells + 1];
    let mut count = vec![0usize; shells + 1];
    for seed in 0..100 {
        let s = fft2(&grf_sample(&cfg, n, seed));
        for ((_, _, y, x), v) in s.data.indexed_iter() {
            let ky = if y <= n / 2 { y as f64 } else { y as f64 - n as f64 };
            let kx = if x <= n / 2 { x as f64 } else { x as f64 - n as f64 };
            let k = (ky * ky + kx * kx).sqrt().round() as usize;
            if k <= shells {
                power[k] += v.norm_sqr();
                count[k] += 1;
            }
        }
    }
    let ks: Vec<f64> = (3..=shells).map(|k| k as f64).collect();
    let emp: Vec<f64> = (3..=shells).map(|k| power[k] / count[k] as f64).collect();
    let law: Vec<f64> = ks.iter().map(|&k| grf_spectrum(&cfg, k)).collect();
    let (se, sl) = (loglog_slope(&ks, &emp), loglog_slope(&ks, &law));
    assert!(((se - sl) / sl).abs() < 0.1, "empirical {se}, prescribed {sl}");
}

fn ns_cfg(n: usize, horizon: f64, record_dt: f64, forcing: f64) -> NsConfig {
    NsConfig { n, horizon, record_dt, forcing, ..NsConfig::default() }
}

#[test]
fn ns_mean_vorticity_is_constant() {
    let cfg = ns_cfg(64, 2.0, 0.5, 0.1);
    let mut w0 = grf_sample(&cfg.grf, 64, 1);
    w0.data.mapv_inplace(|v| v + 0.25);
    let traj = ns_solve(&w0, &cfg).unwrap();
    assert_eq!(traj.len(), 5);
    let m0 = traj.slice(0).mean().unwrap();
    for k in 1..traj.len() {
        assert!((traj.slice(k).mean().unwrap() - m0).abs() < 1e-10);
    }
}

#[test]
fn ns_unforced_enstrophy_decreases() {
    let cfg = ns_cfg(64, 4.0, 0.25, 0.0);
    let w0 = grf_sample(&cfg.grf, 64, 2);
    let traj = ns_solve(&w0, &cfg).unwrap();
    let ens: Vec<f64> = (0..traj.len()).map(|k| traj.slice(k).mapv(|v| v * v).sum()).collect();
    for w in ens.windows(2) {
        assert!(w[1] <= w[0], "{ens:?}");
    }
}

#[test]
fn ns_eigenmode_decays_exponentially() {
    let n = 64;
    let cfg = ns_cfg(n, 1.0, 1.0, 0.0);
    let w0 = Field::new(Array4::from_shape_fn((1, 1, n, n), |(_, _, y, x)| {
        (2.0 * PI * x as f64 / n as f64).sin() * (2.0 * PI * y as f64 / n as f64).sin()
    }));
    let traj = ns_solve(&w0, &cfg).unwrap();
    let expect = w0.data.index_axis(Axis(0), 0).index_axis(Axis(0), 0).mapv(|v| v * (-8.0 * PI * PI * cfg.viscosity).exp());
    let err = norm(&(&plane(&traj, 1) - &expect)) / norm(&expect);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn ns_reports_blow_up() {
    let cfg = NsConfig { n: 16, horizon: 20.0, record_dt: 10.0, forcing: 0.0, dt_max: 1.0, cfl: 20.0, ..NsConfig::default() };
    let w0 = Field::new(grf_sample(&cfg.grf, 16, 3).data.mapv(|v| v * 100.0));
    assert!(matches!(ns_solve(&w0, &cfg), Err(Error::Instability(_))));
}

#[test]
fn swe_header_shape_and_radius() {
    let cfg = SweConfig { n: 16, refine: 2, seed: 9, ..SweConfig::default() };
    let r = cfg.resolved_radius();
    assert!(r > 0.3 && r < 0.7);
    let traj = swe_dambreak_solve(&cfg).unwrap();
    assert_eq!(traj.shape(), (25, 1, 16, 16));
    assert_eq!(traj, swe_dambreak_solve(&cfg).unwrap());
}

#[test]
fn swe_conserves_mass_and_symmetry() {
    let cfg = SweConfig { n: 32, refine: 2, radius: Some(0.55), ..SweConfig::default() };
    let traj = swe_dambreak_solve(&cfg).unwrap();
    let m0 = traj.slice(0).sum();
    for k in 0..traj.len() {
        let h = plane(&traj, k);
        assert!((h.sum() - m0).abs() / m0 < 1e-8);
        let asym = norm(&(&h - &rot90_plane(h.view(), 1))) / norm(&h);
        assert!(asym < 1e-6, "slice {k}: {asym}");
    }
}

#[test]
fn swe_lake_at_rest_stays_put() {
    let cfg = SweConfig { n: 16, refine: 1, radius: Some(0.0), ..SweConfig::default() };
    let traj = swe_dambreak_solve(&cfg).unwrap();
    for v in traj.data.iter() {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn swe_front_moves_no_faster_than_waves() {
    let cfg = SweConfig { n: 64, refine: 1, radius: Some(0.5), ..SweConfig::default() };
    let traj = swe_dambreak_solve(&cfg).unwrap();
    let n = cfg.n;
    let dx = traj.dx;
    let c = |i: usize| (i as f64 + 0.5 - n as f64 / 2.0) * dx;
    let h0 = swe_initial_depth(n, cfg.half_width, 0.5);
    let speed = (cfg.gravity * 2.0).sqrt();
    for k in 1..traj.len() {
        let t = traj.dt_record * k as f64;
        let h = plane(&traj, k);
        let front = h
            .indexed_iter()
            .filter(|&((i, j), v)| h0[[i, j]] == 1.0 && *v > 1.05)
            .map(|((i, j), _)| c(i).hypot(c(j)))
            .fold(0.0f64, f64::max);
        assert!(front <= 0.5 + speed * t + 2.0 * dx, "t={t}: front at {front}");
    }
}

fn lake(level: f64) -> FloodConfig {
    let dem = make_synthetic_dem(DemKind::Bowl, 32, 4);
    let mut cfg = FloodConfig::new(dem, 30.0, 0.03);
    cfg.initial_depth = cfg.dem.mapv(|z| (level - z).max(0.0));
    cfg
}

#[test]
fn flood_defaults() {
    let cfg = FloodConfig::new(Array2::zeros((4, 4)), 30.0, 0.03);
    assert_eq!((cfg.theta, cfg.alpha, cfg.h_dry), (0.7, 0.7, 1e-4));
    assert_eq!(cfg.record_interval, 30.0);
}

#[test]
fn flood_lake_at_rest_is_well_balanced() {
    let mut cfg = lake(1.5);
    cfg.horizon = 6000.0;
    cfg.record_interval = 600.0;
    let run = flood_solve(&cfg).unwrap();
    assert!(run.steps >= 1000, "{} steps", run.steps);
    let h0 = plane(&run.trajectory, 0);
    assert!(h0.iter().any(|&h| h == 0.0) && h0.iter().any(|&h| h > 1.0));
    for k in 1..run.trajectory.len() {
        let d = (&plane(&run.trajectory, k) - &h0).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(d < 1e-10, "{d}");
    }
    assert_eq!(run.clamped_volume, 0.0);
}

#[test]
fn flood_rain_mass_budget() {
    let mut cfg = lake(1.0);
    cfg.rainfall = Rainfall::Uniform { rate: 2e-5, duration: 900.0 };
    cfg.horizon = 1200.0;
    let run = flood_solve(&cfg).unwrap();
    let area = 32.0 * 32.0 * 900.0;
    let expect = run.initial_volume + 2e-5 * 900.0 * area;
    assert!((run.final_volume - expect).abs() / expect < 1e-6, "{} vs {expect}", run.final_volume);
    let last = plane(&run.trajectory, run.trajectory.len() - 1);
    assert!((last.sum() * 900.0 - expect).abs() / expect < 1e-6);
}

/// Rain-on-grid runoff collecting in a closed bowl, default scheme
/// coefficients against half the time step.
#[test]
fn flood_time_step_convergence() {
    let dem = make_synthetic_dem(DemKind::Bowl, 64, 5);
    let mut cfg = FloodConfig::new(dem, 30.0, 0.035);
    cfg.rainfall = Rainfall::Uniform { rate: 1e-5, duration: 3600.0 };
    cfg.horizon = 3600.0;
    cfg.dt_max = 60.0;
    let a = flood_solve(&cfg).unwrap();
    cfg.alpha /= 2.0;
    let b = flood_solve(&cfg).unwrap();
    assert!(b.steps > a.steps);
    let d = &a.trajectory.data - &b.trajectory.data;
    let change = (d.mapv(|v| v * v).sum() / a.trajectory.data.mapv(|v| v * v).sum()).sqrt();
    assert!(change < 0.01, "{change}");
}

#[test]
fn valley_drains_through_outflow_edge() {
    let dem = make_synthetic_dem(DemKind::Valley, 32, 6);
    let mut cfg = FloodConfig::new(dem, 30.0, 0.03);
    cfg.boundary = Boundary { west: BoundaryKind::FreeOutflow, ..Boundary::default() };
    cfg.rainfall = Rainfall::Uniform { rate: 2e-5, duration: 3600.0 };
    cfg.horizon = 3600.0;
    let run = flood_solve(&cfg).unwrap();
    assert!(run.outflow_volume > 0.0);
    let budget = run.initial_volume + run.rain_volume + run.inflow_volume - run.outflow_volume + run.clamped_volume;
    assert!((run.final_volume - budget).abs() / budget < 1e-9);
}

#[test]
fn piecewise_rain_and_inflow_are_budgeted() {
    let dem = make_synthetic_dem(DemKind::TwoRiver, 24, 7);
    let mut cfg = FloodConfig::new(dem, 30.0, 0.03);
    let frames = vec![Array2::from_elem((24, 24), 1e-5), Array2::zeros((24, 24)), Array2::from_elem((24, 24), 3e-5)];
    cfg.rainfall = Rainfall::Series { interval: 100.0, frames };
    cfg.inflows.push(Inflow { cells: vec![(12, 23)], series: vec![(0.0, 5.0)] });
    cfg.horizon = 600.0;
    let run = flood_solve(&cfg).unwrap();
    let area = 24.0 * 24.0 * 900.0;
    assert!((run.rain_volume - 4e-5 * 100.0 * area).abs() < 1e-6 * run.rain_volume);
    assert!((run.inflow_volume - 5.0 * 600.0).abs() < 1e-9);
    assert!(run.trajectory.data.iter().all(|&h| h >= 0.0));
}

#[test]
fn dem_shapes() {
    let bowl = make_synthetic_dem(DemKind::Bowl, 33, 1);
    let c = 16;
    for d in 0..c {
        assert!(bowl[[c, c + d + 1]] > bowl[[c, c + d]]);
        assert!(bowl[[c - d - 1, c]] > bowl[[c - d, c]]);
        assert!(bowl[[c + d + 1, c + d + 1]] > bowl[[c + d, c + d]]);
    }
    let min = bowl.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(min, bowl[[c, c]]);
    for kind in [DemKind::Valley, DemKind::Bowl, DemKind::TwoRiver] {
        assert_eq!(make_synthetic_dem(kind, 20, 3), make_synthetic_dem(kind, 20, 3));
    }
    assert_ne!(make_synthetic_dem(DemKind::Valley, 20, 3), make_synthetic_dem(DemKind::Valley, 20, 4));
}

#[test]
fn flood_rejects_bad_config() {
    let mut cfg = FloodConfig::new(Array2::zeros((4, 4)), 30.0, 0.03);
    cfg.theta = 0.0;
    assert!(matches!(flood_solve(&cfg), Err(Error::Config(_))));
}
