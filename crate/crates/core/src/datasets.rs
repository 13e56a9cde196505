//! Batch generation of trajectory datasets from the reference solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{
    flood_solve, grf_sample, make_synthetic_dem, ns_solve, swe_dambreak_solve, Boundary, BoundaryKind, DemKind,
    FloodConfig, NsConfig, Rainfall, SweConfig,
};
use crate::trajectory::Trajectory;

/// Trajectory `i` of a run seeded with `seed` uses `seed + i`.
fn member_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

/// Navier-Stokes trajectories from independent GRF initial vorticities.
pub fn generate_ns(cfg: &NsConfig, count: usize) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    (0..count)
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = member_seed(cfg.seed, i);
            let w0 = grf_sample(&c.grf, c.n, c.seed);
            ns_solve(&w0, &c)
        })
        .collect()
}

/// Dam breaks with per-trajectory radii; a fixed `radius` gives identical
/// members.
pub fn generate_swe(cfg: &SweConfig, count: usize) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    (0..count)
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = member_seed(cfg.seed, i);
            swe_dambreak_solve(&c)
        })
        .collect()
}

/// Rain events over one synthetic terrain. Each member draws its intensity
/// and storm duration uniformly from the given ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloodDataConfig {
    pub dem: DemKind,
    pub n: usize,
    /// Cell size in meters.
    pub dx: f64,
    pub dem_seed: u64,
    pub manning: f64,
    /// Rain intensity range in mm/h.
    pub rain_mm_per_hour: (f64, f64),
    /// Storm duration range in seconds.
    pub rain_duration: (f64, f64),
    pub boundary: Boundary,
    pub theta: f64,
    pub alpha: f64,
    pub dt_max: f64,
    pub horizon: f64,
    pub record_interval: f64,
    pub seed: u64,
}

impl Default for FloodDataConfig {
    fn default() -> Self {
        FloodDataConfig {
            dem: DemKind::Valley,
            n: 64,
            dx: 30.0,
            dem_seed: 0,
            manning: 0.035,
            rain_mm_per_hour: (10.0, 60.0),
            rain_duration: (900.0, 2700.0),
            boundary: Boundary { west: BoundaryKind::FreeOutflow, ..Boundary::default() },
            theta: 0.7,
            alpha: 0.7,
            dt_max: 10.0,
            horizon: 3600.0,
            record_interval: 150.0,
            seed: 0,
        }
    }
}

impl FloodDataConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a >= 0.0 && a <= b && b.is_finite();
        if !ordered(self.rain_mm_per_hour) || !ordered(self.rain_duration) {
            return Err(Error::Config("flood: rain ranges must be ordered, non-negative (lo, hi) pairs".into()));
        }
        self.solver_config(0.0, 0.0).validate()
    }

    fn solver_config(&self, rate: f64, duration: f64) -> FloodConfig {
        let dem = make_synthetic_dem(self.dem, self.n, self.dem_seed);
        let mut c = FloodConfig::new(dem, self.dx, self.manning);
        c.rainfall = Rainfall::Uniform { rate, duration };
        c.boundary = self.boundary;
        c.theta = self.theta;
        c.alpha = self.alpha;
        c.dt_max = self.dt_max;
        c.horizon = self.horizon;
        c.record_interval = self.record_interval;
        c
    }

    /// Solver configuration of member `i`.
    pub fn member(&self, i: usize) -> FloodConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(member_seed(self.seed, i));
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let mm = draw(&mut rng, self.rain_mm_per_hour);
        let duration = draw(&mut rng, self.rain_duration);
        self.solver_config(mm / 3.6e6, duration)
    }
}

pub fn generate_flood(cfg: &FloodDataConfig, count: usize) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    (0..count).map(|i| flood_solve(&cfg.member(i)).map(|r| r.trajectory)).collect()
}
