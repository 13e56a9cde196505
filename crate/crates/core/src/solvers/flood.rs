use ndarray::{Array2, Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Treatment of one domain edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    #[default]
    Closed,
    /// Critical-depth outflow, `q = h sqrt(g h)` leaving the domain.
    FreeOutflow,
}

/// Edges by compass direction: west is column 0, south is row 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Boundary {
    pub west: BoundaryKind,
    pub east: BoundaryKind,
    pub south: BoundaryKind,
    pub north: BoundaryKind,
}

/// Rainfall intensity in m/s.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Rainfall {
    #[default]
    None,
    /// Spatially uniform `rate` over `[0, duration)`.
    Uniform { rate: f64, duration: f64 },
    /// Piecewise-constant fields, frame `k` active over `[k interval, (k+1) interval)`.
    Series { interval: f64, frames: Vec<Array2<f64>> },
}

impl Rainfall {
    fn at(&self, t: f64, i: usize, j: usize) -> f64 {
        match self {
            Rainfall::None => 0.0,
            Rainfall::Uniform { rate, duration } => {
                if t < *duration {
                    *rate
                } else {
                    0.0
                }
            }
            Rainfall::Series { interval, frames } => {
                frames.get((t / interval).floor() as usize).map_or(0.0, |f| f[[i, j]])
            }
        }
    }

    /// Next time after `t` at which the intensity may change.
    fn next_change(&self, t: f64) -> f64 {
        match self {
            Rainfall::None => f64::INFINITY,
            Rainfall::Uniform { duration, .. } => {
                if t < *duration {
                    *duration
                } else {
                    f64::INFINITY
                }
            }
            Rainfall::Series { interval, frames } => {
                let k = (t / interval).floor() + 1.0;
                if (k as usize) <= frames.len() {
                    k * interval
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Prescribed discharge (m^3/s), shared evenly by `cells` through their
/// outer boundary face. `series` holds `(time, discharge)` knots,
/// interpolated linearly and held constant past either end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inflow {
    pub cells: Vec<(usize, usize)>,
    pub series: Vec<(f64, f64)>,
}

impl Inflow {
    pub fn discharge(&self, t: f64) -> f64 {
        let s = &self.series;
        match s.iter().position(|&(tk, _)| tk > t) {
            None => s.last().map_or(0.0, |p| p.1),
            Some(0) => s[0].1,
            Some(k) => {
                let ((t0, q0), (t1, q1)) = (s[k - 1], s[k]);
                q0 + (q1 - q0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloodConfig {
    /// Bed elevation in meters, `H x W`.
    pub dem: Array2<f64>,
    pub dx: f64,
    pub manning: Array2<f64>,
    pub initial_depth: Array2<f64>,
    pub rainfall: Rainfall,
    pub inflows: Vec<Inflow>,
    pub boundary: Boundary,
    pub theta: f64,
    pub alpha: f64,
    pub gravity: f64,
    pub h_dry: f64,
    pub dt_max: f64,
    pub horizon: f64,
    pub record_interval: f64,
}

impl FloodConfig {
    /// Dry start on `dem` with uniform roughness and the default scheme
    /// coefficients.
    pub fn new(dem: Array2<f64>, dx: f64, manning: f64) -> FloodConfig {
        let shape = dem.dim();
        FloodConfig {
            dem,
            dx,
            manning: Array2::from_elem(shape, manning),
            initial_depth: Array2::zeros(shape),
            rainfall: Rainfall::None,
            inflows: Vec::new(),
            boundary: Boundary::default(),
            theta: 0.7,
            alpha: 0.7,
            gravity: 9.81,
            h_dry: 1e-4,
            dt_max: 10.0,
            horizon: 3600.0,
            record_interval: 30.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("flood: {m}")));
        let shape = self.dem.dim();
        if shape.0 < 2 || shape.1 < 2 {
            return fail("grid must be at least 2x2");
        }
        if self.manning.dim() != shape || self.initial_depth.dim() != shape {
            return fail("manning and initial depth must match the DEM shape");
        }
        if !self.dem.iter().all(|v| v.is_finite()) {
            return fail("DEM must be finite");
        }
        if !self.manning.iter().all(|&n| n > 0.0) {
            return fail("Manning coefficient must be positive");
        }
        if !self.initial_depth.iter().all(|&h| h >= 0.0) {
            return fail("initial depth must be non-negative");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return fail("theta must lie in (0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail("alpha must lie in (0, 1]");
        }
        if !(self.dx > 0.0 && self.gravity > 0.0 && self.h_dry > 0.0 && self.dt_max > 0.0) {
            return fail("dx, gravity, h_dry and dt_max must be positive");
        }
        if !(self.record_interval > 0.0 && self.horizon >= self.record_interval) {
            return fail("record_interval must be positive and no longer than the horizon");
        }
        if let Rainfall::Series { interval, frames } = &self.rainfall {
            if !(*interval > 0.0) || frames.iter().any(|f| f.dim() != shape) {
                return fail("rainfall series needs a positive interval and DEM-shaped frames");
            }
        }
        for inflow in &self.inflows {
            if inflow.cells.is_empty() || inflow.series.is_empty() {
                return fail("inflow needs cells and a discharge series");
            }
            if inflow.cells.iter().any(|&(i, j)| i >= shape.0 || j >= shape.1) {
                return fail("inflow cell outside the grid");
            }
        }
        Ok(())
    }
}

/// Trajectory of depths plus the water budget of the run.
#[derive(Debug, Clone)]
pub struct FloodRun {
    pub trajectory: Trajectory,
    pub steps: usize,
    pub initial_volume: f64,
    pub final_volume: f64,
    pub rain_volume: f64,
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    /// Water added by clamping negative depths to zero.
    pub clamped_volume: f64,
}

struct Faces {
    /// `H x (W+1)`, positive eastwards.
    qx: Array2<f64>,
    /// `(H+1) x W`, positive northwards.
    qy: Array2<f64>,
}

fn face_update(cfg: &FloodConfig, q: f64, q_avg: f64, eta: (f64, f64), z: (f64, f64), n: f64, dt: f64) -> f64 {
    let h_f = eta.0.max(eta.1) - z.0.max(z.1);
    if h_f < cfg.h_dry {
        return 0.0;
    }
    let q_hat = cfg.theta * q + (1.0 - cfg.theta) * q_avg;
    let g = cfg.gravity;
    (q_hat - g * h_f * dt * (eta.1 - eta.0) / cfg.dx) / (1.0 + g * dt * n * n * q_hat.abs() / h_f.powf(7.0 / 3.0))
}

/// Scales every face draining a cell so that no cell loses more water in
/// one step than it holds; each face is scaled by its donor's factor, so the
/// update stays conservative.
fn limit_outflow(f: &mut Faces, h: &Array2<f64>, dt: f64, dx: f64) {
    let (ny, nx) = h.dim();
    let mut factor = Array2::from_elem((ny, nx), 1.0);
    for i in 0..ny {
        for j in 0..nx {
            let out = f.qx[[i, j + 1]].max(0.0) + (-f.qx[[i, j]]).max(0.0) + f.qy[[i + 1, j]].max(0.0) + (-f.qy[[i, j]]).max(0.0);
            let drained = out * dt / dx;
            if drained > h[[i, j]] {
                factor[[i, j]] = h[[i, j]] / drained;
            }
        }
    }
    for i in 0..ny {
        for j in 0..=nx {
            let q = f.qx[[i, j]];
            let donor = if q > 0.0 { j.checked_sub(1) } else { (j < nx).then_some(j) };
            if let Some(d) = donor {
                f.qx[[i, j]] = q * factor[[i, d]];
            }
        }
    }
    for i in 0..=ny {
        for j in 0..nx {
            let q = f.qy[[i, j]];
            let donor = if q > 0.0 { i.checked_sub(1) } else { (i < ny).then_some(i) };
            if let Some(d) = donor {
                f.qy[[i, j]] = q * factor[[d, j]];
            }
        }
    }
}

/// Local-inertial solve on a staggered grid: discharges on faces, depths at
/// cell centers. Records `h` every `record_interval` seconds.
pub fn flood_solve(cfg: &FloodConfig) -> Result<FloodRun> {
    cfg.validate()?;
    let (ny, nx) = cfg.dem.dim();
    let (z, dx, g) = (&cfg.dem, cfg.dx, cfg.gravity);
    let area = dx * dx;
    let mut h = cfg.initial_depth.clone();
    let mut f = Faces { qx: Array2::zeros((ny, nx + 1)), qy: Array2::zeros((ny + 1, nx)) };

    let records = (cfg.horizon / cfg.record_interval).round() as usize;
    let mut out = Array4::zeros((records + 1, 1, ny, nx));
    out.index_axis_mut(Axis(0), 0).index_axis_mut(Axis(0), 0).assign(&h);

    let initial_volume = h.sum() * area;
    let (mut rain_v, mut inflow_v, mut outflow_v, mut clamped_v) = (0.0, 0.0, 0.0, 0.0);
    let mut t = 0.0;
    let mut steps = 0;
    for r in 1..=records {
        let target = r as f64 * cfg.record_interval;
        while t < target - 1e-9 {
            let h_max = h.iter().fold(0.0f64, |m, &v| m.max(v));
            let mut dt = cfg.dt_max;
            if h_max > cfg.h_dry {
                dt = dt.min(cfg.alpha * dx / (g * h_max).sqrt());
            }
            // Spread the remaining interval evenly rather than truncating the
            // last step: a repeating short step destabilizes the
            // forward-backward update.
            let stop = target.min(cfg.rainfall.next_change(t));
            let remaining = stop - t;
            dt = remaining / (remaining / dt).ceil();

            let old = Faces { qx: f.qx.clone(), qy: f.qy.clone() };
            let eta = |i: usize, j: usize| h[[i, j]] + z[[i, j]];
            for i in 0..ny {
                for j in 1..nx {
                    let avg = 0.5 * (old.qx[[i, j - 1]] + old.qx[[i, j + 1]]);
                    let n = 0.5 * (cfg.manning[[i, j - 1]] + cfg.manning[[i, j]]);
                    f.qx[[i, j]] = face_update(cfg, old.qx[[i, j]], avg, (eta(i, j - 1), eta(i, j)), (z[[i, j - 1]], z[[i, j]]), n, dt);
                }
            }
            for i in 1..ny {
                for j in 0..nx {
                    let avg = 0.5 * (old.qy[[i - 1, j]] + old.qy[[i + 1, j]]);
                    let n = 0.5 * (cfg.manning[[i - 1, j]] + cfg.manning[[i, j]]);
                    f.qy[[i, j]] = face_update(cfg, old.qy[[i, j]], avg, (eta(i - 1, j), eta(i, j)), (z[[i - 1, j]], z[[i, j]]), n, dt);
                }
            }
            let critical = |d: f64| if d > cfg.h_dry { d * (g * d).sqrt() } else { 0.0 };
            let open = |k: BoundaryKind| k == BoundaryKind::FreeOutflow;
            for i in 0..ny {
                f.qx[[i, 0]] = if open(cfg.boundary.west) { -critical(h[[i, 0]]) } else { 0.0 };
                f.qx[[i, nx]] = if open(cfg.boundary.east) { critical(h[[i, nx - 1]]) } else { 0.0 };
            }
            for j in 0..nx {
                f.qy[[0, j]] = if open(cfg.boundary.south) { -critical(h[[0, j]]) } else { 0.0 };
                f.qy[[ny, j]] = if open(cfg.boundary.north) { critical(h[[ny - 1, j]]) } else { 0.0 };
            }
            limit_outflow(&mut f, &h, dt, dx);
            for i in 0..ny {
                outflow_v -= dt * dx * (f.qx[[i, 0]] - f.qx[[i, nx]]);
            }
            for j in 0..nx {
                outflow_v -= dt * dx * (f.qy[[0, j]] - f.qy[[ny, j]]);
            }

            for i in 0..ny {
                for j in 0..nx {
                    let div = (f.qx[[i, j + 1]] - f.qx[[i, j]] + f.qy[[i + 1, j]] - f.qy[[i, j]]) / dx;
                    let rain = cfg.rainfall.at(t, i, j);
                    rain_v += rain * dt * area;
                    h[[i, j]] += dt * (rain - div);
                }
            }
            for inflow in &cfg.inflows {
                let per_cell = inflow.discharge(t) / inflow.cells.len() as f64;
                for &(i, j) in &inflow.cells {
                    h[[i, j]] += dt * per_cell / area;
                    inflow_v += dt * per_cell;
                }
            }
            for v in h.iter_mut() {
                if *v < 0.0 {
                    clamped_v -= *v * area;
                    *v = 0.0;
                }
            }
            let volume = h.sum() * area;
            if clamped_v > 1e-6 * volume.max(f64::MIN_POSITIVE) {
                return Err(Error::NegativeDepth { clamped: clamped_v, limit: 1e-6 * volume });
            }
            if !h.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("flood depth at t = {t}")));
            }
            t += dt;
            steps += 1;
        }
        t = target;
        out.index_axis_mut(Axis(0), r).index_axis_mut(Axis(0), 0).assign(&h);
    }
    Ok(FloodRun {
        trajectory: Trajectory::new(out, cfg.record_interval, dx, dx, vec!["h".into()])?,
        steps,
        initial_volume,
        final_volume: h.sum() * area,
        rain_volume: rain_v,
        inflow_volume: inflow_v,
        outflow_volume: outflow_v,
        clamped_volume: clamped_v,
    })
}
