use ndarray::{Array2, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

const DRY: f64 = 1e-8;

/// Radial dam break on `[-L, L]^2` with flat bed and reflective walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweConfig {
    /// Recorded grid size.
    pub n: usize,
    /// Solve on an `n * refine` grid and block-average down to `n`.
    pub refine: usize,
    pub half_width: f64,
    pub gravity: f64,
    pub t_end: f64,
    /// Recorded slices including the initial one, evenly spaced over `[0, t_end]`.
    pub records: usize,
    /// Dam radius; drawn from `(0.3, 0.7)` with `seed` when absent.
    pub radius: Option<f64>,
    pub cfl: f64,
    pub seed: u64,
}

impl Default for SweConfig {
    fn default() -> Self {
        SweConfig { n: 32, refine: 4, half_width: 2.5, gravity: 1.0, t_end: 1.0, records: 25, radius: None, cfl: 0.4, seed: 0 }
    }
}

impl SweConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 2
            && self.refine >= 1
            && self.half_width > 0.0
            && self.gravity > 0.0
            && self.t_end > 0.0
            && self.records >= 2
            && self.cfl > 0.0
            && self.cfl <= 0.5
            && self.radius.is_none_or(|r| r >= 0.0);
        if !ok {
            return Err(Error::Config("swe: invalid grid, horizon, cfl (0, 0.5] or radius".into()));
        }
        Ok(())
    }

    pub fn resolved_radius(&self) -> f64 {
        self.radius.unwrap_or_else(|| ChaCha8Rng::seed_from_u64(self.seed).random_range(0.3..0.7))
    }
}

/// Depth 2 inside the dam radius, 1 outside, at the centers of an `n x n`
/// grid on `[-half_width, half_width]^2`.
pub fn swe_initial_depth(n: usize, half_width: f64, radius: f64) -> Array2<f64> {
    let dx = 2.0 * half_width / n as f64;
    // (i + 1/2 - n/2) is exactly antisymmetric, so the grid is too.
    let c = |i: usize| (i as f64 + 0.5 - n as f64 / 2.0) * dx;
    Array2::from_shape_fn((n, n), |(i, j)| if c(i).hypot(c(j)) < radius { 2.0 } else { 1.0 })
}

type State = [Array2<f64>; 3];

/// Rusanov flux across a face normal to the first momentum component;
/// `(h, m, t)` are depth, normal and tangential discharge.
#[inline]
fn rusanov(g: f64, l: (f64, f64, f64), r: (f64, f64, f64)) -> (f64, f64, f64) {
    let flux = |(h, m, t): (f64, f64, f64)| {
        let u = m / h;
        (m, m * u + 0.5 * g * h * h, t * u)
    };
    let a = (l.1 / l.0).abs().max((r.1 / r.0).abs()) + (g * l.0.max(r.0)).sqrt();
    let (fl, fr) = (flux(l), flux(r));
    (
        0.5 * (fl.0 + fr.0) - 0.5 * a * (r.0 - l.0),
        0.5 * (fl.1 + fr.1) - 0.5 * a * (r.1 - l.1),
        0.5 * (fl.2 + fr.2) - 0.5 * a * (r.2 - l.2),
    )
}

fn step(u: &mut State, g: f64, dt: f64, dx: f64) {
    let (ny, nx) = u[0].dim();
    let mut du: State = [Array2::zeros((ny, nx)), Array2::zeros((ny, nx)), Array2::zeros((ny, nx))];
    let lam = dt / dx;
    // x faces: normal momentum hu, tangential hv. A wall mirrors the normal
    // component.
    for i in 0..ny {
        for j in 0..=nx {
            let cell = |j: usize| (u[0][[i, j]], u[1][[i, j]], u[2][[i, j]]);
            let (l, r) = match j {
                0 => {
                    let c = cell(0);
                    ((c.0, -c.1, c.2), c)
                }
                _ if j == nx => {
                    let c = cell(nx - 1);
                    (c, (c.0, -c.1, c.2))
                }
                _ => (cell(j - 1), cell(j)),
            };
            let f = rusanov(g, l, r);
            if j > 0 {
                du[0][[i, j - 1]] -= lam * f.0;
                du[1][[i, j - 1]] -= lam * f.1;
                du[2][[i, j - 1]] -= lam * f.2;
            }
            if j < nx {
                du[0][[i, j]] += lam * f.0;
                du[1][[i, j]] += lam * f.1;
                du[2][[i, j]] += lam * f.2;
            }
        }
    }
    // y faces: normal momentum hv, tangential hu.
    for i in 0..=ny {
        for j in 0..nx {
            let cell = |i: usize| (u[0][[i, j]], u[2][[i, j]], u[1][[i, j]]);
            let (l, r) = match i {
                0 => {
                    let c = cell(0);
                    ((c.0, -c.1, c.2), c)
                }
                _ if i == ny => {
                    let c = cell(ny - 1);
                    (c, (c.0, -c.1, c.2))
                }
                _ => (cell(i - 1), cell(i)),
            };
            let f = rusanov(g, l, r);
            if i > 0 {
                du[0][[i - 1, j]] -= lam * f.0;
                du[2][[i - 1, j]] -= lam * f.1;
                du[1][[i - 1, j]] -= lam * f.2;
            }
            if i < ny {
                du[0][[i, j]] += lam * f.0;
                du[2][[i, j]] += lam * f.1;
                du[1][[i, j]] += lam * f.2;
            }
        }
    }
    for (a, d) in u.iter_mut().zip(du) {
        *a += &d;
    }
}

fn block_average(h: &Array2<f64>, f: usize) -> Array2<f64> {
    let (ny, nx) = h.dim();
    let mut out = Array2::zeros((ny / f, nx / f));
    for ((i, j), v) in h.indexed_iter() {
        out[[i / f, j / f]] += v;
    }
    out / (f * f) as f64
}

/// First-order finite-volume solve; records depth `h` on the coarse grid.
pub fn swe_dambreak_solve(cfg: &SweConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let fine = cfg.n * cfg.refine;
    let dx = 2.0 * cfg.half_width / fine as f64;
    let g = cfg.gravity;
    let h0 = swe_initial_depth(fine, cfg.half_width, cfg.resolved_radius());
    let mut u: State = [h0, Array2::zeros((fine, fine)), Array2::zeros((fine, fine))];

    let mut out = Array4::zeros((cfg.records, 1, cfg.n, cfg.n));
    out.index_axis_mut(Axis(0), 0).index_axis_mut(Axis(0), 0).assign(&block_average(&u[0], cfg.refine));
    let mut t = 0.0;
    for r in 1..cfg.records {
        let target = cfg.t_end * r as f64 / (cfg.records - 1) as f64;
        while t < target - 1e-12 {
            let mut speed: f64 = 0.0;
            for ((h, hu), hv) in u[0].iter().zip(&u[1]).zip(&u[2]) {
                let c = (g * h).sqrt();
                speed = speed.max((hu / h).abs() + c).max((hv / h).abs() + c);
            }
            let dt = (cfg.cfl * dx / speed).min(target - t);
            step(&mut u, g, dt, dx);
            t += dt;
            let hmin = u[0].iter().fold(f64::INFINITY, |m, &v| m.min(v));
            if !(hmin >= DRY) {
                return Err(Error::DryCell { h: hmin });
            }
        }
        t = target;
        out.index_axis_mut(Axis(0), r).index_axis_mut(Axis(0), 0).assign(&block_average(&u[0], cfg.refine));
    }
    let dx_out = 2.0 * cfg.half_width / cfg.n as f64;
    Trajectory::new(out, cfg.t_end / (cfg.records - 1) as f64, dx_out, dx_out, vec!["h".into()])
}
