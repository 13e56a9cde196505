use std::f64::consts::PI;

use ndarray::{Array2, Array4, Axis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{wavenumber, GrfConfig};
use crate::error::{Error, Result};
use crate::tensor::{fft2_plane, ifft2_plane, Field};
use crate::trajectory::Trajectory;

const BLOW_UP: f64 = 1e6;

/// 2D incompressible Navier-Stokes in vorticity form on the periodic unit
/// square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsConfig {
    pub n: usize,
    pub viscosity: f64,
    /// Simulated time after the initial slice.
    pub horizon: f64,
    pub record_dt: f64,
    /// Amplitude `A` of the forcing `A (sin 2pi(x+y) + cos 2pi(x+y))`.
    pub forcing: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub grf: GrfConfig,
    pub seed: u64,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            n: 64,
            viscosity: 1e-3,
            horizon: 50.0,
            record_dt: 1.0,
            forcing: 0.1,
            cfl: 0.5,
            dt_max: 1e-2,
            grf: GrfConfig::default(),
            seed: 0,
        }
    }
}

impl NsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 4
            && self.viscosity > 0.0
            && self.horizon > 0.0
            && self.record_dt > 0.0
            && self.cfl > 0.0
            && self.dt_max > 0.0
            && self.forcing.is_finite();
        if !ok {
            return Err(Error::Config("ns: need n >= 4 and positive viscosity, horizon, record_dt, cfl, dt_max".into()));
        }
        Ok(())
    }

    pub fn records(&self) -> usize {
        (self.horizon / self.record_dt).round() as usize
    }
}

struct Spectral {
    kx: Vec<f64>,
    /// `4 pi^2 |k|^2`, the symbol of `-Laplacian`.
    lap: Array2<f64>,
    dealias: Array2<f64>,
    forcing: Array2<Complex64>,
}

impl Spectral {
    fn new(cfg: &NsConfig) -> Spectral {
        let n = cfg.n;
        let kx: Vec<f64> = (0..n).map(|i| wavenumber(i, n)).collect();
        let lap = Array2::from_shape_fn((n, n), |(y, x)| 4.0 * PI * PI * (kx[y] * kx[y] + kx[x] * kx[x]));
        let cut = 2.0 / 3.0 * (n / 2) as f64;
        let dealias = Array2::from_shape_fn((n, n), |(y, x)| if kx[y].abs() <= cut && kx[x].abs() <= cut { 1.0 } else { 0.0 });
        let f = Array2::from_shape_fn((n, n), |(y, x)| {
            let s = 2.0 * PI * (x as f64 + y as f64) / n as f64;
            cfg.forcing * (s.sin() + s.cos())
        });
        Spectral { kx, lap, dealias, forcing: fft2_plane(f.view()) }
    }

    fn derivative(&self, wh: &Array2<Complex64>, dx: f64, dy: f64, scale_by_lap: bool) -> Array2<f64> {
        let mut d = wh.clone();
        for ((y, x), v) in d.indexed_iter_mut() {
            let l = self.lap[[y, x]];
            let inv = if scale_by_lap { if l > 0.0 { 1.0 / l } else { 0.0 } } else { 1.0 };
            *v *= Complex64::new(0.0, 2.0 * PI * (dx * self.kx[x] + dy * self.kx[y])) * inv;
        }
        ifft2_plane(d.view()).mapv(|c| c.re)
    }

    /// Velocity `(u, v) = (d psi/dy, -d psi/dx)` with `-Lap psi = w`.
    fn velocity(&self, wh: &Array2<Complex64>) -> (Array2<f64>, Array2<f64>) {
        (self.derivative(wh, 0.0, 1.0, true), self.derivative(wh, -1.0, 0.0, true))
    }

    /// Dealiased spectrum of `u . grad w`, without its mean.
    fn advection(&self, wh: &Array2<Complex64>) -> Array2<Complex64> {
        let (u, v) = self.velocity(wh);
        let wx = self.derivative(wh, 1.0, 0.0, false);
        let wy = self.derivative(wh, 0.0, 1.0, false);
        let nl = &u * &wx + &v * &wy;
        let mut nh = fft2_plane(nl.view());
        Zip::from(&mut nh).and(&self.dealias).for_each(|a, &m| *a *= m);
        nh[[0, 0]] = Complex64::new(0.0, 0.0);
        nh
    }

    /// Explicit advection and forcing, Crank-Nicolson diffusion.
    fn euler_cn(&self, wh: &Array2<Complex64>, dt: f64, nu: f64) -> Array2<Complex64> {
        let nh = self.advection(wh);
        let mut out = wh.clone();
        Zip::from(&mut out).and(&nh).and(&self.forcing).and(&self.lap).for_each(|w, &a, &f, &l| {
            let h = 0.5 * dt * nu * l;
            *w = (*w * (1.0 - h) + (f - a) * dt) / (1.0 + h);
        });
        out
    }

    fn max_speed(&self, wh: &Array2<Complex64>) -> f64 {
        let (u, v) = self.velocity(wh);
        u.iter().chain(v.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

fn check_peak(wh: &Array2<Complex64>, t: f64) -> Result<Array2<f64>> {
    let w = ifft2_plane(wh.view()).mapv(|c| c.re);
    let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak <= BLOW_UP) {
        return Err(Error::Instability(format!("vorticity reached {peak:e} by t = {t:.4}")));
    }
    Ok(w)
}

/// Pseudo-spectral solve from `w0` (`1 x 1 x n x n`). The returned trajectory
/// holds `w0` followed by one slice every `record_dt`.
///
/// Each step is a third-order strong-stability-preserving combination of
/// forward-Euler/Crank-Nicolson substeps; `dt` follows the advective CFL
/// limit and lands exactly on every record time.
pub fn ns_solve(w0: &Field, cfg: &NsConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n;
    if w0.shape() != (1, 1, n, n) {
        return Err(Error::shape(format!("initial vorticity must be 1x1x{n}x{n}, got {:?}", w0.shape())));
    }
    let sp = Spectral::new(cfg);
    let dx = 1.0 / n as f64;
    let mut wh = fft2_plane(w0.data.index_axis(Axis(0), 0).index_axis(Axis(0), 0));
    let records = cfg.records();
    let mut out = Array4::zeros((records + 1, 1, n, n));
    out.index_axis_mut(Axis(0), 0).assign(&w0.data.index_axis(Axis(0), 0));

    let mut t = 0.0;
    for r in 1..=records {
        let target = r as f64 * cfg.record_dt;
        while t < target - 1e-12 * target.max(1.0) {
            let speed = sp.max_speed(&wh);
            let mut dt = cfg.dt_max.min(if speed > 0.0 { cfg.cfl * dx / speed } else { f64::INFINITY });
            if t + dt > target {
                dt = target - t;
            }
            let w1 = sp.euler_cn(&wh, dt, cfg.viscosity);
            let mut w2 = sp.euler_cn(&w1, dt, cfg.viscosity);
            Zip::from(&mut w2).and(&wh).for_each(|b, &a| *b = a * 0.75 + *b * 0.25);
            let mut w3 = sp.euler_cn(&w2, dt, cfg.viscosity);
            Zip::from(&mut w3).and(&wh).for_each(|c, &a| *c = a / 3.0 + *c * (2.0 / 3.0));
            wh = w3;
            t += dt;
            // sum |w_k| / n^2 bounds max |w|; only transform back when it might be exceeded
            if !(wh.iter().map(|c| c.norm()).sum::<f64>() / (n * n) as f64 <= BLOW_UP) {
                check_peak(&wh, t)?;
            }
        }
        t = target;
        let w = check_peak(&wh, t)?;
        out.index_axis_mut(Axis(0), r).index_axis_mut(Axis(0), 0).assign(&w);
    }
    Trajectory::new(out, cfg.record_dt, dx, dx, vec!["w".into()])
}
