use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::wavenumber;
use crate::tensor::{fft2_plane, ifft2_plane, Field};

/// Periodic Gaussian random field on the unit square with power spectrum
/// `sigma^2 (4 pi^2 |k|^2 + tau^2)^(-alpha)`, `sigma = tau^(alpha - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrfConfig {
    pub alpha: f64,
    pub tau: f64,
}

impl Default for GrfConfig {
    fn default() -> Self {
        GrfConfig { alpha: 2.5, tau: 7.0 }
    }
}

/// Prescribed power at integer wavevector magnitude `k`.
pub fn grf_spectrum(cfg: &GrfConfig, k: f64) -> f64 {
    let sigma = cfg.tau.powf(cfg.alpha - 1.0);
    sigma * sigma * (4.0 * std::f64::consts::PI.powi(2) * k * k + cfg.tau * cfg.tau).powf(-cfg.alpha)
}

/// One `n x n` sample with exactly zero mean. Spectral filtering of
/// real white noise, so the field is real by construction.
pub fn grf_sample(cfg: &GrfConfig, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Array2::from_shape_simple_fn((n, n), || StandardNormal.sample(&mut rng));
    let mut spec = fft2_plane(noise.view());
    // Unit-variance coefficients per mode: white-noise bins carry variance n^2.
    for ((y, x), v) in spec.indexed_iter_mut() {
        let k2 = wavenumber(y, n).powi(2) + wavenumber(x, n).powi(2);
        *v *= grf_spectrum(cfg, k2.sqrt()).sqrt() * n as f64;
    }
    spec[[0, 0]] = 0.0.into();
    let plane = ifft2_plane(spec.view()).mapv(|c| c.re);
    let mut out = Array4::zeros((1, 1, n, n));
    out.index_axis_mut(ndarray::Axis(0), 0).index_axis_mut(ndarray::Axis(0), 0).assign(&plane);
    let mean = out.mean().unwrap_or(0.0);
    out.mapv_inplace(|v| v - mean);
    let h = 1.0 / n as f64;
    Field::with_spacing(out, h, h)
}
