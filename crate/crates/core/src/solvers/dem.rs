use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Synthetic terrain families. With `s_x, s_y` the cell-center coordinates
/// scaled to `[0, 1]` (column and row) and `rho` the seeded roughness, a sum
/// of four low sinusoids of 0.3 m total amplitude:
///
/// * `valley`: `20 s_x + 8 (2 s_y - 1)^2 + rho`, draining to the west edge.
/// * `bowl`: `10 r^2 (1 + 0.15 cos(3 phi + a) + 0.1 cos(5 phi + b))` in polar
///   coordinates about the center, with only the angular phases seeded so
///   every ray rises monotonically.
/// * `two-river`: `15 s_x + 3 (1 - exp(-d^2 / 0.004)) + rho`, where `d` is the
///   distance to the nearer of two channels that merge at `s_x = 0.4` and run
///   together to the west edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemKind {
    Valley,
    Bowl,
    TwoRiver,
}

impl std::str::FromStr for DemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "valley" => Ok(DemKind::Valley),
            "bowl" => Ok(DemKind::Bowl),
            "two-river" => Ok(DemKind::TwoRiver),
            _ => Err(format!("unknown DEM kind {s:?}")),
        }
    }
}

/// `n x n` bed elevation in meters.
pub fn make_synthetic_dem(kind: DemKind, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> =
        (0..4).map(|_| (rng.random_range(1.0..4.0), rng.random_range(1.0..4.0), rng.random_range(0.0..2.0 * PI))).collect();
    let (a, b) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    let coord = |i: usize| (i as f64 + 0.5) / n as f64;
    let rough = |sx: f64, sy: f64| waves.iter().map(|&(kx, ky, p)| 0.075 * (2.0 * PI * (kx * sx + ky * sy) + p).sin()).sum::<f64>();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (sx, sy) = (coord(j), coord(i));
        match kind {
            DemKind::Valley => 20.0 * sx + 8.0 * (2.0 * sy - 1.0).powi(2) + rough(sx, sy),
            DemKind::Bowl => {
                let (x, y) = (sx - 0.5, sy - 0.5);
                let phi = y.atan2(x);
                10.0 * (x * x + y * y) * (1.0 + 0.15 * (3.0 * phi + a).cos() + 0.1 * (5.0 * phi + b).cos())
            }
            DemKind::TwoRiver => {
                let spread = 0.3 * ((sx - 0.4).max(0.0) / 0.6);
                let d = (sy - 0.5 - spread).abs().min((sy - 0.5 + spread).abs());
                15.0 * sx + 3.0 * (1.0 - (-d * d / 0.004).exp()) + rough(sx, sy)
            }
        }
    })
}
