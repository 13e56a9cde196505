//! Reference solvers that generate training and evaluation data.

mod dem;
mod flood;
mod grf;
mod ns;
mod swe;

pub use dem::{make_synthetic_dem, DemKind};
pub use flood::{flood_solve, Boundary, BoundaryKind, FloodConfig, FloodRun, Inflow, Rainfall};
pub use grf::{grf_sample, grf_spectrum, GrfConfig};
pub use ns::{ns_solve, NsConfig};
pub use swe::{swe_dambreak_solve, swe_initial_depth, SweConfig};

/// Wavenumber of FFT bin `i` on an `n`-point axis.
pub(crate) fn wavenumber(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}
