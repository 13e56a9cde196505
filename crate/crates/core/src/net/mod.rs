//! The PeFNN computation graph and its reverse pass.
//!
//! `fhat(u) = Q . mean_g(prod_l K_l)` where `K_l` is the output of the `l`-th
//! MC-Fourier layer of one sequential trunk; the time step wraps `fhat` in an
//! explicit integrator.

mod config;
mod layer;
mod model;
mod params;

pub use config::{Activation, Integrator, ModelConfig};
pub use model::{backward, explicit_step, Gradients, Model, Prepared, Tape};
pub use params::{ModelParams, ParamLayout, Segment};
