//! Physics-embedded Fourier neural network toolkit.

pub mod datasets;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod net;
pub mod solvers;
pub mod tensor;
pub mod training;
pub mod trajectory;

pub use error::{Error, Result};
pub use tensor::{ComplexField, Field, SpectralBlock};
pub use trajectory::{Trajectory, TrajectoryInfo};
