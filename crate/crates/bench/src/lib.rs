//! Shared fixtures for the benchmarks.

use ndarray::Array4;
use pefnn_core::kernel::KernelMode;
use pefnn_core::net::ModelConfig;
use pefnn_core::Field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_field(b: usize, c: usize, n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::new(Array4::from_shape_fn((b, c, n, n), |_| rng.random_range(-1.0..1.0)))
}

/// The default architecture with a chosen kernel mode and group count.
pub fn model_config(kernel: KernelMode, groups: usize, modes: usize) -> ModelConfig {
    ModelConfig { kernel, groups, modes, ..ModelConfig::default() }
}
