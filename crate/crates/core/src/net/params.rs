use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::kernel::{init_free, KernelShape};

/// One named block of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub segments: Vec<Segment>,
}

impl ParamLayout {
    pub fn for_config(cfg: &ModelConfig) -> ParamLayout {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let seg = Segment { name, offset, shape };
            offset += seg.len();
            segments.push(seg);
        };
        let (dz, g) = (cfg.latent, cfg.groups);
        push("lift.weight".into(), vec![dz, cfg.in_channels]);
        push("lift.bias".into(), vec![dz]);
        for l in 0..cfg.layers {
            push(format!("layer{l}.kernel"), vec![kernel_shape(cfg).free_len()]);
            for part in ["residual", "mlp1", "mlp2"] {
                push(format!("layer{l}.{part}.weight"), vec![dz, dz, g]);
                push(format!("layer{l}.{part}.bias"), vec![dz]);
            }
        }
        push("decoder1.weight".into(), vec![cfg.decoder_hidden, dz]);
        push("decoder1.bias".into(), vec![cfg.decoder_hidden]);
        push("decoder2.weight".into(), vec![cfg.out_channels, cfg.decoder_hidden]);
        push("decoder2.bias".into(), vec![cfg.out_channels]);
        ParamLayout { segments }
    }

    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub(crate) fn range(&self, name: &str) -> std::ops::Range<usize> {
        self.get(name).unwrap_or_else(|| panic!("no parameter segment {name}")).range()
    }
}

pub(crate) fn kernel_shape(cfg: &ModelConfig) -> KernelShape {
    KernelShape::new(cfg.kernel, cfg.modes, cfg.latent, cfg.latent, cfg.groups)
}

/// All trainable weights as one flat vector plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let layout = ParamLayout::for_config(cfg);
        let values = vec![0.0; layout.len()];
        ModelParams { layout, values }
    }

    /// Seeded initialization: uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for
    /// pointwise weights and biases, spectral kernels per [`init_free`].
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut p = ModelParams::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kshape = kernel_shape(cfg);
        for seg in p.layout.segments.clone() {
            let slice = &mut p.values[seg.range()];
            if seg.name.ends_with(".kernel") {
                init_free(&kshape, slice, &mut rng);
                continue;
            }
            let fan_in = if seg.name.starts_with("lift") {
                cfg.in_channels
            } else if seg.name.starts_with("decoder1") {
                cfg.latent
            } else if seg.name.starts_with("decoder2") {
                cfg.decoder_hidden
            } else {
                cfg.latent * cfg.groups
            };
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in slice.iter_mut() {
                *v = rng.random_range(-a..a);
            }
        }
        p
    }

    pub fn from_values(cfg: &ModelConfig, values: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::for_config(cfg);
        if values.len() != layout.len() {
            return Err(Error::shape(format!("model expects {} parameters, got {}", layout.len(), values.len())));
        }
        Ok(ModelParams { layout, values })
    }

    pub fn segment(&self, name: &str) -> &[f64] {
        &self.values[self.layout.range(name)]
    }

    pub fn segment_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self.layout.range(name);
        &mut self.values[r]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
