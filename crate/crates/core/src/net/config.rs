use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    Rk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    None,
    /// tanh-approximated GELU
    Smooth,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Smooth => {
                let u = GELU_C * (x + 0.044_715 * x * x * x);
                0.5 * x * (1.0 + tanh(u))
            }
        }
    }

    pub(crate) fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Smooth => {
                let u = GELU_C * (x + 0.044_715 * x * x * x);
                let t = tanh(u);
                let du = GELU_C * (1.0 + 3.0 * 0.044_715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            }
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// `tanh` through one `exp`, several times cheaper than libm's and accurate
/// to a few ulps in absolute terms, which is all GELU needs.
fn tanh(u: f64) -> f64 {
    if u.abs() > 20.0 {
        return u.signum();
    }
    let e = (2.0 * u).exp();
    (e - 1.0) / (e + 1.0)
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Number of MC-Fourier layers.
    pub layers: usize,
    /// Latent channels per group slot.
    pub latent: usize,
    /// Mode radius; each kernel block is `(2m+1)^2`.
    pub modes: usize,
    pub kernel: KernelMode,
    /// 1 (no group axis) or 4 (p4 rotations).
    pub groups: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dt: f64,
    pub integrator: Integrator,
    /// Zero padding per spatial side for non-periodic domains.
    pub pad: usize,
    pub activation: Activation,
    pub fusion_scale: f64,
    pub decoder_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 4,
            latent: 10,
            modes: 12,
            kernel: KernelMode::SingleRotation,
            groups: 4,
            in_channels: 1,
            out_channels: 1,
            dt: 1.0,
            integrator: Integrator::Euler,
            pad: 0,
            activation: Activation::Smooth,
            fusion_scale: 1.0,
            decoder_hidden: 16,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.layers == 0 {
            return fail("model.layers must be at least 1".into());
        }
        if self.latent == 0 || self.decoder_hidden == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return fail("channel counts must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("model.dt must be positive, got {}", self.dt));
        }
        if self.groups != 1 && self.groups != 4 {
            return fail(format!("model.groups must be 1 or 4, got {}", self.groups));
        }
        if !self.fusion_scale.is_finite() {
            return fail("model.fusion_scale must be finite".into());
        }
        Ok(())
    }

    /// Channels of a latent field: `latent * groups`, group index fastest.
    pub fn latent_channels(&self) -> usize {
        self.latent * self.groups
    }

    /// Field-by-field differences against `other`, empty when equal.
    pub fn diff(&self, other: &ModelConfig) -> Vec<String> {
        let a = serde_json::to_value(self).expect("config serializes");
        let b = serde_json::to_value(other).expect("config serializes");
        let (a, b) = (a.as_object().unwrap(), b.as_object().unwrap());
        a.iter()
            .filter(|(k, v)| b.get(*k) != Some(v))
            .map(|(k, v)| format!("{k}: {v} vs {}", b.get(k).cloned().unwrap_or_default()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_derivative_matches_differences() {
        let act = Activation::Smooth;
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
            assert!((fd - act.derivative(x)).abs() < 1e-8);
        }
        assert_eq!(Activation::None.apply(1.5), 1.5);
        assert_eq!(act.apply(0.0), 0.0);
    }

    #[test]
    fn validation_and_diff() {
        let mut c = ModelConfig::default();
        assert!(c.validate().is_ok());
        c.groups = 3;
        assert!(c.validate().is_err());
        c.groups = 4;
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut d = ModelConfig::default();
        d.latent = 7;
        let diff = ModelConfig::default().diff(&d);
        assert_eq!(diff.len(), 1);
        assert!(diff[0].starts_with("latent"));
    }
}
