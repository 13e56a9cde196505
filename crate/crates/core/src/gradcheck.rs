//! Finite-difference check of the training gradients on a tiny model.

use std::fmt::Write as _;

use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::net::{Model, ModelConfig};
use crate::training::{objective, Strategy};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub layers: usize,
    pub latent: usize,
    pub modes: usize,
    pub groups: usize,
    pub decoder_hidden: usize,
    pub pad: usize,
    pub grid: usize,
    pub trajectories: usize,
    /// Recurrent rollout length checked alongside the one-step loss.
    pub rollout: usize,
    /// Parameter slots sampled per kernel mode and strategy.
    pub slots: usize,
    pub eps: f64,
    /// Gradients below this magnitude are compared absolutely.
    pub floor: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            layers: 2,
            latent: 3,
            modes: 2,
            groups: 4,
            decoder_hidden: 4,
            pad: 1,
            grid: 8,
            trajectories: 2,
            rollout: 3,
            slots: 50,
            eps: 1e-5,
            floor: 1e-4,
            tolerance: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckEntry {
    pub kernel: KernelMode,
    pub strategy: Strategy,
    pub steps: usize,
    pub slots: usize,
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.worst).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() < self.tolerance
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let verdict = if e.worst < self.tolerance { "ok" } else { "FAIL" };
            let strategy = match e.strategy {
                Strategy::Markov => "markov".to_string(),
                Strategy::Recurrent => format!("recurrent x{}", e.steps),
            };
            writeln!(s, "{:<18} {:<14} {:>3} slots  worst {:.3e}  {verdict}", e.kernel.to_string(), strategy, e.slots, e.worst).unwrap();
        }
        writeln!(s, "worst relative error {:.3e} (tolerance {:e})", self.worst(), self.tolerance).unwrap();
        s
    }
}

fn data(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Trajectory>> {
    let n = cfg.grid;
    (0..cfg.trajectories)
        .map(|_| {
            let t = cfg.rollout + 1;
            let a = Array4::from_shape_fn((t, 1, n, n), |_| rng.random_range(0.2..1.0));
            Trajectory::new(a, 1.0, 1.0 / n as f64, 1.0 / n as f64, vec!["u".into()])
        })
        .collect()
}

/// Runs the check for every kernel mode on the one-step and the rollout
/// loss. `adjust` may rewrite the analytic gradient before comparison; the
/// CLI passes a no-op, tests use it to plant a faulty adjoint.
pub fn gradcheck_with<F>(cfg: &GradcheckConfig, mut adjust: F) -> Result<GradcheckReport>
where
    F: FnMut(&mut [f64]),
{
    if cfg.slots == 0 || cfg.rollout == 0 || cfg.trajectories == 0 || !(cfg.eps > 0.0) {
        return Err(Error::Config("gradcheck: slots, rollout, trajectories and eps must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let data = data(cfg, &mut rng)?;
    let mut entries = Vec::new();
    for kernel in KernelMode::ALL {
        let mc = ModelConfig {
            layers: cfg.layers,
            latent: cfg.latent,
            modes: cfg.modes,
            kernel,
            groups: cfg.groups,
            decoder_hidden: cfg.decoder_hidden,
            pad: cfg.pad,
            dt: 0.5,
            ..ModelConfig::default()
        };
        let mut model = Model::new(mc, rng.random())?;
        // Spectral weights start small; enlarge them so every path matters.
        for seg in model.params.layout.segments.clone() {
            if seg.name.ends_with(".kernel") {
                model.params.values[seg.range()].iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
            }
        }
        for (strategy, steps) in [(Strategy::Markov, 1), (Strategy::Recurrent, cfg.rollout)] {
            let (_, mut grad) = objective(&model, &data, strategy, steps, usize::MAX)?;
            adjust(&mut grad);
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.slots {
                let i = rng.random_range(0..model.num_params());
                let mut probe = model.clone();
                probe.params.values[i] += cfg.eps;
                let up = objective(&probe, &data, strategy, steps, usize::MAX)?.0;
                probe.params.values[i] -= 2.0 * cfg.eps;
                let down = objective(&probe, &data, strategy, steps, usize::MAX)?.0;
                let fd = (up - down) / (2.0 * cfg.eps);
                let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(cfg.floor);
                worst = worst.max(err);
            }
            entries.push(GradcheckEntry { kernel, strategy, steps, slots: cfg.slots, worst });
        }
    }
    Ok(GradcheckReport { entries, tolerance: cfg.tolerance })
}

pub fn gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    gradcheck_with(cfg, |_| {})
}
