//! Losses, AdamW, the cosine schedule and the Markov / Recurrent training
//! loops.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{backward, Model, ModelParams, Prepared, Tape};
use crate::tensor::Field;
use crate::trajectory::{stack, Trajectory};

const ZERO_REFERENCE: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// One-step pairs `(u_t, u_{t+1})`.
    Markov,
    /// Autoregressive rollout from `u_0` with backpropagation through time.
    Recurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Maximum global gradient norm; off when absent.
    pub grad_clip: Option<f64>,
    /// Recurrent rollout length; the full trajectory horizon when absent.
    pub rollout: Option<usize>,
    /// Standard deviation of Gaussian noise added to the first input of every
    /// training sample; targets stay clean. Off at 0.
    pub input_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            strategy: Strategy::Markov,
            epochs: 100,
            batch_size: 20,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            seed: 0,
            grad_clip: None,
            rollout: None,
            input_noise: 0.0,
        }
    }
}

impl TrainConfig {
    /// Checks everything except the epoch count, which may be zero for a
    /// no-op run.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return fail("train.batch_size must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail(format!("train.lr must be non-negative, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return fail(format!("train.{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return fail("train.eps must be positive and train.weight_decay non-negative".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return fail(format!("train.grad_clip must be positive, got {c}"));
            }
        }
        if !(self.input_noise >= 0.0 && self.input_noise.is_finite()) {
            return fail(format!("train.input_noise must be non-negative, got {}", self.input_noise));
        }
        if self.rollout == Some(0) {
            return fail("train.rollout must be at least 1".into());
        }
        Ok(())
    }
}

/// Mean over the batch of `|pred - truth| / |truth|`, and its gradient with
/// respect to `pred`.
pub fn relative_l2_loss(pred: &Field, truth: &Field) -> Result<(f64, Field)> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!("prediction {:?} vs truth {:?}", pred.shape(), truth.shape())));
    }
    let b = pred.batch();
    let mut grad = Field::zeros(b, pred.channels(), pred.height(), pred.width()).spaced_like(pred);
    let mut total = 0.0;
    for i in 0..b {
        let (p, t) = (pred.sample(i), truth.sample(i));
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if tn < ZERO_REFERENCE {
            return Err(Error::ZeroReference { sample: i });
        }
        let diff = &p - &t;
        let dn = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        total += dn / tn;
        if dn > 0.0 {
            grad.sample_mut(i).assign(&(diff / (dn * tn * b as f64)));
        }
    }
    Ok((total / b as f64, grad))
}

/// `lr0 (1 + cos(pi e / E)) / 2`.
pub fn cosine_lr(lr0: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs == 0 {
        return lr0;
    }
    if epoch >= epochs {
        return 0.0;
    }
    lr0 * (1.0 + (PI * epoch as f64 / epochs as f64).cos()) / 2.0
}

/// AdamW moments. Weight decay is decoupled: `p -= lr * wd * p` alongside the
/// moment update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let update = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.eps);
            params[i] -= lr * (cfg.weight_decay * params[i] + update);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,valid_loss\n");
        for r in &self.records {
            let valid = r.valid_loss.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(s, "{},{:e},{:e},{}", r.epoch, r.lr, r.train_loss, valid).unwrap();
        }
        s
    }

    /// Lowest validation loss, falling back to training loss when there is
    /// no validation split.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.records
            .iter()
            .map(|r| (r.epoch, r.valid_loss.unwrap_or(r.train_loss)))
            .fold(None, |acc, (e, l)| match acc {
                Some((_, b)) if b <= l => acc,
                _ => Some((e, l)),
            })
    }
}

/// Indices `(trajectory, start slice)` of every optimization sample.
fn samples(data: &[Trajectory], strategy: Strategy, steps: usize) -> Vec<(usize, usize)> {
    match strategy {
        Strategy::Markov => {
            data.iter().enumerate().flat_map(|(i, tr)| (0..tr.len() - 1).map(move |t| (i, t))).collect()
        }
        Strategy::Recurrent => (0..data.len()).filter(|&i| data[i].len() > steps).map(|i| (i, 0)).collect(),
    }
}

fn batch_slices(data: &[Trajectory], batch: &[(usize, usize)], offset: usize) -> Field {
    let views: Vec<_> = batch.iter().map(|&(i, t)| data[i].slice(t + offset)).collect();
    let first = &data[batch[0].0];
    stack(&views, first.dx, first.dy)
}

/// Loss on one batch and, with `grad`, its gradient over the parameters.
/// Markov batches use one step; a rollout of `steps` steps averages the
/// per-step relative L2 and backpropagates through every step.
fn batch_objective(
    prepared: &std::sync::Arc<Prepared>,
    data: &[Trajectory],
    batch: &[(usize, usize)],
    steps: usize,
    grad: bool,
    noise: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<(f64, Option<Vec<f64>>)> {
    let mut u = batch_slices(data, batch, 0);
    if let Some((sigma, rng)) = noise {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("input noise: {e}")))?;
        u.data.mapv_inplace(|v| v + normal.sample(rng));
    }
    let mut tapes = Vec::with_capacity(steps);
    let mut cots = Vec::with_capacity(steps);
    let mut total = 0.0;
    for k in 1..=steps {
        let truth = batch_slices(data, batch, k);
        let pred = if grad {
            let mut tape = Tape::new();
            let p = prepared.step(&u, &mut tape)?;
            tapes.push(tape);
            p
        } else {
            prepared.predict(&u)?
        };
        let (loss, cot) = relative_l2_loss(&pred, &truth)?;
        total += loss;
        cots.push(cot);
        u = pred;
    }
    let loss = total / steps as f64;
    if !grad {
        return Ok((loss, None));
    }
    let mut params: Option<Vec<f64>> = None;
    let mut carry: Option<Field> = None;
    for (mut tape, mut cot) in tapes.into_iter().zip(cots).rev() {
        cot.data.mapv_inplace(|v| v / steps as f64);
        if let Some(c) = carry.take() {
            cot.data += &c.data;
        }
        let g = backward(&mut tape, &cot)?;
        match params.as_mut() {
            None => params = Some(g.params),
            Some(p) => p.iter_mut().zip(&g.params).for_each(|(a, b)| *a += b),
        }
        carry = Some(g.input);
    }
    Ok((loss, params))
}

/// Mean loss and gradient over every sample of `data`, in `batch_size`
/// chunks and fixed order. Exposed for gradient checks and diagnostics.
pub fn objective(model: &Model, data: &[Trajectory], strategy: Strategy, rollout: usize, batch_size: usize) -> Result<(f64, Vec<f64>)> {
    let prepared = model.prepare()?;
    let steps = match strategy {
        Strategy::Markov => 1,
        Strategy::Recurrent => rollout,
    };
    let all = samples(data, strategy, steps);
    if all.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.num_params()];
    for chunk in all.chunks(batch_size.max(1)) {
        let (l, g) = batch_objective(&prepared, data, chunk, steps, true, None)?;
        let w = chunk.len() as f64 / all.len() as f64;
        loss += w * l;
        grad.iter_mut().zip(g.unwrap()).for_each(|(a, b)| *a += w * b);
    }
    Ok((loss, grad))
}

/// Stateful training loop: one call to [`Trainer::run_epoch`] per epoch.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    pub optimizer: Adam,
    pub history: History,
    /// Parameters of the best epoch seen by this trainer.
    pub best: Option<(usize, ModelParams)>,
    best_loss: f64,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Trainer> {
        let n = model.num_params();
        Trainer::resume(model, config, Adam::new(n), History::default())
    }

    /// Continues from a saved optimizer state and history.
    pub fn resume(model: Model, config: TrainConfig, optimizer: Adam, history: History) -> Result<Trainer> {
        config.validate()?;
        if optimizer.m.len() != model.num_params() || optimizer.v.len() != model.num_params() {
            return Err(Error::shape("optimizer state does not match the model"));
        }
        let best_loss = history.best().map_or(f64::INFINITY, |(_, l)| l);
        Ok(Trainer { config, model, optimizer, history, best: None, best_loss })
    }

    pub fn next_epoch(&self) -> usize {
        self.history.len()
    }

    pub fn is_done(&self) -> bool {
        self.next_epoch() >= self.config.epochs
    }

    fn steps(&self, data: &[Trajectory]) -> Result<usize> {
        match self.config.strategy {
            Strategy::Markov => Ok(1),
            Strategy::Recurrent => {
                let horizon = data.iter().map(|t| t.len() - 1).min().unwrap_or(0);
                let steps = self.config.rollout.unwrap_or(horizon);
                if steps > horizon {
                    return Err(Error::Data(format!("rollout of {steps} steps exceeds trajectory horizon {horizon}")));
                }
                Ok(steps)
            }
        }
    }

    pub fn run_epoch(&mut self, train: &[Trajectory], valid: &[Trajectory]) -> Result<EpochRecord> {
        let epoch = self.next_epoch();
        let steps = self.steps(train)?;
        let mut order = samples(train, self.config.strategy, steps);
        if order.is_empty() {
            return Err(Error::Data("no training samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        order.shuffle(&mut rng);
        let lr = cosine_lr(self.config.lr, epoch, self.config.epochs);
        let numeric = |e: Error| match e {
            Error::NonFinite(_) | Error::Instability(_) => Error::NonFiniteEpoch { epoch },
            other => other,
        };

        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let prepared = self.model.prepare()?;
            let noise = (self.config.input_noise > 0.0).then_some((self.config.input_noise, &mut rng));
            let (loss, grad) = batch_objective(&prepared, train, batch, steps, true, noise).map_err(numeric)?;
            let mut grad = grad.expect("gradient requested");
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFiniteEpoch { epoch });
            }
            if let Some(clip) = self.config.grad_clip {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > clip {
                    grad.iter_mut().for_each(|g| *g *= clip / norm);
                }
            }
            self.optimizer.step(&mut self.model.params.values, &grad, lr, &self.config);
            if !self.model.params.values.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteEpoch { epoch });
            }
            total += loss * batch.len() as f64;
        }
        let train_loss = total / order.len() as f64;

        let valid_loss = if valid.is_empty() {
            None
        } else {
            let steps = self.steps(valid)?;
            let prepared = self.model.prepare()?;
            let all = samples(valid, self.config.strategy, steps);
            let mut acc = 0.0;
            for batch in all.chunks(self.config.batch_size) {
                let (l, _) = batch_objective(&prepared, valid, batch, steps, false, None).map_err(numeric)?;
                acc += l * batch.len() as f64;
            }
            let v = acc / all.len().max(1) as f64;
            if !v.is_finite() {
                return Err(Error::NonFiniteEpoch { epoch });
            }
            Some(v)
        };

        let record = EpochRecord { epoch, lr, train_loss, valid_loss };
        let score = valid_loss.unwrap_or(train_loss);
        if score < self.best_loss {
            self.best_loss = score;
            self.best = Some((epoch, self.model.params.clone()));
        }
        self.history.records.push(record.clone());
        Ok(record)
    }

    /// Runs the remaining epochs.
    pub fn run(&mut self, train: &[Trajectory], valid: &[Trajectory]) -> Result<()> {
        while !self.is_done() {
            self.run_epoch(train, valid)?;
        }
        Ok(())
    }
}

/// Result of a complete training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub best: Option<(usize, ModelParams)>,
    pub history: History,
    pub optimizer: Adam,
}

impl From<Trainer> for TrainOutcome {
    fn from(t: Trainer) -> Self {
        TrainOutcome { model: t.model, best: t.best, history: t.history, optimizer: t.optimizer }
    }
}

pub fn train_markov(model: Model, train: &[Trajectory], valid: &[Trajectory], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let cfg = TrainConfig { strategy: Strategy::Markov, ..cfg.clone() };
    let mut t = Trainer::new(model, cfg)?;
    t.run(train, valid)?;
    Ok(t.into())
}

pub fn train_recurrent(
    model: Model,
    train: &[Trajectory],
    valid: &[Trajectory],
    cfg: &TrainConfig,
    rollout: Option<usize>,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig { strategy: Strategy::Recurrent, rollout: rollout.or(cfg.rollout), ..cfg.clone() };
    let mut t = Trainer::new(model, cfg)?;
    t.run(train, valid)?;
    Ok(t.into())
}
