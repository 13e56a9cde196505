//! Evaluation metrics, autoregressive rollout scoring and the zero-shot
//! super-resolution harness.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Model;
use crate::tensor::Field;
use crate::trajectory::{stack, Trajectory};

const ZERO_REFERENCE: f64 = 1e-30;
const EVAL_BATCH: usize = 16;

fn check_shapes(preds: &Field, truths: &Field) -> Result<()> {
    if preds.shape() != truths.shape() {
        return Err(Error::shape(format!("prediction {:?} vs truth {:?}", preds.shape(), truths.shape())));
    }
    Ok(())
}

/// `|pred_i - truth_i| / |truth_i|` for every sample of the batch.
pub fn relative_errors(preds: &Field, truths: &Field) -> Result<Vec<f64>> {
    check_shapes(preds, truths)?;
    (0..preds.batch())
        .map(|i| {
            let (p, t) = (preds.sample(i), truths.sample(i));
            let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tn < ZERO_REFERENCE {
                return Err(Error::ZeroReference { sample: i });
            }
            let dn = p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            Ok(dn / tn)
        })
        .collect()
}

/// Mean relative L2 error over the batch.
pub fn l_rmse(preds: &Field, truths: &Field) -> Result<f64> {
    let e = relative_errors(preds, truths)?;
    Ok(e.iter().sum::<f64>() / e.len().max(1) as f64)
}

/// Per-sample, per-channel `(sum pred - sum truth) / (H W)`, unit mass.
fn momentum_gaps(preds: &Field, truths: &Field) -> Result<Vec<Vec<f64>>> {
    check_shapes(preds, truths)?;
    let (b, c, h, w) = preds.shape();
    let n = (h * w) as f64;
    Ok((0..b)
        .map(|i| {
            let (p, t) = (preds.sample(i), truths.sample(i));
            (0..c)
                .map(|ch| {
                    let sp: f64 = p.index_axis(ndarray::Axis(0), ch).sum();
                    let st: f64 = t.index_axis(ndarray::Axis(0), ch).sum();
                    (sp - st) / n
                })
                .collect()
        })
        .collect())
}

/// Momentum discrepancy per output channel, averaged over the batch.
pub fn momentum_loss_channels(preds: &Field, truths: &Field) -> Result<Vec<f64>> {
    let gaps = momentum_gaps(preds, truths)?;
    let c = preds.channels();
    let b = gaps.len().max(1) as f64;
    Ok((0..c).map(|ch| gaps.iter().map(|g| g[ch].abs()).sum::<f64>() / b).collect())
}

/// `|sum pred - sum truth|_2 / N` with the norm over channels and `N = H W`,
/// averaged over the batch.
pub fn momentum_loss(preds: &Field, truths: &Field) -> Result<f64> {
    let gaps = momentum_gaps(preds, truths)?;
    let b = gaps.len().max(1) as f64;
    Ok(gaps.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / b)
}

/// Errors on one rollout step, averaged over trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepError {
    pub step: usize,
    pub l_rmse: f64,
    pub l_m: f64,
    pub l_m_channels: Vec<f64>,
}

/// Errors of one trajectory: the per-step curve and its summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryError {
    pub l_rmse_steps: Vec<f64>,
    pub l_m_steps: Vec<f64>,
    /// Mean of `l_rmse_steps`.
    pub l_rmse: f64,
    /// Mean of `l_m_steps`.
    pub l_m: f64,
    /// Momentum discrepancy at the last step only.
    pub l_m_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Slice the rollouts start from.
    pub start: usize,
    pub steps: usize,
    pub height: usize,
    pub width: usize,
    pub trajectories: Vec<TrajectoryError>,
    pub per_step: Vec<StepError>,
    pub l_rmse: f64,
    pub l_m: f64,
    pub l_m_final: f64,
    pub wall_clock_s: f64,
}

impl EvalReport {
    fn assemble(start: usize, steps: usize, (height, width): (usize, usize), rel: Vec<Vec<f64>>, gaps: Vec<Vec<Vec<f64>>>) -> EvalReport {
        let n = rel.len() as f64;
        let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let trajectories: Vec<TrajectoryError> = rel
            .iter()
            .zip(&gaps)
            .map(|(r, g)| {
                let l_m_steps: Vec<f64> = g.iter().map(|v| norm(v)).collect();
                TrajectoryError {
                    l_rmse: r.iter().sum::<f64>() / steps as f64,
                    l_m: l_m_steps.iter().sum::<f64>() / steps as f64,
                    l_m_final: *l_m_steps.last().unwrap(),
                    l_rmse_steps: r.clone(),
                    l_m_steps,
                }
            })
            .collect();
        let channels = gaps[0][0].len();
        let per_step = (0..steps)
            .map(|k| StepError {
                step: k + 1,
                l_rmse: trajectories.iter().map(|t| t.l_rmse_steps[k]).sum::<f64>() / n,
                l_m: trajectories.iter().map(|t| t.l_m_steps[k]).sum::<f64>() / n,
                l_m_channels: (0..channels).map(|c| gaps.iter().map(|g| g[k][c].abs()).sum::<f64>() / n).collect(),
            })
            .collect();
        let mean = |f: fn(&TrajectoryError) -> f64| trajectories.iter().map(f).sum::<f64>() / n;
        EvalReport {
            start,
            steps,
            height,
            width,
            l_rmse: mean(|t| t.l_rmse),
            l_m: mean(|t| t.l_m),
            l_m_final: mean(|t| t.l_m_final),
            trajectories,
            per_step,
            wall_clock_s: 0.0,
        }
    }

    /// Per-step curve as `step,l_rmse,l_m`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,l_rmse,l_m\n");
        for r in &self.per_step {
            writeln!(s, "{},{:e},{:e}", r.step, r.l_rmse, r.l_m).unwrap();
        }
        s
    }
}

/// Rolls `model` forward `steps` times from slice 0 of every trajectory and
/// scores each step against the recorded slices.
pub fn rollout_eval(model: &Model, data: &[Trajectory], steps: usize) -> Result<EvalReport> {
    rollout_eval_with(model, data, 0, steps, |_, _| {})
}

/// [`rollout_eval`] starting at slice `start`, with `perturb(step, state)`
/// applied to each prediction before it is scored and fed back.
pub fn rollout_eval_with<F>(model: &Model, data: &[Trajectory], start: usize, steps: usize, mut perturb: F) -> Result<EvalReport>
where
    F: FnMut(usize, &mut Field),
{
    let clock = Instant::now();
    let first = data.first().ok_or_else(|| Error::Data("no trajectories to evaluate".into()))?;
    let shape = first.shape();
    if steps == 0 {
        return Err(Error::Config("rollout needs at least one step".into()));
    }
    for (i, tr) in data.iter().enumerate() {
        let s = tr.shape();
        if (s.1, s.2, s.3) != (shape.1, shape.2, shape.3) {
            return Err(Error::shape(format!("trajectory {i} is {s:?}, trajectory 0 is {shape:?}")));
        }
        if tr.len() <= start + steps {
            return Err(Error::Data(format!(
                "trajectory {i} has {} slices, rollout needs {}",
                tr.len(),
                start + steps + 1
            )));
        }
    }
    let prepared = model.prepare()?;
    let mut rel = Vec::with_capacity(data.len());
    let mut gaps = Vec::with_capacity(data.len());
    for chunk in data.chunks(EVAL_BATCH) {
        let at = |t: usize| {
            let views: Vec<_> = chunk.iter().map(|tr| tr.slice(t)).collect();
            stack(&views, chunk[0].dx, chunk[0].dy)
        };
        let mut r = vec![Vec::with_capacity(steps); chunk.len()];
        let mut g = vec![Vec::with_capacity(steps); chunk.len()];
        let mut u = at(start);
        for k in 1..=steps {
            let mut pred = prepared.predict(&u)?;
            perturb(k, &mut pred);
            let truth = at(start + k);
            for (i, e) in relative_errors(&pred, &truth)?.into_iter().enumerate() {
                r[i].push(e);
            }
            for (i, m) in momentum_gaps(&pred, &truth)?.into_iter().enumerate() {
                g[i].push(m);
            }
            u = pred;
        }
        rel.extend(r);
        gaps.extend(g);
    }
    let mut report = EvalReport::assemble(start, steps, (shape.2, shape.3), rel, gaps);
    report.wall_clock_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs a model trained on a `train_res` grid, unchanged, on finer data.
///
/// Spectral weights are resolution independent. Latent zero padding is a
/// physical width, so `pad` is scaled by the grid ratio.
pub fn superres_eval(model: &Model, train_res: (usize, usize), data: &[Trajectory], steps: usize) -> Result<EvalReport> {
    superres_eval_with(model, train_res, data, 0, steps)
}

pub fn superres_eval_with(model: &Model, train_res: (usize, usize), data: &[Trajectory], start: usize, steps: usize) -> Result<EvalReport> {
    let m = model.config.modes;
    let (hl, wl) = train_res;
    if 2 * m + 1 > hl.min(wl) {
        return Err(Error::ModeOverflow { m, h: hl, w: wl });
    }
    let first = data.first().ok_or_else(|| Error::Data("no trajectories to evaluate".into()))?;
    let (_, _, hh, wh) = first.shape();
    if hh < hl || wh < wl || hh % hl != 0 || wh % wl != 0 || hh / hl != wh / wl {
        return Err(Error::shape(format!(
            "fine grid {hh}x{wh} is not a uniform refinement of the training grid {hl}x{wl}"
        )));
    }
    let ratio = hh / hl;
    if ratio == 1 || model.config.pad == 0 {
        return rollout_eval_with(model, data, start, steps, |_, _| {});
    }
    let mut cfg = model.config.clone();
    cfg.pad *= ratio;
    let fine = Model::from_params(cfg, model.params.clone())?;
    rollout_eval_with(&fine, data, start, steps, |_, _| {})
}

/// Predicted trajectories: slice `start` of each input followed by `steps`
/// autoregressive predictions.
pub fn rollout_trajectories(model: &Model, data: &[Trajectory], start: usize, steps: usize) -> Result<Vec<Trajectory>> {
    let prepared = model.prepare()?;
    data.iter()
        .map(|tr| {
            if tr.len() <= start {
                return Err(Error::Data(format!("trajectory has {} slices, rollout starts at {start}", tr.len())));
            }
            let mut frames = vec![tr.frame(start)];
            for k in 0..steps {
                let next = prepared.predict(&frames[k])?;
                frames.push(next);
            }
            Trajectory::from_frames(&frames, tr.dt_record, tr.channels.clone())
        })
        .collect()
}
