use ndarray::{s, Array4, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Field;

/// A recorded solution: `T x C x H x W` plus the spacing it was sampled at.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub data: Array4<f64>,
    pub dt_record: f64,
    pub dx: f64,
    pub dy: f64,
    pub channels: Vec<String>,
}

/// Everything about a trajectory except its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInfo {
    pub dt_record: f64,
    pub dx: f64,
    pub dy: f64,
    pub channels: Vec<String>,
}

impl Trajectory {
    pub fn new(data: Array4<f64>, dt_record: f64, dx: f64, dy: f64, channels: Vec<String>) -> Result<Trajectory> {
        let (t, c, _, _) = data.dim();
        if t < 2 {
            return Err(Error::Data(format!("trajectory needs at least 2 slices, got {t}")));
        }
        if channels.len() != c {
            return Err(Error::shape(format!("{} channel names for {c} channels", channels.len())));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("trajectory values".into()));
        }
        Ok(Trajectory { data, dt_record, dx, dy, channels })
    }

    pub fn from_frames(frames: &[Field], dt_record: f64, channels: Vec<String>) -> Result<Trajectory> {
        let first = frames.first().ok_or_else(|| Error::Data("no frames".into()))?;
        let (_, c, h, w) = first.shape();
        let mut data = Array4::zeros((frames.len(), c, h, w));
        for (t, f) in frames.iter().enumerate() {
            if f.shape() != (1, c, h, w) {
                return Err(Error::shape("frames differ in shape"));
            }
            data.index_axis_mut(Axis(0), t).assign(&f.sample(0));
        }
        Trajectory::new(data, dt_record, first.dx, first.dy, channels)
    }

    pub fn len(&self) -> usize {
        self.data.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(T, C, H, W)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn slice(&self, t: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(0), t)
    }

    /// Slice `t` as a batch-of-one field.
    pub fn frame(&self, t: usize) -> Field {
        let v = self.data.slice(s![t..t + 1, .., .., ..]).to_owned();
        Field::with_spacing(v, self.dx, self.dy)
    }

    pub fn info(&self) -> TrajectoryInfo {
        TrajectoryInfo { dt_record: self.dt_record, dx: self.dx, dy: self.dy, channels: self.channels.clone() }
    }
}

/// Stacks per-sample `C x H x W` views into one batch field.
pub fn stack(samples: &[ArrayView3<'_, f64>], dx: f64, dy: f64) -> Field {
    let (c, h, w) = samples[0].dim();
    let mut data = Array4::zeros((samples.len(), c, h, w));
    for (i, s) in samples.iter().enumerate() {
        data.index_axis_mut(Axis(0), i).assign(s);
    }
    Field::with_spacing(data, dx, dy)
}
