//! Frequency-domain kernels with parameter tying.
//!
//! A kernel is stored as a flat vector of free reals. Materializing it fills a
//! centered `(2m+1) x (2m+1)` complex block per `(c_in, c_out, group)` slab
//! through a fixed tying map; the two symmetric modes always produce a block
//! with `K[-k] = conj(K[k])`, so the spatial kernel is real.

use ndarray::{Array5, Axis};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::rot90_plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// Every mode is an independent complex number.
    Dense,
    /// Upper half-plane free, lower half its conjugate point reflection.
    SingleRotation,
    /// One quadrant free; the other three follow by quarter turns, the
    /// point-reflected pair conjugated.
    MultipleRotation,
}

impl KernelMode {
    pub const ALL: [KernelMode; 3] = [KernelMode::Dense, KernelMode::SingleRotation, KernelMode::MultipleRotation];

    pub fn is_hermitian(self) -> bool {
        !matches!(self, KernelMode::Dense)
    }
}

impl std::fmt::Display for KernelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelMode::Dense => "dense",
            KernelMode::SingleRotation => "single-rotation",
            KernelMode::MultipleRotation => "multiple-rotation",
        })
    }
}

/// Where one materialized bin reads its value from, relative to the start of
/// its slab of free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    re: usize,
    im: Option<usize>,
    conj: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelShape {
    pub mode: KernelMode,
    pub m: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub groups: usize,
}

impl KernelShape {
    pub fn new(mode: KernelMode, m: usize, c_in: usize, c_out: usize, groups: usize) -> Self {
        KernelShape { mode, m, c_in, c_out, groups }
    }

    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    /// Free reals per `(c_in, c_out, group)` slab.
    pub fn slab_len(&self) -> usize {
        let n2 = self.side() * self.side();
        match self.mode {
            KernelMode::Dense => 2 * n2,
            KernelMode::SingleRotation => n2,
            KernelMode::MultipleRotation => 2 * self.m * (self.m + 1) + 1,
        }
    }

    pub fn free_len(&self) -> usize {
        self.c_in * self.c_out * self.groups * self.slab_len()
    }

    /// Complex entries after materialization.
    pub fn dense_len(&self) -> usize {
        self.c_in * self.c_out * self.groups * self.side() * self.side()
    }

    fn slots(&self) -> Vec<Slot> {
        let n = self.side();
        let m = self.m as i64;
        let idx = |dy: i64, dx: i64| ((dy + m) as usize) * n + (dx + m) as usize;
        let mut slots = vec![Slot { re: usize::MAX, im: None, conj: false }; n * n];
        match self.mode {
            KernelMode::Dense => {
                for (t, s) in slots.iter_mut().enumerate() {
                    *s = Slot { re: 2 * t, im: Some(2 * t + 1), conj: false };
                }
            }
            KernelMode::SingleRotation => {
                // Rows above the center, then the left half of the center row.
                let mut t = 0;
                for dy in -m..=0 {
                    for dx in -m..=m {
                        if dy == 0 && dx >= 0 {
                            break;
                        }
                        slots[idx(dy, dx)] = Slot { re: 2 * t, im: Some(2 * t + 1), conj: false };
                        slots[idx(-dy, -dx)] = Slot { re: 2 * t, im: Some(2 * t + 1), conj: true };
                        t += 1;
                    }
                }
                slots[idx(0, 0)] = Slot { re: 2 * t, im: None, conj: false };
            }
            KernelMode::MultipleRotation => {
                // Orbit representatives: dy <= -1, dx >= 0 (includes the north
                // arm). A quarter turn moves offset (dy, dx) to (-dx, dy).
                let mut t = 0;
                for dy in -m..=-1 {
                    for dx in 0..=m {
                        let mut p = (dy, dx);
                        for s in 0..4 {
                            slots[idx(p.0, p.1)] = Slot { re: 2 * t, im: Some(2 * t + 1), conj: s >= 2 };
                            p = (-p.1, p.0);
                        }
                        t += 1;
                    }
                }
                slots[idx(0, 0)] = Slot { re: 2 * t, im: None, conj: false };
            }
        }
        debug_assert!(slots.iter().all(|s| s.re != usize::MAX));
        slots
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub shape: KernelShape,
    pub free: Vec<f64>,
}

impl KernelParams {
    pub fn zeros(shape: KernelShape) -> Self {
        let free = vec![0.0; shape.free_len()];
        KernelParams { shape, free }
    }

    pub fn from_free(shape: KernelShape, free: Vec<f64>) -> Result<Self> {
        if free.len() != shape.free_len() {
            return Err(Error::shape(format!(
                "kernel expects {} free parameters, got {}",
                shape.free_len(),
                free.len()
            )));
        }
        Ok(KernelParams { shape, free })
    }

    /// Uniform in `(-a, a)` with `a = 1 / (c_in (2m+1)^2)`.
    pub fn init(shape: KernelShape, rng: &mut impl Rng) -> Self {
        let mut p = KernelParams::zeros(shape);
        init_free(&p.shape, &mut p.free, rng);
        p
    }
}

pub(crate) fn init_free(shape: &KernelShape, free: &mut [f64], rng: &mut impl Rng) {
    let a = 1.0 / (shape.c_in * shape.side() * shape.side()) as f64;
    for v in free.iter_mut() {
        *v = rng.random_range(-a..a);
    }
}

/// Complex kernel `c_in x c_out x groups x n x n`, zero frequency centered.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedKernel {
    pub shape: KernelShape,
    pub data: Array5<Complex64>,
}

impl MaterializedKernel {
    pub fn zeros(shape: KernelShape) -> Self {
        let n = shape.side();
        let data = Array5::zeros((shape.c_in, shape.c_out, shape.groups, n, n));
        MaterializedKernel { shape, data }
    }

    /// `true` when every plane satisfies `K[-k] == conj(K[k])` exactly.
    pub fn is_hermitian_exact(&self) -> bool {
        let n = self.shape.side();
        self.data.outer_iter().all(|a| {
            a.outer_iter().all(|b| {
                b.outer_iter().all(|p| {
                    (0..n).all(|i| (0..n).all(|j| p[[n - 1 - i, n - 1 - j]] == p[[i, j]].conj()))
                })
            })
        })
    }
}

fn check_free(shape: &KernelShape, free: &[f64]) -> Result<()> {
    if free.len() != shape.free_len() {
        return Err(Error::shape(format!(
            "kernel expects {} free parameters, got {}",
            shape.free_len(),
            free.len()
        )));
    }
    Ok(())
}

/// Fills the full complex kernel from its free parameters.
pub fn materialize(p: &KernelParams) -> Result<MaterializedKernel> {
    materialize_slice(&p.shape, &p.free)
}

pub(crate) fn materialize_slice(shape: &KernelShape, free: &[f64]) -> Result<MaterializedKernel> {
    check_free(shape, free)?;
    let slots = shape.slots();
    let slab = shape.slab_len();
    let mut out = MaterializedKernel::zeros(shape.clone());
    let bins = out.data.as_slice_mut().expect("standard layout");
    for (s, chunk) in bins.chunks_mut(slots.len()).enumerate() {
        let src = &free[s * slab..(s + 1) * slab];
        for (v, slot) in chunk.iter_mut().zip(&slots) {
            let re = src[slot.re];
            let im = slot.im.map_or(0.0, |i| if slot.conj { -src[i] } else { src[i] });
            *v = Complex64::new(re, im);
        }
    }
    Ok(out)
}

/// Adjoint of [`materialize`]: folds a cotangent on every bin back onto the
/// free slot it was read from, conjugating where the forward conjugated.
pub fn materialize_backward(p: &KernelParams, dk: &MaterializedKernel) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; p.free.len()];
    materialize_backward_into(&p.shape, dk, &mut grad)?;
    Ok(grad)
}

pub(crate) fn materialize_backward_into(shape: &KernelShape, dk: &MaterializedKernel, grad: &mut [f64]) -> Result<()> {
    check_free(shape, grad)?;
    if dk.shape != *shape {
        return Err(Error::shape("kernel cotangent shape differs from parameters"));
    }
    let slots = shape.slots();
    let slab = shape.slab_len();
    let bins = dk.data.as_slice().expect("standard layout");
    for (s, chunk) in bins.chunks(slots.len()).enumerate() {
        let dst = &mut grad[s * slab..(s + 1) * slab];
        for (v, slot) in chunk.iter().zip(&slots) {
            dst[slot.re] += v.re;
            if let Some(i) = slot.im {
                dst[i] += if slot.conj { -v.im } else { v.im };
            }
        }
    }
    Ok(())
}

/// Group action on a p4 kernel: slot `h` of the result is slot `h - s` of
/// the input, rotated by `s` quarter turns.
pub fn group_action_shift(k: &MaterializedKernel, s: i32) -> Result<MaterializedKernel> {
    if k.shape.groups != 4 {
        return Err(Error::NoGroupAxis);
    }
    let mut out = MaterializedKernel::zeros(k.shape.clone());
    for ci in 0..k.shape.c_in {
        for co in 0..k.shape.c_out {
            for h in 0..4 {
                let src = (h as i32 - s).rem_euclid(4) as usize;
                let plane = k.data.index_axis(Axis(0), ci);
                let plane = plane.index_axis(Axis(0), co);
                let rotated = rot90_plane(plane.index_axis(Axis(0), src), s);
                out.data
                    .index_axis_mut(Axis(0), ci)
                    .index_axis_mut(Axis(0), co)
                    .index_axis_mut(Axis(0), h)
                    .assign(&rotated);
            }
        }
    }
    Ok(out)
}
