//! Per-sample building blocks: expanded pointwise (1x1 group) convolutions and
//! the truncated spectral convolution, each with its reverse pass.
//!
//! Latent samples are `channels x pixels` matrices, pixels row-major.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;

use super::Activation;
use crate::error::{Error, Result};
use crate::kernel::{group_action_shift, materialize_backward_into, KernelShape, MaterializedKernel};
use crate::tensor::{forward_block, inverse_block_complex, RESIDUE_LIMIT};

/// Dense `c_out x c_in` matrix plus bias, applied at every pixel.
#[derive(Debug, Clone)]
pub(crate) struct Pointwise {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct PointwiseGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Pointwise {
    pub fn dense(weight: &[f64], bias: &[f64], c_out: usize, c_in: usize) -> Self {
        let w = Array2::from_shape_vec((c_out, c_in), weight.to_vec()).expect("weight shape");
        Pointwise { w, b: Array1::from(bias.to_vec()) }
    }

    /// 1x1 group convolution: `W[o, i, (g' - g) mod G]` couples output slot
    /// `g` with input slot `g'`; the bias is shared across slots.
    pub fn group(weight: &[f64], bias: &[f64], c_out: usize, c_in: usize, groups: usize) -> Self {
        let mut w = Array2::zeros((c_out * groups, c_in * groups));
        for o in 0..c_out {
            for i in 0..c_in {
                for g in 0..groups {
                    for gp in 0..groups {
                        let d = (gp + groups - g) % groups;
                        w[[o * groups + g, i * groups + gp]] = weight[(o * c_in + i) * groups + d];
                    }
                }
            }
        }
        let b = Array1::from_shape_fn(c_out * groups, |k| bias[k / groups]);
        Pointwise { w, b }
    }

    pub fn zero_grad(&self) -> PointwiseGrad {
        PointwiseGrad { w: Array2::zeros(self.w.dim()), b: Array1::zeros(self.b.len()) }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = self.w.dot(&x);
        y += &self.b.view().insert_axis(Axis(1));
        y
    }

    pub fn backward(&self, x: ArrayView2<'_, f64>, gy: ArrayView2<'_, f64>, grad: &mut PointwiseGrad) -> Array2<f64> {
        grad.w += &gy.dot(&x.t());
        grad.b += &gy.sum_axis(Axis(1));
        self.w.t().dot(&gy)
    }
}

impl PointwiseGrad {
    pub fn fold_dense(&self, weight: &mut [f64], bias: &mut [f64]) {
        for (d, s) in weight.iter_mut().zip(self.w.iter()) {
            *d += s;
        }
        for (d, s) in bias.iter_mut().zip(self.b.iter()) {
            *d += s;
        }
    }

    /// Adjoint of [`Pointwise::group`].
    pub fn fold_group(&self, weight: &mut [f64], bias: &mut [f64], c_out: usize, c_in: usize, groups: usize) {
        for o in 0..c_out {
            for i in 0..c_in {
                for g in 0..groups {
                    for gp in 0..groups {
                        let d = (gp + groups - g) % groups;
                        weight[(o * c_in + i) * groups + d] += self.w[[o * groups + g, i * groups + gp]];
                    }
                }
            }
        }
        for (k, v) in self.b.iter().enumerate() {
            bias[k / groups] += v;
        }
    }
}

/// Spectral convolution over the retained `(2m+1)^2` modes, stored as one
/// complex `C x C` matrix per frequency bin (`[bin][out][in]`).
#[derive(Debug, Clone)]
pub(crate) struct Spectral {
    pub m: usize,
    pub channels: usize,
    pub mat: Vec<Complex64>,
    pub hermitian: bool,
}

impl Spectral {
    pub fn bins(&self) -> usize {
        (2 * self.m + 1) * (2 * self.m + 1)
    }

    /// Output slot `(co, g)` reads input slot `(ci, g')` through
    /// `group_action_shift(K, g)[ci, co, g']`.
    pub fn from_kernel(k: &MaterializedKernel) -> Result<Self> {
        let s = &k.shape;
        let g_n = s.groups;
        if s.c_in != s.c_out {
            return Err(Error::shape("latent spectral kernels must be square in channels"));
        }
        let c = s.c_in * g_n;
        let n = s.side();
        let bins = n * n;
        let mut mat = vec![Complex64::new(0.0, 0.0); bins * c * c];
        for g in 0..g_n {
            let e = if g_n == 4 { group_action_shift(k, g as i32)? } else { k.clone() };
            for ((ci, co, gp, a, b), v) in e.data.indexed_iter() {
                let bin = a * n + b;
                mat[(bin * c + co * g_n + g) * c + ci * g_n + gp] = *v;
            }
        }
        Ok(Spectral { m: s.m, channels: c, mat, hermitian: s.mode.is_hermitian() })
    }

    pub fn zero_grad(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.mat.len()]
    }

    /// Returns the spatial output and the retained input modes (bin-major).
    pub fn forward(&self, f: ArrayView2<'_, f64>, h: usize, w: usize) -> Result<(Array2<f64>, Vec<Complex64>)> {
        let c = self.channels;
        let n = 2 * self.m + 1;
        let bins = self.bins();
        let mut xb = vec![Complex64::new(0.0, 0.0); bins * c];
        for (i, row) in f.outer_iter().enumerate() {
            let plane = row.into_shape_with_order((h, w)).expect("plane");
            let blk = forward_block(plane, self.m);
            for (bin, v) in blk.iter().enumerate() {
                xb[bin * c + i] = *v;
            }
        }
        let mut yb = vec![Complex64::new(0.0, 0.0); bins * c];
        for bin in 0..bins {
            let xs = &xb[bin * c..(bin + 1) * c];
            let mat = &self.mat[bin * c * c..(bin + 1) * c * c];
            for (o, y) in yb[bin * c..(bin + 1) * c].iter_mut().enumerate() {
                let row = &mat[o * c..(o + 1) * c];
                *y = row.iter().zip(xs).map(|(a, b)| a * b).sum();
            }
        }
        let mut out = Array2::zeros((c, h * w));
        let (mut residue, mut scale) = (0.0f64, 1.0f64);
        for (o, mut dst) in out.outer_iter_mut().enumerate() {
            let blk = Array2::from_shape_fn((n, n), |(a, b)| yb[(a * n + b) * c + o]);
            let z = inverse_block_complex(blk.view(), h, w);
            for (d, v) in dst.iter_mut().zip(z.iter()) {
                *d = v.re;
                residue = residue.max(v.im.abs());
                scale = scale.max(v.re.abs());
            }
        }
        // roundoff grows with the field, so the limit is relative past unit scale
        if self.hermitian && residue >= RESIDUE_LIMIT * scale {
            return Err(Error::ImaginaryResidue { max: residue });
        }
        Ok((out, xb))
    }

    /// Accumulates the per-bin matrix cotangent into `grad` and returns the
    /// input cotangent.
    pub fn backward(&self, xb: &[Complex64], gs: ArrayView2<'_, f64>, h: usize, w: usize, grad: &mut [Complex64]) -> Array2<f64> {
        let c = self.channels;
        let n = 2 * self.m + 1;
        let bins = self.bins();
        let npix = (h * w) as f64;
        let mut gy = vec![Complex64::new(0.0, 0.0); bins * c];
        for (o, row) in gs.outer_iter().enumerate() {
            let plane = row.into_shape_with_order((h, w)).expect("plane");
            let blk = forward_block(plane, self.m);
            for (bin, v) in blk.iter().enumerate() {
                gy[bin * c + o] = v / npix;
            }
        }
        let mut gx = vec![Complex64::new(0.0, 0.0); bins * c];
        for bin in 0..bins {
            let xs = &xb[bin * c..(bin + 1) * c];
            let gys = &gy[bin * c..(bin + 1) * c];
            let mat = &self.mat[bin * c * c..(bin + 1) * c * c];
            let gm = &mut grad[bin * c * c..(bin + 1) * c * c];
            let gxs = &mut gx[bin * c..(bin + 1) * c];
            for (o, &g_o) in gys.iter().enumerate() {
                for i in 0..c {
                    gm[o * c + i] += g_o * xs[i].conj();
                    gxs[i] += mat[o * c + i].conj() * g_o;
                }
            }
        }
        let mut out = Array2::zeros((c, h * w));
        for (i, mut dst) in out.outer_iter_mut().enumerate() {
            let blk = Array2::from_shape_fn((n, n), |(a, b)| gx[(a * n + b) * c + i]);
            let z = inverse_block_complex(blk.view(), h, w);
            for (d, v) in dst.iter_mut().zip(z.iter()) {
                *d = v.re * npix;
            }
        }
        out
    }

    /// Adjoint of [`Spectral::from_kernel`] followed by the adjoint of
    /// materialization, accumulated into the free-parameter gradient.
    pub fn fold(grad: &[Complex64], shape: &KernelShape, free_grad: &mut [f64]) -> Result<()> {
        let g_n = shape.groups;
        let c = shape.c_in * g_n;
        let n = shape.side();
        let mut total = MaterializedKernel::zeros(shape.clone());
        for g in 0..g_n {
            let mut e = MaterializedKernel::zeros(shape.clone());
            for ((ci, co, gp, a, b), v) in e.data.indexed_iter_mut() {
                let bin = a * n + b;
                *v = grad[(bin * c + co * g_n + g) * c + ci * g_n + gp];
            }
            let back = if g_n == 4 { group_action_shift(&e, -(g as i32))? } else { e };
            total.data += &back.data;
        }
        materialize_backward_into(shape, &total, free_grad)
    }
}

/// Everything one MC-Fourier layer needs after materialization.
#[derive(Debug, Clone)]
pub(crate) struct PreparedLayer {
    pub spectral: Spectral,
    pub residual: Pointwise,
    pub mlp1: Pointwise,
    pub mlp2: Pointwise,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerGrad {
    pub spectral: Vec<Complex64>,
    pub residual: PointwiseGrad,
    pub mlp1: PointwiseGrad,
    pub mlp2: PointwiseGrad,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerTape {
    input: Array2<f64>,
    modes: Vec<Complex64>,
    spectral_out: Array2<f64>,
    pre_act: Array2<f64>,
}

impl PreparedLayer {
    pub fn zero_grad(&self) -> LayerGrad {
        LayerGrad {
            spectral: self.spectral.zero_grad(),
            residual: self.residual.zero_grad(),
            mlp1: self.mlp1.zero_grad(),
            mlp2: self.mlp2.zero_grad(),
        }
    }

    /// `W f + MLP(F^-1(F(f) . R))` on one padded latent sample.
    pub fn forward(&self, act: Activation, f: Array2<f64>, h: usize, w: usize) -> Result<(Array2<f64>, LayerTape)> {
        let (s, modes) = self.spectral.forward(f.view(), h, w)?;
        let pre_act = self.mlp1.forward(s.view());
        let hidden = pre_act.mapv(|v| act.apply(v));
        let mut out = self.mlp2.forward(hidden.view());
        out += &self.residual.forward(f.view());
        Ok((out, LayerTape { input: f, modes, spectral_out: s, pre_act }))
    }

    pub fn backward(&self, act: Activation, tape: &LayerTape, gout: ArrayView2<'_, f64>, h: usize, w: usize, grad: &mut LayerGrad) -> Array2<f64> {
        let mut gin = self.residual.backward(tape.input.view(), gout, &mut grad.residual);
        let hidden = tape.pre_act.mapv(|v| act.apply(v));
        let mut g_hidden = self.mlp2.backward(hidden.view(), gout, &mut grad.mlp2);
        ndarray::Zip::from(&mut g_hidden).and(&tape.pre_act).for_each(|g, &a| *g *= act.derivative(a));
        let gs = self.mlp1.backward(tape.spectral_out.view(), g_hidden.view(), &mut grad.mlp1);
        gin += &self.spectral.backward(&tape.modes, gs.view(), h, w, &mut grad.spectral);
        gin
    }
}
