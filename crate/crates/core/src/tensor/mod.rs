//! Dense 2D-grid arrays, transforms and index permutations.
//!
//! Every array here is laid out `batch x channel x height x width`, row-major.
//! Real fields carry their grid spacing; spectra do not.

mod fft;
mod perm;

pub use fft::{
    crop_modes, fft2, fft2_plane, forward_block, ifft2, ifft2_complex, ifft2_plane, ifft2_real_part,
    inverse_block, inverse_block_complex, pad_modes, RESIDUE_LIMIT,
};
pub use perm::{
    fftshift, fftshift_plane, ifftshift, ifftshift_plane, point_reflect_plane, rot90, rot90_plane,
    shift2,
};

use ndarray::{Array4, ArrayView3, ArrayViewMut3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real field `b x c x H x W` with grid spacing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub data: Array4<f64>,
    pub dx: f64,
    pub dy: f64,
}

impl Field {
    pub fn new(data: Array4<f64>) -> Self {
        Field { data, dx: 1.0, dy: 1.0 }
    }

    pub fn with_spacing(data: Array4<f64>, dx: f64, dy: f64) -> Self {
        Field { data, dx, dy }
    }

    pub fn zeros(b: usize, c: usize, h: usize, w: usize) -> Self {
        Field::new(Array4::zeros((b, c, h, w)))
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn batch(&self) -> usize {
        self.data.dim().0
    }

    pub fn channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn height(&self) -> usize {
        self.data.dim().2
    }

    pub fn width(&self) -> usize {
        self.data.dim().3
    }

    pub fn sample(&self, b: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), b)
    }

    pub fn sample_mut(&mut self, b: usize) -> ArrayViewMut3<'_, f64> {
        self.data.index_axis_mut(ndarray::Axis(0), b)
    }

    /// Copies spacing from `other`, keeping this field's data.
    pub fn spaced_like(mut self, other: &Field) -> Self {
        self.dx = other.dx;
        self.dy = other.dy;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Complex spectrum with the same layout as [`Field`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub data: Array4<Complex64>,
}

impl ComplexField {
    pub fn zeros(b: usize, c: usize, h: usize, w: usize) -> Self {
        ComplexField { data: Array4::zeros((b, c, h, w)) }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }
}

/// Centered `(2m+1) x (2m+1)` block of retained Fourier modes; the center
/// entry is the zero frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub data: Array4<Complex64>,
    pub m: usize,
}

impl SpectralBlock {
    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    pub fn zeros(b: usize, c: usize, m: usize) -> Self {
        let n = 2 * m + 1;
        SpectralBlock { data: Array4::zeros((b, c, n, n)), m }
    }

    pub fn from_data(data: Array4<Complex64>) -> Result<Self> {
        let (_, _, h, w) = data.dim();
        if h != w || h % 2 == 0 {
            return Err(Error::shape(format!("spectral block must be odd and square, got {h}x{w}")));
        }
        Ok(SpectralBlock { data, m: h / 2 })
    }

    /// Rotates every plane by `s` quarter turns about the center bin.
    pub fn rot90(&self, s: i32) -> SpectralBlock {
        SpectralBlock { data: rot90(&self.data, s), m: self.m }
    }
}

pub(crate) fn check_modes(m: usize, h: usize, w: usize) -> Result<()> {
    if 2 * m + 1 > h.min(w) {
        Err(Error::ModeOverflow { m, h, w })
    } else {
        Ok(())
    }
}
