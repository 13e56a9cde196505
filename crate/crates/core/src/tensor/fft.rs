use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{Array2, Array4, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::{check_modes, ComplexField, Field, SpectralBlock};
use crate::error::{Error, Result};

/// Largest imaginary part `ifft2` will silently discard.
pub const RESIDUE_LIMIT: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Runs `fft` over every contiguous chunk of `buf`.
fn run(fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
    if !buf.is_empty() {
        fft.process(buf);
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut Vec<Complex64>) {
    dst.clear();
    dst.resize(rows * cols, Complex64::new(0.0, 0.0));
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

fn transform_plane(buf: &mut Vec<Complex64>, h: usize, w: usize, direction: FftDirection) {
    let row = plan(w, direction);
    run(&row, buf);
    let mut t = Vec::new();
    transpose(buf, h, w, &mut t);
    let col = plan(h, direction);
    run(&col, &mut t);
    transpose(&t, w, h, buf);
}

/// Unnormalized forward DFT of one real plane.
pub fn fft2_plane(x: ArrayView2<'_, f64>) -> Array2<Complex64> {
    let (h, w) = x.dim();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_plane(&mut buf, h, w, FftDirection::Forward);
    Array2::from_shape_vec((h, w), buf).expect("plane shape")
}

fn fft2_plane_complex(x: ArrayView2<'_, Complex64>, direction: FftDirection) -> Array2<Complex64> {
    let (h, w) = x.dim();
    let mut buf: Vec<Complex64> = x.iter().copied().collect();
    transform_plane(&mut buf, h, w, direction);
    Array2::from_shape_vec((h, w), buf).expect("plane shape")
}

/// Normalized inverse DFT of one plane, complex result.
pub fn ifft2_plane(x: ArrayView2<'_, Complex64>) -> Array2<Complex64> {
    let (h, w) = x.dim();
    let scale = 1.0 / (h * w) as f64;
    let mut out = fft2_plane_complex(x, FftDirection::Inverse);
    out.mapv_inplace(|v| v * scale);
    out
}

/// Forward 2D DFT applied to every `(b, c)` plane.
pub fn fft2(f: &Field) -> ComplexField {
    let (b, c, h, w) = f.shape();
    let mut out = Array4::zeros((b, c, h, w));
    for (src, mut dst) in f.data.outer_iter().zip(out.outer_iter_mut()) {
        for (p, mut q) in src.outer_iter().zip(dst.outer_iter_mut()) {
            q.assign(&fft2_plane(p));
        }
    }
    ComplexField { data: out }
}

/// Normalized inverse transform keeping the complex result.
pub fn ifft2_complex(f: &ComplexField) -> ComplexField {
    let (b, c, h, w) = f.shape();
    let mut out = Array4::zeros((b, c, h, w));
    for (src, mut dst) in f.data.outer_iter().zip(out.outer_iter_mut()) {
        for (p, mut q) in src.outer_iter().zip(dst.outer_iter_mut()) {
            q.assign(&ifft2_plane(p));
        }
    }
    ComplexField { data: out }
}

/// Normalized inverse transform of a spectrum that should be Hermitian.
///
/// Fails with [`Error::ImaginaryResidue`] when the largest imaginary part
/// reaches [`RESIDUE_LIMIT`].
pub fn ifft2(f: &ComplexField) -> Result<Field> {
    let z = ifft2_complex(f);
    let max = z.data.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
    if max >= RESIDUE_LIMIT {
        return Err(Error::ImaginaryResidue { max });
    }
    Ok(Field::new(z.data.mapv(|v| v.re)))
}

/// Normalized inverse transform, real part only.
pub fn ifft2_real_part(f: &ComplexField) -> Field {
    Field::new(ifft2_complex(f).data.mapv(|v| v.re))
}

/// Extracts the centered `(2m+1)^2` block from an fftshifted spectrum.
pub fn crop_modes(f: &ComplexField, m: usize) -> Result<SpectralBlock> {
    let (b, c, h, w) = f.shape();
    check_modes(m, h, w)?;
    let n = 2 * m + 1;
    let (cy, cx) = (h / 2, w / 2);
    let data = f
        .data
        .slice(ndarray::s![.., .., cy - m..cy - m + n, cx - m..cx - m + n])
        .to_owned();
    debug_assert_eq!(data.dim(), (b, c, n, n));
    Ok(SpectralBlock { data, m })
}

/// Embeds a block into a zero, fftshifted `h x w` spectrum.
pub fn pad_modes(block: &SpectralBlock, h: usize, w: usize) -> Result<ComplexField> {
    let m = block.m;
    check_modes(m, h, w)?;
    let (b, c, n, _) = block.data.dim();
    let (cy, cx) = (h / 2, w / 2);
    let mut out = Array4::zeros((b, c, h, w));
    out.slice_mut(ndarray::s![.., .., cy - m..cy - m + n, cx - m..cx - m + n])
        .assign(&block.data);
    Ok(ComplexField { data: out })
}

/// `crop_modes(fftshift(fft2(x)), m)` for one plane, without transforming
/// the columns that are discarded.
pub fn forward_block(x: ArrayView2<'_, f64>, m: usize) -> Array2<Complex64> {
    let (h, w) = x.dim();
    let n = 2 * m + 1;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    run(&plan(w, FftDirection::Forward), &mut buf);
    // Gather the retained columns (frequencies -m..=m) as contiguous rows.
    let mut cols = vec![Complex64::new(0.0, 0.0); n * h];
    for b in 0..n {
        let kx = (b + w - m) % w;
        for y in 0..h {
            cols[b * h + y] = buf[y * w + kx];
        }
    }
    run(&plan(h, FftDirection::Forward), &mut cols);
    let mut out = Array2::zeros((n, n));
    for a in 0..n {
        let ky = (a + h - m) % h;
        for b in 0..n {
            out[[a, b]] = cols[b * h + ky];
        }
    }
    out
}

/// `ifft2(ifftshift(pad_modes(block)))` for one plane, complex result.
pub fn inverse_block_complex(block: ArrayView2<'_, Complex64>, h: usize, w: usize) -> Array2<Complex64> {
    let n = block.dim().0;
    let m = n / 2;
    let zero = Complex64::new(0.0, 0.0);
    let mut cols = vec![zero; n * h];
    for b in 0..n {
        for a in 0..n {
            cols[b * h + (a + h - m) % h] = block[[a, b]];
        }
    }
    run(&plan(h, FftDirection::Inverse), &mut cols);
    let mut buf = vec![zero; h * w];
    for b in 0..n {
        let kx = (b + w - m) % w;
        for y in 0..h {
            buf[y * w + kx] = cols[b * h + y];
        }
    }
    run(&plan(w, FftDirection::Inverse), &mut buf);
    let scale = 1.0 / (h * w) as f64;
    Array2::from_shape_vec((h, w), buf.into_iter().map(|v| v * scale).collect()).expect("plane shape")
}

/// Real part of [`inverse_block_complex`].
pub fn inverse_block(block: ArrayView2<'_, Complex64>, h: usize, w: usize) -> Array2<f64> {
    inverse_block_complex(block, h, w).mapv(|v| v.re)
}
