use ndarray::{Array2, Array4, ArrayView2};

use super::{ComplexField, Field};

fn roll_plane<T: Clone>(x: ArrayView2<'_, T>, sy: usize, sx: usize) -> Array2<T> {
    let (h, w) = x.dim();
    Array2::from_shape_fn((h, w), |(y, xx)| x[[(y + h - sy) % h, (xx + w - sx) % w]].clone())
}

fn map_planes<T: Clone>(a: &Array4<T>, f: impl Fn(ArrayView2<'_, T>) -> Array2<T>) -> Array4<T> {
    let (b, c, _, _) = a.dim();
    let planes: Vec<Array2<T>> = a
        .outer_iter()
        .flat_map(|s| s.outer_iter().map(&f).collect::<Vec<_>>())
        .collect();
    let (h, w) = planes.first().map(|p| p.dim()).unwrap_or((0, 0));
    let mut flat = Vec::with_capacity(b * c * h * w);
    for p in planes {
        flat.extend(p.into_iter());
    }
    Array4::from_shape_vec((b, c, h, w), flat).expect("plane shapes agree")
}

/// Moves the zero frequency from index 0 to index `n / 2` on both axes.
pub fn fftshift_plane<T: Clone>(x: ArrayView2<'_, T>) -> Array2<T> {
    let (h, w) = x.dim();
    roll_plane(x, h / 2, w / 2)
}

/// Inverse of [`fftshift_plane`], for odd and even sizes.
pub fn ifftshift_plane<T: Clone>(x: ArrayView2<'_, T>) -> Array2<T> {
    let (h, w) = x.dim();
    roll_plane(x, h - h / 2, w - w / 2)
}

pub fn fftshift(f: &ComplexField) -> ComplexField {
    ComplexField { data: map_planes(&f.data, fftshift_plane) }
}

pub fn ifftshift(f: &ComplexField) -> ComplexField {
    ComplexField { data: map_planes(&f.data, ifftshift_plane) }
}

/// Counter-clockwise quarter turns of a plane (`numpy.rot90` convention):
/// `rot90(a, 1)[i][j] = a[j][w - 1 - i]`.
pub fn rot90_plane<T: Clone>(a: ArrayView2<'_, T>, s: i32) -> Array2<T> {
    let (h, w) = a.dim();
    match s.rem_euclid(4) {
        0 => a.to_owned(),
        1 => Array2::from_shape_fn((w, h), |(i, j)| a[[j, w - 1 - i]].clone()),
        2 => Array2::from_shape_fn((h, w), |(i, j)| a[[h - 1 - i, w - 1 - j]].clone()),
        _ => Array2::from_shape_fn((w, h), |(i, j)| a[[h - 1 - j, i]].clone()),
    }
}

/// Applies [`rot90_plane`] to the trailing two axes.
pub fn rot90<T: Clone>(a: &Array4<T>, s: i32) -> Array4<T> {
    map_planes(a, |p| rot90_plane(p, s))
}

/// Reflection through the center entry: `out[i][j] = a[h-1-i][w-1-j]`.
pub fn point_reflect_plane<T: Clone>(a: ArrayView2<'_, T>) -> Array2<T> {
    rot90_plane(a, 2)
}

/// Cyclic shift: `out[y][x] = f[(y - gy) mod h][(x - gx) mod w]`.
pub fn shift2(f: &Field, gy: i64, gx: i64) -> Field {
    let (_, _, h, w) = f.shape();
    let sy = gy.rem_euclid(h as i64) as usize;
    let sx = gx.rem_euclid(w as i64) as usize;
    Field::with_spacing(map_planes(&f.data, |p| roll_plane(p, sy, sx)), f.dx, f.dy)
}
