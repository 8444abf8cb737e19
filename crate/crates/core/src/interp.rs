//! Separable bicubic interpolation on uniform grids.
//!
//! The 1-D rule is 4-point Lagrange cubic interpolation (cubic convolution
//! through the four nearest nodes), fourth-order accurate for smooth data.
//! Two boundary treatments are provided: periodic wrap for torus grids
//! (boundary kernels, standardizer resampling) and index clamping for
//! bounded patch grids. Coordinates are given in continuous grid units: the
//! value at coordinate `u` lives between nodes `floor(u)` and `floor(u)+1`.

use num_traits::Float;

/// Lagrange cubic weights for four consecutive nodes at offsets {0, 1, 2, 3}
/// evaluated at position `t` relative to the first node. Interior use has
/// t ∈ [1, 2]; any real t is valid and extrapolates the same cubic.
#[inline]
fn cubic_weights<T: Float>(t: T) -> [T; 4] {
    let one = T::one();
    let two = one + one;
    let three = two + one;
    let six = three + three;
    let t1 = t - one;
    let t2 = t - two;
    let t3 = t - three;
    [
        -t1 * t2 * t3 / six,
        t * t2 * t3 / two,
        -t * t1 * t3 / two,
        t * t1 * t2 / six,
    ]
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Interpolate a periodic row-major `rows × cols` grid at continuous grid
/// coordinates (`u` along rows, `v` along columns).
pub fn periodic_bicubic<T: Float>(values: &[T], rows: usize, cols: usize, u: T, v: T) -> T {
    debug_assert_eq!(values.len(), rows * cols);
    let ub = u.floor() - T::one();
    let vb = v.floor() - T::one();
    let wu = cubic_weights(u - ub);
    let wv = cubic_weights(v - vb);
    let ui = ub.to_f64().unwrap() as isize;
    let vi = vb.to_f64().unwrap() as isize;
    let mut acc = T::zero();
    for (du, &wru) in wu.iter().enumerate() {
        let r = wrap(ui + du as isize, rows);
        let row = &values[r * cols..(r + 1) * cols];
        let mut line = T::zero();
        for (dv, &wcv) in wv.iter().enumerate() {
            let c = wrap(vi + dv as isize, cols);
            line = line + wcv * row[c];
        }
        acc = acc + wru * line;
    }
    acc
}

/// Stencil base for a bounded axis: shift the whole 4-node window inward at
/// the edges so its nodes stay distinct (keeps cubic exactness everywhere).
#[inline]
fn bounded_base(coord: f64, n: usize) -> isize {
    let b = coord.floor() as isize - 1;
    b.clamp(0, n as isize - 4)
}

/// Interpolate a bounded row-major grid (needs at least 4 nodes per axis).
pub fn clamped_bicubic<T: Float>(values: &[T], rows: usize, cols: usize, u: T, v: T) -> T {
    debug_assert_eq!(values.len(), rows * cols);
    debug_assert!(rows >= 4 && cols >= 4, "bicubic needs ≥ 4 nodes per axis");
    let ui = bounded_base(u.to_f64().unwrap(), rows);
    let vi = bounded_base(v.to_f64().unwrap(), cols);
    let wu = cubic_weights(u - T::from(ui).unwrap());
    let wv = cubic_weights(v - T::from(vi).unwrap());
    let mut acc = T::zero();
    for (du, &wru) in wu.iter().enumerate() {
        let r = ui as usize + du;
        let row = &values[r * cols..(r + 1) * cols];
        let mut line = T::zero();
        for (dv, &wcv) in wv.iter().enumerate() {
            line = line + wcv * row[vi as usize + dv];
        }
        acc = acc + wru * line;
    }
    acc
}

/// Resample a periodic square torus grid (first sample at angle 0, spacing
/// 2π/n) onto a new size with the same convention.
pub fn resample_periodic_square<T: Float>(values: &[T], n_old: usize, n_new: usize) -> Vec<T> {
    assert_eq!(values.len(), n_old * n_old);
    if n_old == n_new {
        return values.to_vec();
    }
    let ratio = T::from(n_old).unwrap() / T::from(n_new).unwrap();
    let mut out = Vec::with_capacity(n_new * n_new);
    for a in 0..n_new {
        let u = T::from(a).unwrap() * ratio;
        for b in 0..n_new {
            let v = T::from(b).unwrap() * ratio;
            out.push(periodic_bicubic(values, n_old, n_old, u, v));
        }
    }
    out
}
