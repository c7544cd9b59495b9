//! Differential, integral and interpolation kernels on tensor grids.

use rustfft::num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{DensityField, ScalarField, UniformGrid, MAX_DIMS, MIN_POINTS};
use crate::error::{Error, Result};
use crate::real::Real;

const CHUNK: usize = 1 << 14;

/// Base node of every grid line running along `axis`.
pub(crate) fn line_starts<T: Real>(grid: &UniformGrid<T>, axis: usize) -> impl Iterator<Item = usize> {
    let n = grid.points(axis);
    let stride = grid.strides()[axis];
    let outer = grid.len() / (n * stride);
    (0..outer).flat_map(move |o| (0..stride).map(move |i| o * n * stride + i))
}

/// Product of trapezoid weights of every axis except `axis`, for the line
/// starting at `start`.
pub(crate) fn line_weight<T: Real>(
    grid: &UniformGrid<T>,
    axis_weights: &[Vec<T>],
    axis: usize,
    start: usize,
) -> T {
    let mut idx = [0usize; MAX_DIMS];
    grid.multi_index(start, &mut idx[..grid.dims()]);
    (0..grid.dims())
        .filter(|&a| a != axis)
        .fold(T::one(), |w, a| w * axis_weights[a][idx[a]])
}

fn check_resolution<T: Real>(grid: &UniformGrid<T>) -> Result<()> {
    if let Some(a) = (0..grid.dims()).find(|&a| grid.points(a) < MIN_POINTS) {
        return Err(Error::InvalidGrid(format!(
            "axis {a} has fewer than {MIN_POINTS} points"
        )));
    }
    Ok(())
}

/// Partial derivatives along every axis: central differences in the interior,
/// one-sided second-order differences at the two ends.
pub fn gradient<T: Real>(field: &ScalarField<T>) -> Result<Vec<ScalarField<T>>> {
    let grid = field.grid();
    check_resolution(grid)?;
    let f = field.values();
    let strides = grid.strides();
    let half = T::lit(0.5);
    (0..grid.dims())
        .map(|axis| {
            let n = grid.points(axis);
            let s = strides[axis];
            let inv = half / grid.spacing(axis);
            let mut out = vec![T::zero(); f.len()];
            for start in line_starts(grid, axis) {
                let at = |i: usize| f[start + i * s];
                out[start] = (-T::lit(3.0) * at(0) + T::lit(4.0) * at(1) - at(2)) * inv;
                for i in 1..n - 1 {
                    out[start + i * s] = (at(i + 1) - at(i - 1)) * inv;
                }
                out[start + (n - 1) * s] =
                    (T::lit(3.0) * at(n - 1) - T::lit(4.0) * at(n - 2) + at(n - 3)) * inv;
            }
            ScalarField::new(grid.clone(), out)
        })
        .collect()
}

/// (2d+1)-point Laplacian with zero ghost values outside the box.
pub fn laplacian<T: Real>(field: &ScalarField<T>) -> Result<ScalarField<T>> {
    let grid = field.grid();
    check_resolution(grid)?;
    let f = field.values();
    let strides = grid.strides();
    let mut out = vec![T::zero(); f.len()];
    let two = T::lit(2.0);
    for axis in 0..grid.dims() {
        let n = grid.points(axis);
        let s = strides[axis];
        let h = grid.spacing(axis);
        let inv = T::one() / (h * h);
        for start in line_starts(grid, axis) {
            for i in 0..n {
                let k = start + i * s;
                let left = if i > 0 { f[k - s] } else { T::zero() };
                let right = if i + 1 < n { f[k + s] } else { T::zero() };
                out[k] = out[k] + (left - two * f[k] + right) * inv;
            }
        }
    }
    ScalarField::new(grid.clone(), out)
}

/// Tensor trapezoid rule of `field` (times `weight` when given).
pub fn integrate<T: Real>(field: &ScalarField<T>, weight: Option<&ScalarField<T>>) -> Result<T> {
    let w = field.grid().weights();
    match weight {
        None => Ok(field
            .values()
            .iter()
            .zip(&w)
            .map(|(&f, &w)| f * w)
            .sum()),
        Some(g) => {
            field.grid().ensure_same(g.grid())?;
            Ok(field
                .values()
                .iter()
                .zip(g.values())
                .zip(&w)
                .map(|((&f, &g), &w)| f * g * w)
                .sum())
        }
    }
}

/// Trapezoid L² inner product.
pub fn inner_product<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<T> {
    integrate(a, Some(b))
}

/// Discrete Dirichlet energy `∫|∂_axis φ|²`: forward differences on every
/// edge of the axis, including the two edges to the zero ghost nodes, each
/// weighted by `h` times the trapezoid weights of the remaining axes.
///
/// This is exactly `<φ, -∂²φ>` for the ghost-zero stencil of [`laplacian`]
/// up to the half weights of boundary nodes.
pub fn dirichlet_form<T: Real>(phi: &ScalarField<T>, axis: usize) -> Result<T> {
    let grid = phi.grid();
    if axis >= grid.dims() {
        return Err(Error::InvalidAxes(format!("axis {axis} out of range")));
    }
    let f = phi.values();
    let n = grid.points(axis);
    let s = grid.strides()[axis];
    let h = grid.spacing(axis);
    let aw: Vec<Vec<T>> = (0..grid.dims()).map(|a| grid.axis_weights(a)).collect();
    let mut total = T::zero();
    for start in line_starts(grid, axis) {
        let w = line_weight(grid, &aw, axis, start);
        let first = f[start];
        let last = f[start + (n - 1) * s];
        let mut line = first * first + last * last;
        for i in 0..n - 1 {
            let d = f[start + (i + 1) * s] - f[start + i * s];
            line = line + d * d;
        }
        total = total + w * line;
    }
    Ok(total / h)
}

/// Marginal density on `kept_axes` (trapezoid integration over the others),
/// renormalized to unit mass. The result lists axes in increasing order.
pub fn marginalize<T: Real>(density: &DensityField<T>, kept_axes: &[usize]) -> Result<DensityField<T>> {
    let grid = density.grid();
    let dims = grid.dims();
    let mut kept: Vec<usize> = kept_axes.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.len() != kept_axes.len() || kept.iter().any(|&a| a >= dims) {
        return Err(Error::InvalidAxes(format!(
            "{kept_axes:?} is not a nonempty subset of 0..{dims}"
        )));
    }
    if kept.len() == dims {
        return Ok(density.clone());
    }
    let sub = grid.sub_grid(&kept)?;
    let aw: Vec<Vec<T>> = (0..dims).map(|a| grid.axis_weights(a)).collect();
    let dropped: Vec<usize> = (0..dims).filter(|a| !kept.contains(a)).collect();
    let mut out = vec![T::zero(); sub.len()];
    let mut idx = [0usize; MAX_DIMS];
    let mut sub_idx = [0usize; MAX_DIMS];
    for (k, &rho) in density.values().iter().enumerate() {
        grid.multi_index(k, &mut idx[..dims]);
        let w = dropped.iter().fold(T::one(), |w, &a| w * aw[a][idx[a]]);
        for (j, &a) in kept.iter().enumerate() {
            sub_idx[j] = idx[a];
        }
        let target = sub.linear_index(&sub_idx[..kept.len()]);
        out[target] = out[target] + w * rho;
    }
    DensityField::new(ScalarField::new(sub, out)?)
}

/// Linear convolution `(f * k)(x_i) = h Σ_j f(x_j) k(x_i - x_j)` of two 1D
/// fields on the same spacing, evaluated by zero-padded FFT and truncated to
/// the grid of `field`. Kernel nodes must sit on integer multiples of `h`
/// relative to the field's nodes; kernel values outside its grid are zero.
pub fn convolve<T: Real>(field: &ScalarField<T>, kernel: &ScalarField<T>) -> Result<ScalarField<T>> {
    let fg = field.grid();
    let kg = kernel.grid();
    if fg.dims() != 1 || kg.dims() != 1 {
        return Err(Error::UnsupportedDimension(
            "convolution is implemented for 1D fields".into(),
        ));
    }
    let h = fg.spacing(0);
    let hk = kg.spacing(0);
    if ((h - hk) / h).abs() > T::tol(1e-10) {
        return Err(Error::IncompatibleGrids(format!(
            "field spacing {h} differs from kernel spacing {hk}"
        )));
    }
    // kernel node m sits at offset (m - shift) * h
    let shift_real = -kg.lower(0) / h;
    let shift = shift_real.round();
    if (shift_real - shift).abs() > T::lit(1e-6) || shift < T::zero() {
        return Err(Error::IncompatibleGrids(
            "kernel nodes are not aligned with field spacing".into(),
        ));
    }
    let shift = shift.to_usize().unwrap_or(0);
    let m = fg.points(0);
    let kn = kg.points(0);
    let len = m + kn - 1;
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let pad = |v: &[T]| {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); len];
        for (b, &x) in buf.iter_mut().zip(v) {
            b.re = x;
        }
        buf
    };
    let mut a = pad(field.values());
    let mut b = pad(kernel.values());
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = *x * *y;
    }
    inv.process(&mut a);
    let scale = h / T::from_usize_lossy(len);
    let out = (0..m)
        .map(|i| {
            let n = i + shift;
            if n < len {
                a[n].re * scale
            } else {
                T::zero()
            }
        })
        .collect();
    ScalarField::new(fg.clone(), out)
}

/// Multilinear interpolation at a point inside the grid box.
pub fn interpolate<T: Real>(field: &ScalarField<T>, point: &[T]) -> Result<T> {
    let grid = field.grid();
    let dims = grid.dims();
    if point.len() != dims {
        return Err(Error::UnsupportedDimension(format!(
            "point has {} coordinates, grid has {dims} axes",
            point.len()
        )));
    }
    let mut cell = [0usize; MAX_DIMS];
    let mut frac = [T::zero(); MAX_DIMS];
    for a in 0..dims {
        let h = grid.spacing(a);
        let slack = h * T::tol(1e-9);
        let x = point[a];
        if !(x >= grid.lower(a) - slack && x <= grid.upper(a) + slack) {
            return Err(Error::OutOfDomain {
                point: point.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        let t = ((x - grid.lower(a)) / h).max(T::zero());
        let n = grid.points(a);
        let i = t.floor().to_usize().unwrap_or(0).min(n - 2);
        cell[a] = i;
        frac[a] = (t - T::from_usize_lossy(i)).min(T::one());
    }
    Ok(multilinear(field.values(), &grid.strides(), &cell[..dims], &frac[..dims]))
}

/// Multilinear combination of the `2^d` corners of a cell.
#[inline]
pub(crate) fn multilinear<T: Real>(values: &[T], strides: &[usize], cell: &[usize], frac: &[T]) -> T {
    let dims = cell.len();
    let base: usize = cell.iter().zip(strides).map(|(&i, &s)| i * s).sum();
    let mut acc = T::zero();
    for corner in 0..(1usize << dims) {
        let mut w = T::one();
        let mut k = base;
        for a in 0..dims {
            if corner & (1 << a) != 0 {
                w = w * frac[a];
                k += strides[a];
            } else {
                w = w * (T::one() - frac[a]);
            }
        }
        acc = acc + w * values[k];
    }
    acc
}

/// All permutations of `0..n`, identity first.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn build(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let v = left.remove(i);
            prefix.push(v);
            build(prefix, left, out);
            prefix.pop();
            left.insert(i, v);
        }
    }
    let mut out = Vec::new();
    build(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// Average of a field over every permutation of its axes. Requires all
/// axes to be identical.
pub fn symmetrize<T: Real>(field: &ScalarField<T>) -> Result<ScalarField<T>> {
    let grid = field.grid();
    let dims = grid.dims();
    for a in 1..dims {
        grid.axis_grid(a)?.ensure_same(&grid.axis_grid(0)?)?;
    }
    let perms = permutations(dims);
    let strides = grid.strides();
    let perm_strides: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| p.iter().map(|&a| strides[a]).collect())
        .collect();
    let inv = T::one() / T::from_usize_lossy(perms.len());
    let src = field.values();
    let mut out = vec![T::zero(); src.len()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut idx = [0usize; MAX_DIMS];
        for (o, v) in chunk.iter_mut().enumerate() {
            grid.multi_index(c * CHUNK + o, &mut idx[..dims]);
            let mut acc = T::zero();
            for ps in &perm_strides {
                let k: usize = (0..dims).map(|a| idx[a] * ps[a]).sum();
                acc = acc + src[k];
            }
            *v = acc * inv;
        }
    });
    ScalarField::new(grid.clone(), out)
}
