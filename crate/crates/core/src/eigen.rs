//! Lowest eigenpair of `-c Δ + U` on a tensor grid with zero ghost values.
//!
//! The operator is applied matrix-free. The eigensolver is a block-size-one
//! LOBPCG (locally optimal preconditioned conjugate gradient): each step
//! minimizes the Rayleigh quotient over `span{x, T r, p}` where `T` is a
//! preconditioner and `p` the previous search direction. Preconditioners are
//! exact shifted inverses of an operator close to the target one: the
//! tridiagonal matrix itself in 1D, or a separable sum of identical 1D
//! operators, inverted in their tensor eigenbasis, for many-particle grids.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{UniformGrid, MAX_DIMS};
use crate::real::Real;

const CHUNK: usize = 1 << 14;

/// Dot product with a fixed reduction order (independent of thread count).
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let parts: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| p * q).sum())
        .collect();
    parts.into_iter().sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn scale<T: Real>(a: &mut [T], s: T) {
    a.par_iter_mut().for_each(|v| *v = *v * s);
}

/// `y ← y + s x`
fn axpy<T: Real>(y: &mut [T], s: T, x: &[T]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, &x)| *y = *y + s * x);
}

/// `out = Σ c_i v_i`
fn combine<T: Real>(out: &mut [T], coeffs: &[T], vs: &[&Vec<T>]) {
    out.par_iter_mut().enumerate().for_each(|(k, o)| {
        *o = coeffs.iter().zip(vs).fold(T::zero(), |acc, (&c, v)| acc + c * v[k]);
    });
}

/// `-kinetic · Δ + potential` with the ghost-zero Laplacian stencil.
#[derive(Clone, Debug)]
pub struct SchrodingerOperator<T> {
    grid: UniformGrid<T>,
    kinetic: T,
    potential: Vec<T>,
}

impl<T: Real> SchrodingerOperator<T> {
    pub fn new(grid: UniformGrid<T>, kinetic: T, potential: Vec<T>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} potential values for {} nodes",
                potential.len(),
                grid.len()
            )));
        }
        if !(kinetic > T::zero()) {
            return Err(Error::InvalidParameter("kinetic coefficient must be positive".into()));
        }
        Ok(Self {
            grid,
            kinetic,
            potential,
        })
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    pub fn kinetic(&self) -> T {
        self.kinetic
    }

    /// Stencil weight `kinetic / h_a²` per axis.
    fn couplings(&self) -> [T; MAX_DIMS] {
        let mut c = [T::zero(); MAX_DIMS];
        for (a, c) in c.iter_mut().enumerate().take(self.grid.dims()) {
            let h = self.grid.spacing(a);
            *c = self.kinetic / (h * h);
        }
        c
    }

    /// Upper bound on the operator norm: `4 Σ_a kinetic/h_a² + max|U|`.
    pub fn norm_bound(&self) -> T {
        let stencil = self.couplings().iter().fold(T::zero(), |s, &c| s + c);
        let top = self.potential.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        T::lit(4.0) * stencil + top
    }

    /// Diagonal entries of the operator.
    pub fn diagonal(&self) -> Vec<T> {
        let c = self.couplings();
        let two = T::lit(2.0);
        let sum = (0..self.grid.dims()).fold(T::zero(), |s, a| s + two * c[a]);
        self.potential.iter().map(|&v| v + sum).collect()
    }

    pub fn apply(&self, x: &[T], out: &mut [T]) {
        let grid = &self.grid;
        let dims = grid.dims();
        let c = self.couplings();
        let strides = grid.strides();
        let n: Vec<usize> = grid.point_counts().to_vec();
        let two = T::lit(2.0);
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
            let start = chunk * CHUNK;
            let mut idx = [0usize; MAX_DIMS];
            grid.multi_index(start, &mut idx[..dims]);
            for (o, val) in out.iter_mut().enumerate() {
                let k = start + o;
                let xk = x[k];
                let mut acc = self.potential[k] * xk;
                for a in 0..dims {
                    let s = strides[a];
                    let left = if idx[a] > 0 { x[k - s] } else { T::zero() };
                    let right = if idx[a] + 1 < n[a] { x[k + s] } else { T::zero() };
                    acc = acc + c[a] * (two * xk - left - right);
                }
                *val = acc;
                // advance the multi-index, last axis fastest
                for a in (0..dims).rev() {
                    idx[a] += 1;
                    if idx[a] < n[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        });
    }

    /// `<x, A x> / <x, x>` with plain Euclidean products.
    pub fn rayleigh_quotient(&self, x: &[T]) -> T {
        let mut ax = vec![T::zero(); x.len()];
        self.apply(x, &mut ax);
        dot(x, &ax) / dot(x, x)
    }

    /// `‖A x - λ x‖ / ‖x‖`.
    pub fn residual(&self, x: &[T], lambda: T) -> T {
        let mut ax = vec![T::zero(); x.len()];
        self.apply(x, &mut ax);
        axpy(&mut ax, -lambda, x);
        norm(&ax) / norm(x)
    }
}

/// Projection applied to iterates, e.g. onto exchange-symmetric vectors.
pub type Projection<'a, T> = dyn Fn(&[T]) -> Vec<T> + Sync + 'a;

/// Approximate inverse used to precondition residuals.
#[derive(Clone, Debug)]
pub enum Preconditioner<T> {
    Identity,
    /// Exact inverse of a tridiagonal matrix (1D operator minus a shift).
    Tridiagonal { diag: Vec<T>, off: T },
    /// `(Σ_a h_a - shift)^{-1}` for identical 1D operators `h_a = Q Λ Qᵀ`
    /// acting on each axis of a cube grid.
    Separable {
        q: Vec<T>,
        lambda: Vec<T>,
        shift: T,
        dims: usize,
        m: usize,
    },
}

impl<T: Real> Preconditioner<T> {
    /// Exact inverse of `op - shift` for a 1D operator. Requires
    /// `shift < min(potential)` so the matrix is diagonally dominant.
    pub fn tridiagonal(op: &SchrodingerOperator<T>, shift: T) -> Result<Self> {
        if op.grid.dims() != 1 {
            return Err(Error::UnsupportedDimension("tridiagonal preconditioner is 1D".into()));
        }
        let vmin = op.potential.iter().fold(T::infinity(), |m, &v| m.min(v));
        if !(shift < vmin) {
            return Err(Error::InvalidParameter(
                "preconditioner shift must lie below the potential minimum".into(),
            ));
        }
        let h = op.grid.spacing(0);
        let c = op.kinetic / (h * h);
        let diag = op.diagonal().into_iter().map(|d| d - shift).collect();
        Ok(Preconditioner::Tridiagonal { diag, off: -c })
    }

    /// Tensor-eigenbasis inverse of `Σ_a (-kinetic ∂_a² + line_potential(x_a)) - shift`
    /// on the `dims`-fold power of `line`. The shift sits half a spectral gap
    /// below the separable ground energy.
    pub fn separable(
        line: &UniformGrid<T>,
        kinetic: T,
        line_potential: &[T],
        dims: usize,
    ) -> Result<Self> {
        if line.dims() != 1 || line_potential.len() != line.len() {
            return Err(Error::InvalidGrid("separable preconditioner needs a 1D line".into()));
        }
        let m = line.len();
        let h = line.spacing(0).to_f64_lossy();
        let c = kinetic.to_f64_lossy() / (h * h);
        let mat = DMatrix::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                2.0 * c + line_potential[i].to_f64_lossy()
            } else if i.abs_diff(j) == 1 {
                -c
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(mat);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lambda: Vec<T> = order.iter().map(|&k| T::lit(eig.eigenvalues[k])).collect();
        // q[i * m + k] = component i of eigenvector k
        let mut q = vec![T::zero(); m * m];
        for (kk, &k) in order.iter().enumerate() {
            for i in 0..m {
                q[i * m + kk] = T::lit(eig.eigenvectors[(i, k)]);
            }
        }
        let gap = lambda[1] - lambda[0];
        let shift = T::from_usize_lossy(dims) * lambda[0] - T::lit(0.5) * gap;
        Ok(Preconditioner::Separable {
            q,
            lambda,
            shift,
            dims,
            m,
        })
    }

    /// Lowest eigenvalue of the separable model operator, if any.
    pub fn model_ground_energy(&self) -> Option<T> {
        match self {
            Preconditioner::Separable { lambda, dims, .. } => {
                Some(T::from_usize_lossy(*dims) * lambda[0])
            }
            _ => None,
        }
    }

    pub fn apply(&self, r: &[T], out: &mut [T]) {
        match self {
            Preconditioner::Identity => out.copy_from_slice(r),
            Preconditioner::Tridiagonal { diag, off } => thomas(diag, *off, r, out),
            Preconditioner::Separable {
                q,
                lambda,
                shift,
                dims,
                m,
            } => {
                let (m, dims) = (*m, *dims);
                let mut cur = r.to_vec();
                let mut tmp = vec![T::zero(); r.len()];
                for a in 0..dims {
                    transform_axis(q, m, dims, a, true, &cur, &mut tmp);
                    std::mem::swap(&mut cur, &mut tmp);
                }
                cur.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, vals)| {
                    for (o, v) in vals.iter_mut().enumerate() {
                        let mut k = chunk * CHUNK + o;
                        let mut e = T::zero();
                        for _ in 0..dims {
                            e = e + lambda[k % m];
                            k /= m;
                        }
                        *v = *v / (e - *shift);
                    }
                });
                for a in 0..dims {
                    transform_axis(q, m, dims, a, false, &cur, &mut tmp);
                    std::mem::swap(&mut cur, &mut tmp);
                }
                out.copy_from_slice(&cur);
            }
        }
    }
}

/// Applies `Qᵀ` (forward) or `Q` along one axis of an `m^dims` array.
fn transform_axis<T: Real>(
    q: &[T],
    m: usize,
    dims: usize,
    axis: usize,
    forward: bool,
    src: &[T],
    dst: &mut [T],
) {
    let stride = m.pow((dims - 1 - axis) as u32);
    let block = stride * m;
    // each block of `m * stride` values holds `stride` complete lines
    dst.par_chunks_mut(block)
        .zip(src.par_chunks(block))
        .for_each(|(d, s)| {
            let mut line = vec![T::zero(); m];
            for inner in 0..stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = s[i * stride + inner];
                }
                for k in 0..m {
                    let mut acc = T::zero();
                    if forward {
                        for (i, &l) in line.iter().enumerate() {
                            acc = acc + q[i * m + k] * l;
                        }
                    } else {
                        for (j, &l) in line.iter().enumerate() {
                            acc = acc + q[k * m + j] * l;
                        }
                    }
                    d[k * stride + inner] = acc;
                }
            }
        });
}

/// Solves a symmetric tridiagonal system with constant off-diagonal.
fn thomas<T: Real>(diag: &[T], off: T, rhs: &[T], out: &mut [T]) {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut beta = diag[0];
    out[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = off / beta;
        beta = diag[i] - off * c[i];
        out[i] = (rhs[i] - off * out[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        out[i] = out[i] - c[i + 1] * out[i + 1];
    }
}

#[derive(Clone, Debug)]
pub struct EigenSettings {
    /// Stop when `‖A x - λ x‖ / ‖x‖` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Period of the exchange-symmetry projection, when one is supplied.
    pub symmetrize_every: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 2000,
            symmetrize_every: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair<T> {
    /// Euclidean-normalized, nonnegative ground state.
    pub vector: Vec<T>,
    pub value: T,
    pub residual: T,
    pub iterations: usize,
}

/// Modified Gram–Schmidt (applied twice); drops nearly dependent vectors.
fn orthonormalize<T: Real>(vectors: Vec<Vec<T>>) -> Vec<Vec<T>> {
    let mut kept: Vec<Vec<T>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        let before = norm(&v);
        if !(before > T::zero()) || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for u in &kept {
                let c = dot(u, &v);
                axpy(&mut v, -c, u);
            }
        }
        let after = norm(&v);
        if after > before * T::lit(1e3) * T::epsilon() {
            scale(&mut v, T::one() / after);
            kept.push(v);
        }
    }
    kept
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix. Rotation
/// angles are computed from the tangent formula, which keeps tiny
/// off-diagonal couplings (the whole signal near convergence) accurate.
fn jacobi_eigen(a: &mut [[f64; 3]; 3], k: usize) -> [[f64; 3]; 3] {
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..50 {
        let mut off = 0.0;
        for p in 0..k {
            for q in p + 1..k {
                off += a[p][q] * a[p][q];
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for row in v.iter_mut().take(k) {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    v
}

/// Lowest eigenpair of the Rayleigh–Ritz matrix `Vᵀ A V`.
fn ritz_lowest<T: Real>(basis: &[(&Vec<T>, &Vec<T>)]) -> (T, Vec<T>) {
    let k = basis.len();
    let mut g = [[0.0f64; 3]; 3];
    for i in 0..k {
        for j in i..k {
            let a = 0.5 * (dot(basis[i].0, basis[j].1) + dot(basis[j].0, basis[i].1)).to_f64_lossy();
            g[i][j] = a;
            g[j][i] = a;
        }
    }
    let v = jacobi_eigen(&mut g, k);
    let best = (0..k).fold(0, |b, i| if g[i][i] < g[b][b] { i } else { b });
    let c = (0..k).map(|i| T::lit(v[i][best])).collect();
    (T::lit(g[best][best]), c)
}

/// Computes the ground state of `op` starting from `init`.
///
/// `project`, when supplied, is applied to the iterate and the search
/// direction every `symmetrize_every` steps and to the final vector.
pub fn lowest_eigenpair<T: Real>(
    op: &SchrodingerOperator<T>,
    precond: &Preconditioner<T>,
    init: &[T],
    settings: &EigenSettings,
    project: Option<&Projection<'_, T>>,
) -> Result<EigenPair<T>> {
    let len = op.grid.len();
    if init.len() != len {
        return Err(Error::InvalidGrid("initial vector has the wrong length".into()));
    }
    // residuals below ε‖A‖ are not resolvable in this precision
    let tol = T::lit(settings.tol).max(T::epsilon() * op.norm_bound());
    let mut x = match project {
        Some(p) => p(init),
        None => init.to_vec(),
    };
    let nx = norm(&x);
    if !(nx > T::zero()) {
        return Err(Error::InvalidParameter("initial vector is zero".into()));
    }
    scale(&mut x, T::one() / nx);
    let mut ax = vec![T::zero(); len];
    op.apply(&x, &mut ax);
    let mut lambda = dot(&x, &ax);
    let mut p: Option<Vec<T>> = None;
    let mut r = vec![T::zero(); len];
    let mut w = vec![T::zero(); len];
    let mut res = T::infinity();

    for it in 0..settings.max_iter {
        r.copy_from_slice(&ax);
        axpy(&mut r, -lambda, &x);
        res = norm(&r);
        if res <= tol {
            return finish(op, x, lambda, it, project);
        }
        precond.apply(&r, &mut w);

        let mut vectors = vec![x.clone(), w.clone()];
        if let Some(pv) = p.take() {
            vectors.push(pv);
        }
        // operator products are recomputed on the orthonormal basis so that
        // the residual stays accurate near convergence
        let vs = orthonormalize(vectors);
        let avs: Vec<Vec<T>> = vs
            .iter()
            .map(|v| {
                let mut av = vec![T::zero(); len];
                op.apply(v, &mut av);
                av
            })
            .collect();
        let pairs: Vec<(&Vec<T>, &Vec<T>)> = vs.iter().zip(&avs).collect();
        let (value, c) = ritz_lowest(&pairs);

        let vr: Vec<&Vec<T>> = vs.iter().collect();
        let avr: Vec<&Vec<T>> = avs.iter().collect();
        combine(&mut x, &c, &vr);
        combine(&mut ax, &c, &avr);
        if vs.len() > 1 {
            let mut pc = c.clone();
            pc[0] = T::zero();
            let mut pv = vec![T::zero(); len];
            combine(&mut pv, &pc, &vr);
            p = Some(pv);
        }
        lambda = value;

        let step = it + 1;
        if let Some(proj) = project {
            if step % settings.symmetrize_every.max(1) == 0 {
                x = proj(&x);
                if let Some(pv) = p.as_mut() {
                    *pv = proj(pv);
                }
                let n = norm(&x);
                scale(&mut x, T::one() / n);
                op.apply(&x, &mut ax);
                lambda = dot(&x, &ax);
            }
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: settings.max_iter,
        residual: res.to_f64_lossy(),
    })
}

fn finish<T: Real>(
    op: &SchrodingerOperator<T>,
    mut x: Vec<T>,
    lambda: T,
    iterations: usize,
    project: Option<&Projection<'_, T>>,
) -> Result<EigenPair<T>> {
    if let Some(p) = project {
        x = p(&x);
    }
    let sum: T = x.iter().copied().sum();
    if sum < T::zero() {
        scale(&mut x, -T::one());
    }
    let top = x.iter().fold(T::zero(), |m, &v| m.max(v));
    let low = x.iter().fold(T::zero(), |m, &v| m.min(v));
    if low < -T::tol(1e-8) * top {
        return Err(Error::Consistency(format!(
            "ground state changes sign (min {low}, max {top})"
        )));
    }
    if low < T::zero() {
        lift_negative_tail(op, &mut x, lambda);
    }
    let n = norm(&x);
    scale(&mut x, T::one() / n);
    let mut ax = vec![T::zero(); x.len()];
    op.apply(&x, &mut ax);
    let value = dot(&x, &ax);
    axpy(&mut ax, -value, &x);
    let residual = norm(&ax);
    Ok(EigenPair {
        vector: x,
        value,
        residual,
        iterations,
    })
}

/// Round-off can leave tiny negative values where the ground state is
/// exponentially small. There the eigen-equation `x_k = (O x)_k / (D_k - λ)`
/// (`O` the nonnegative off-diagonal part) gives a positive value whenever
/// the neighbours are positive; a few sweeps of it repair the tail.
fn lift_negative_tail<T: Real>(op: &SchrodingerOperator<T>, x: &mut [T], lambda: T) {
    let diag = op.diagonal();
    let grid = &op.grid;
    let dims = grid.dims();
    let strides = grid.strides();
    let c = op.couplings();
    let mut idx = [0usize; MAX_DIMS];
    for _ in 0..(4 * grid.point_counts().iter().max().copied().unwrap_or(1)) {
        let bad: Vec<usize> = (0..x.len()).filter(|&k| x[k] < T::zero()).collect();
        if bad.is_empty() {
            return;
        }
        for k in bad {
            grid.multi_index(k, &mut idx[..dims]);
            let mut off = T::zero();
            for a in 0..dims {
                if idx[a] > 0 {
                    off = off + c[a] * x[k - strides[a]];
                }
                if idx[a] + 1 < grid.points(a) {
                    off = off + c[a] * x[k + strides[a]];
                }
            }
            let gap = diag[k] - lambda;
            x[k] = if gap > T::zero() { (off / gap).max(T::zero()) } else { T::zero() };
        }
    }
}
