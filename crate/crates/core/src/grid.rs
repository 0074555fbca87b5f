//! Uniform periodic grids, scalar fields and the finite-difference operators
//! used by every energy and time stepper.
//!
//! Cells are centered: cell `i` along axis `a` sits at `lo_a + (i + 1/2) h_a`.
//! Values are stored row-major with axis 0 varying slowest. All index
//! arithmetic wraps periodically.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Smallest number of cells allowed along any axis.
pub const MIN_CELLS: usize = 8;

/// Fields with at least this many cells are processed in parallel chunks.
const PAR_THRESHOLD: usize = 1 << 15;
const PAR_CHUNK: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grids must be 2- or 3-dimensional, got {0} axes")]
    Dimension(usize),
    #[error("extent has {extent} axes but dims has {dims}")]
    ExtentArity { dims: usize, extent: usize },
    #[error("axis {axis} has {cells} cells, at least {MIN_CELLS} are required")]
    TooFewCells { axis: usize, cells: usize },
    #[error("axis {axis} has an empty or non-finite extent [{lo}, {hi})")]
    Extent { axis: usize, lo: f64, hi: f64 },
    #[error("axis {axis} is out of range for a {ndim}-dimensional grid")]
    Axis { axis: usize, ndim: usize },
    #[error("expected {expected} values for this grid, got {got}")]
    Length { expected: usize, got: usize },
    #[error("fields are defined on different grids")]
    Mismatch,
}

/// A uniform, periodic, cell-centered rectangular lattice in 2 or 3 dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    ndim: usize,
    dims: [usize; MAX_DIM],
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
}

impl Grid {
    pub fn new(dims: &[usize], extent: &[(f64, f64)]) -> Result<Self, GridError> {
        let ndim = dims.len();
        if !(2..=MAX_DIM).contains(&ndim) {
            return Err(GridError::Dimension(ndim));
        }
        if extent.len() != ndim {
            return Err(GridError::ExtentArity {
                dims: ndim,
                extent: extent.len(),
            });
        }
        let mut grid = Grid {
            ndim,
            dims: [1; MAX_DIM],
            lo: [0.0; MAX_DIM],
            hi: [1.0; MAX_DIM],
        };
        for (axis, (&n, &(lo, hi))) in dims.iter().zip(extent).enumerate() {
            if n < MIN_CELLS {
                return Err(GridError::TooFewCells { axis, cells: n });
            }
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(GridError::Extent { axis, lo, hi });
            }
            grid.dims[axis] = n;
            grid.lo[axis] = lo;
            grid.hi[axis] = hi;
        }
        Ok(grid)
    }

    /// `n × n` grid on `[lo, hi)²`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self, GridError> {
        Self::new(&[n, n], &[(lo, hi), (lo, hi)])
    }

    /// `n × n × n` grid on `[lo, hi)³`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self, GridError> {
        Self::new(&[n, n, n], &[(lo, hi), (lo, hi), (lo, hi)])
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.ndim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.ndim]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length(axis) / self.dims[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.ndim)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim).map(|a| self.spacing(a)).product()
    }

    pub fn domain_volume(&self) -> f64 {
        (0..self.ndim).map(|a| self.length(a)).product()
    }

    pub fn check_axis(&self, axis: usize) -> Result<(), GridError> {
        if axis < self.ndim {
            Ok(())
        } else {
            Err(GridError::Axis {
                axis,
                ndim: self.ndim,
            })
        }
    }

    /// Row-major stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.dims[axis + 1..self.ndim].iter().product()
    }

    /// Multi-index of a flat cell index. Unused trailing axes are zero.
    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for axis in (0..self.ndim).rev() {
            c[axis] = index % self.dims[axis];
            index /= self.dims[axis];
        }
        c
    }

    /// Flat index of a multi-index; each component is wrapped periodically.
    pub fn index(&self, coords: &[isize]) -> usize {
        let mut idx = 0usize;
        for axis in 0..self.ndim {
            let n = self.dims[axis] as isize;
            idx = idx * self.dims[axis] + coords[axis].rem_euclid(n) as usize;
        }
        idx
    }

    /// Physical position of a cell center.
    pub fn center(&self, index: usize) -> [f64; MAX_DIM] {
        let c = self.coords(index);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.ndim {
            x[axis] = self.lo[axis] + (c[axis] as f64 + 0.5) * self.spacing(axis);
        }
        x
    }

    /// Minimum-image displacement `x - origin` on the torus, per axis.
    pub fn periodic_delta(&self, x: &[f64], origin: &[f64]) -> [f64; MAX_DIM] {
        let mut d = [0.0; MAX_DIM];
        for axis in 0..self.ndim {
            let len = self.length(axis);
            let raw = x[axis] - origin[axis];
            d[axis] = raw - len * (raw / len).round();
        }
        d
    }
}

/// One real value per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_vec(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Field {
            grid: *grid,
            values,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let ndim = grid.ndim();
        let values = (0..grid.len())
            .map(|i| f(&grid.center(i)[..ndim]))
            .collect();
        Field {
            grid: *grid,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Field {
        let mut out = vec![0.0; self.values.len()];
        if out.len() >= PAR_THRESHOLD {
            out.par_chunks_mut(PAR_CHUNK)
                .zip(self.values.par_chunks(PAR_CHUNK))
                .for_each(|(o, a)| o.iter_mut().zip(a).for_each(|(o, &a)| *o = f(a)));
        } else {
            out.iter_mut()
                .zip(&self.values)
                .for_each(|(o, &a)| *o = f(a));
        }
        Field {
            grid: self.grid,
            values: out,
        }
    }

    /// Elementwise combination of two fields on the same grid.
    ///
    /// Panics if the grids differ.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64 + Sync) -> Field {
        assert_eq!(self.grid, other.grid, "fields are defined on different grids");
        let mut out = vec![0.0; self.values.len()];
        if out.len() >= PAR_THRESHOLD {
            out.par_chunks_mut(PAR_CHUNK)
                .zip(self.values.par_chunks(PAR_CHUNK))
                .zip(other.values.par_chunks(PAR_CHUNK))
                .for_each(|((o, a), b)| {
                    for ((o, &a), &b) in o.iter_mut().zip(a).zip(b) {
                        *o = f(a, b);
                    }
                });
        } else {
            for ((o, &a), &b) in out.iter_mut().zip(&self.values).zip(&other.values) {
                *o = f(a, b);
            }
        }
        Field {
            grid: self.grid,
            values: out,
        }
    }

    /// Returns `g` with `g_i = f_{i + offset·e_axis}` (periodic).
    ///
    /// Panics if `axis` is out of range.
    pub fn shifted(&self, axis: usize, offset: isize) -> Field {
        assert!(axis < self.grid.ndim(), "axis out of range");
        let n = self.grid.dims[axis];
        let inner = self.grid.stride(axis);
        let block = n * inner;
        let shift = offset.rem_euclid(n as isize) as usize;
        let mut out = vec![0.0; self.values.len()];
        for (dst, src) in out.chunks_mut(block).zip(self.values.chunks(block)) {
            // dst[i] = src[i + shift] along the axis, in units of `inner`.
            let split = (n - shift) * inner;
            dst[..split].copy_from_slice(&src[shift * inner..]);
            dst[split..].copy_from_slice(&src[..shift * inner]);
        }
        Field {
            grid: self.grid,
            values: out,
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    fn check_same_grid(&self, other: &Field) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::Mismatch)
        }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scale(self)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

impl AddAssign<&Field> for Field {
    fn add_assign(&mut self, rhs: &Field) {
        assert_eq!(self.grid, rhs.grid, "fields are defined on different grids");
        self.values
            .iter_mut()
            .zip(&rhs.values)
            .for_each(|(a, b)| *a += b);
    }
}

// Unchecked operator kernels shared by the energies and steppers.

pub(crate) fn d_plus(f: &Field, axis: usize) -> Field {
    let h = f.grid.spacing(axis);
    f.shifted(axis, 1).zip_map(f, |next, cur| (next - cur) / h)
}

pub(crate) fn d_minus(f: &Field, axis: usize) -> Field {
    let h = f.grid.spacing(axis);
    let prev = f.shifted(axis, -1);
    f.zip_map(&prev, |cur, prev| (cur - prev) / h)
}

/// One-sided difference: forward when `forward` is true.
pub(crate) fn d_sided(f: &Field, axis: usize, forward: bool) -> Field {
    if forward {
        d_plus(f, axis)
    } else {
        d_minus(f, axis)
    }
}

pub(crate) fn d_centered(f: &Field, axis: usize) -> Field {
    let h2 = 2.0 * f.grid.spacing(axis);
    f.shifted(axis, 1)
        .zip_map(&f.shifted(axis, -1), |next, prev| (next - prev) / h2)
}

pub(crate) fn d2_axis(f: &Field, axis: usize) -> Field {
    let inv_h2 = 1.0 / f.grid.spacing(axis).powi(2);
    let sum = &f.shifted(axis, 1) + &f.shifted(axis, -1);
    sum.zip_map(f, |s, c| (s - 2.0 * c) * inv_h2)
}

/// Centered gradient, one field per axis.
pub(crate) fn grad_centered(f: &Field) -> Vec<Field> {
    (0..f.grid.ndim()).map(|a| d_centered(f, a)).collect()
}

pub(crate) fn norm_sq(components: &[Field]) -> Field {
    let mut acc = components[0].map(|v| v * v);
    for c in &components[1..] {
        acc = acc.zip_map(c, |s, v| s + v * v);
    }
    acc
}

/// Forward difference `(f_{i+e_a} - f_i) / h_a`.
pub fn diff_forward(f: &Field, axis: usize) -> Result<Field, GridError> {
    f.grid.check_axis(axis)?;
    Ok(d_plus(f, axis))
}

/// Backward difference `(f_i - f_{i-e_a}) / h_a`.
pub fn diff_backward(f: &Field, axis: usize) -> Result<Field, GridError> {
    f.grid.check_axis(axis)?;
    Ok(d_minus(f, axis))
}

/// Centered difference `(f_{i+e_a} - f_{i-e_a}) / (2 h_a)`.
pub fn diff_centered(f: &Field, axis: usize) -> Result<Field, GridError> {
    f.grid.check_axis(axis)?;
    Ok(d_centered(f, axis))
}

/// Standard `2·ndim + 1`-point Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid;
    let mut out = vec![0.0; f.values.len()];
    for axis in 0..grid.ndim() {
        let n = grid.dims[axis];
        let inner = grid.stride(axis);
        let inv_h2 = 1.0 / grid.spacing(axis).powi(2);
        let blocks = out.chunks_mut(n * inner).zip(f.values.chunks(n * inner));
        for (dst, src) in blocks {
            for i in 0..n {
                let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
                let row = |j: usize| &src[j * inner..(j + 1) * inner];
                let (p, c, q) = (row(prev), row(i), row(next));
                for (k, o) in dst[i * inner..(i + 1) * inner].iter_mut().enumerate() {
                    *o += (p[k] + q[k] - 2.0 * c[k]) * inv_h2;
                }
            }
        }
    }
    Field { grid, values: out }
}

/// `∫ f dx`, approximated by the midpoint rule. Deterministic pairwise sum.
pub fn integrate(f: &Field) -> f64 {
    f.grid.cell_volume() * pairwise_sum(&f.values)
}

/// `∫ f g dx` without materializing the product.
pub fn integrate_product(f: &Field, g: &Field) -> Result<f64, GridError> {
    f.check_same_grid(g)?;
    Ok(integrate(&(f * g)))
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 128;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Solves `(I + dt·eps·Δ_h²) u = rhs` by the discrete Fourier transform.
///
/// The Fourier symbol of the stencil Laplacian is used, so the result inverts
/// the real-space operator `laplacian ∘ laplacian` up to round-off.
pub fn solve_semiimplicit(rhs: &Field, dt: f64, eps: f64) -> Field {
    SpectralSolver::new(rhs.grid()).solve(rhs, dt * eps)
}

/// FFT plans and the Laplacian symbol for one grid, reusable across steps.
pub struct SpectralSolver {
    grid: Grid,
    symbol: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl SpectralSolver {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.dims().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.dims().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let symbol = (0..grid.len())
            .map(|i| {
                let k = grid.coords(i);
                (0..grid.ndim())
                    .map(|a| {
                        let theta = 2.0 * std::f64::consts::PI * k[a] as f64 / grid.dims[a] as f64;
                        (2.0 * theta.cos() - 2.0) / grid.spacing(a).powi(2)
                    })
                    .sum()
            })
            .collect();
        SpectralSolver {
            grid: *grid,
            symbol,
            forward,
            inverse,
        }
    }

    /// Eigenvalue of the stencil Laplacian for each Fourier mode, in the
    /// same flat ordering as the field.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Solves `(I + coeff·Δ_h²) u = rhs`.
    pub fn solve(&self, rhs: &Field, coeff: f64) -> Field {
        assert_eq!(rhs.grid(), &self.grid, "fields are defined on different grids");
        let mut buf: Vec<Complex64> = rhs.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        for (c, &lam) in buf.iter_mut().zip(&self.symbol) {
            *c /= 1.0 + coeff * lam * lam;
        }
        self.transform(&mut buf, &self.inverse);
        let norm = 1.0 / self.grid.len() as f64;
        let values = buf.iter().map(|c| c.re * norm).collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let ndim = self.grid.ndim();
        for axis in 0..ndim {
            let n = self.grid.dims[axis];
            let inner = self.grid.stride(axis);
            let plan = &plans[axis];
            if inner == 1 {
                plan.process(buf);
                continue;
            }
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for block in buf.chunks_mut(n * inner) {
                for k in 0..inner {
                    for (i, l) in line.iter_mut().enumerate() {
                        *l = block[i * inner + k];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, l) in line.iter().enumerate() {
                        block[i * inner + k] = *l;
                    }
                }
            }
        }
    }
}
