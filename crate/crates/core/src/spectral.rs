//! Uniform grids on the unit torus, discrete Fourier analysis and exact
//! spectral calculus for band-limited fields.
//!
//! The torus has unit period per axis, so a Fourier mode with integer index
//! `k` carries the angular wavenumber `2πk`. Samples sit at `x_j = j / N`.
//! Flat indices are row-major with axis 0 varying slowest.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Uniform tensor grid with `size` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    size: usize,
}

impl Grid {
    pub fn new(dim: usize, size: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {size}"
            )));
        }
        Ok(Self { dim, size })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    fn stride(&self, axis: usize) -> usize {
        self.size.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|a| (flat / self.stride(a)) % self.size)
            .collect()
    }

    /// Coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .map(|j| j as f64 / self.size as f64)
            .collect()
    }

    /// All grid coordinates, `dim` values per point.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|p| self.point(p)).collect()
    }

    /// Signed integer mode index for FFT slot `i`; the Nyquist slot maps to `+N/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.size / 2 {
            i as i64
        } else {
            i as i64 - self.size as i64
        }
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.size / 2
    }

    /// Integer mode vector of spectral slot `flat`.
    pub fn mode(&self, flat: usize) -> Vec<i64> {
        self.multi_index(flat)
            .into_iter()
            .map(|i| self.wavenumber(i))
            .collect()
    }

    /// Spectral slot holding integer mode `k` (taken modulo `N` per axis).
    pub fn slot(&self, k: &[i64]) -> usize {
        let n = self.size as i64;
        k.iter().fold(0usize, |acc, &ki| {
            acc * self.size + ki.rem_euclid(n) as usize
        })
    }

    /// Largest mode index retained by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.size / 3) as i64
    }
}

/// Real vector-valued samples on a [`Grid`], stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    ncomp: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, ncomp: usize, data: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * ncomp;
        if data.len() != expected {
            return Err(Error::ComponentMismatch {
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, ncomp, data })
    }

    pub(crate) fn from_raw(grid: Grid, ncomp: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len() * ncomp);
        Self { grid, ncomp, data }
    }

    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self::from_raw(grid, ncomp, vec![0.0; grid.len() * ncomp])
    }

    /// Spatially constant field with one value per component.
    pub fn constant(grid: Grid, values: &[f64]) -> Self {
        let data = values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, grid.len()))
            .collect();
        Self::from_raw(grid, values.len(), data)
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn(grid: Grid, ncomp: usize, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len() * ncomp);
        for c in 0..ncomp {
            for p in 0..grid.len() {
                data.push(f(&grid.point(p), c));
            }
        }
        Self::from_raw(grid, ncomp, data)
    }

    /// Concatenates the components of several fields on one grid.
    pub fn stack(parts: &[&Field]) -> Result<Self> {
        let grid = parts
            .first()
            .ok_or(Error::ComponentMismatch {
                expected: 1,
                found: 0,
            })?
            .grid;
        let mut data = Vec::new();
        let mut ncomp = 0;
        for part in parts {
            if part.grid != grid {
                return Err(Error::GridMismatch);
            }
            data.extend_from_slice(&part.data);
            ncomp += part.ncomp;
        }
        Ok(Self::from_raw(grid, ncomp, data))
    }

    /// Components `start..start + count` as a new field.
    pub fn select(&self, start: usize, count: usize) -> Self {
        let n = self.grid.len();
        Self::from_raw(
            self.grid,
            count,
            self.data[start * n..(start + count) * n].to_vec(),
        )
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_raw(
            self.grid,
            self.ncomp,
            self.data.iter().map(|v| v * s).collect(),
        )
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Field) {
        self.check_same_shape(other);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Pointwise product of every component with the scalar field `s`.
    pub fn times_scalar(&self, s: &Field) -> Self {
        assert_eq!(s.ncomp, 1, "scalar field expected");
        assert_eq!(s.grid, self.grid, "grid mismatch");
        let n = self.grid.len();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v * s.data[i % n])
            .collect();
        Self::from_raw(self.grid, self.ncomp, data)
    }

    /// Max-norm distance to another field.
    pub fn max_diff(&self, other: &Field) -> f64 {
        self.check_same_shape(other);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn check_same_shape(&self, other: &Field) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!(self.ncomp, other.ncomp, "component mismatch");
    }

    pub(crate) fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check_same_shape(other);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::from_raw(self.grid, self.ncomp, data)
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

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scaled(rhs)
    }
}

/// Fourier coefficients `c_k` with `f(x) = Σ c_k exp(2πi k·x)`, FFT slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    ncomp: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficient of integer mode `k` in component `c`.
    pub fn coeff(&self, c: usize, k: &[i64]) -> Complex64 {
        self.coeffs[c * self.grid.len() + self.grid.slot(k)]
    }

    /// Multiplies every component by the Fourier symbol `symbol(k)`.
    pub fn apply_symbol(&mut self, symbol: impl Fn(&[i64]) -> Complex64) {
        let n = self.grid.len();
        let table: Vec<Complex64> = (0..n).map(|slot| symbol(&self.grid.mode(slot))).collect();
        for chunk in self.coeffs.chunks_mut(n) {
            for (z, s) in chunk.iter_mut().zip(&table) {
                *z *= s;
            }
        }
    }

    /// Sum of `|c_k|²` over all modes and components (equals the mean square).
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Evaluates the trigonometric interpolant at arbitrary points (`dim`
    /// coordinates per point). Output is component-major.
    pub fn evaluate(&self, points: &[f64]) -> Vec<f64> {
        let dim = self.grid.dim;
        let npts = points.len() / dim;
        let per_point: Vec<Vec<f64>> = points
            .par_chunks(dim)
            .map(|x| self.evaluate_point(x))
            .collect();
        let mut out = vec![0.0; npts * self.ncomp];
        for (p, vals) in per_point.iter().enumerate() {
            for (c, v) in vals.iter().enumerate() {
                out[c * npts + p] = *v;
            }
        }
        out
    }

    /// Value of every component of the interpolant at one point.
    pub fn evaluate_point(&self, x: &[f64]) -> Vec<f64> {
        let size = self.grid.size;
        let factors: Vec<Vec<Complex64>> = x.iter().map(|&xa| self.phase_table(xa)).collect();
        (0..self.ncomp)
            .map(|c| contract(self.component(c), &factors, size).re)
            .collect()
    }

    /// `e^{2πi k x}` in storage order, built from powers of `e^{2πi x}`
    /// with a fresh anchor every 16 steps.
    fn phase_table(&self, x: f64) -> Vec<Complex64> {
        let size = self.grid.size;
        let half = size / 2;
        let theta = 2.0 * PI * x.rem_euclid(1.0);
        let z = Complex64::new(theta.cos(), theta.sin());
        let mut pos = vec![Complex64::new(1.0, 0.0); half + 1];
        for k in 1..=half {
            pos[k] = if k % 16 == 0 {
                let t = theta * k as f64;
                Complex64::new(t.cos(), t.sin())
            } else {
                pos[k - 1] * z
            };
        }
        (0..size)
            .map(|i| {
                if self.grid.is_nyquist(i) {
                    Complex64::new(pos[half].re, 0.0)
                } else if i <= half {
                    pos[i]
                } else {
                    pos[size - i].conj()
                }
            })
            .collect()
    }
}

fn contract(coeffs: &[Complex64], factors: &[Vec<Complex64>], size: usize) -> Complex64 {
    let mut buf: Vec<Complex64> = coeffs.to_vec();
    for factor in factors.iter().rev() {
        buf = buf
            .chunks(size)
            .map(|line| line.iter().zip(factor).map(|(a, b)| a * b).sum())
            .collect();
    }
    buf[0]
}

fn fft_nd(grid: Grid, data: &mut [Complex64], direction: FftDirection) {
    let size = grid.size;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(size, direction));
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim {
        let stride = grid.stride(axis);
        let blocks = data.len() / (size * stride);
        for outer in 0..blocks {
            for inner in 0..stride {
                let start = outer * size * stride + inner;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = data[start + i * stride];
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (i, b) in buf.iter().enumerate() {
                    data[start + i * stride] = *b;
                }
            }
        }
    }
}

/// Forward transform of every component.
pub fn analyze(f: &Field) -> Result<Spectrum> {
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(analyze_unchecked(f))
}

pub(crate) fn analyze_unchecked(f: &Field) -> Spectrum {
    let n = f.grid.len();
    let scale = 1.0 / n as f64;
    let mut coeffs: Vec<Complex64> = f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for chunk in coeffs.chunks_mut(n) {
        fft_nd(f.grid, chunk, FftDirection::Forward);
        for z in chunk.iter_mut() {
            *z *= scale;
        }
    }
    Spectrum {
        grid: f.grid,
        ncomp: f.ncomp,
        coeffs,
    }
}

/// Inverse transform; the imaginary part (roundoff for Hermitian input) is dropped.
pub fn synthesize(spec: &Spectrum) -> Field {
    let n = spec.grid.len();
    let mut work = spec.coeffs.clone();
    for chunk in work.chunks_mut(n) {
        fft_nd(spec.grid, chunk, FftDirection::Inverse);
    }
    Field::from_raw(
        spec.grid,
        spec.ncomp,
        work.into_iter().map(|z| z.re).collect(),
    )
}

/// Spectral derivative along `axis`. The Nyquist mode is dropped, as usual
/// for odd derivatives of real fields.
pub fn differentiate(f: &Field, axis: usize) -> Result<Field> {
    let dim = f.grid.dim;
    if axis >= dim {
        return Err(Error::AxisOutOfRange { axis, dim });
    }
    let mut spec = analyze(f)?;
    differentiate_spectrum(&mut spec, axis);
    Ok(synthesize(&spec))
}

pub(crate) fn differentiate_spectrum(spec: &mut Spectrum, axis: usize) {
    let size = spec.grid.size as i64;
    spec.apply_symbol(|k| {
        if 2 * k[axis].abs() == size {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * k[axis] as f64)
        }
    });
}

/// All first partials: component `i * dim + j` holds `∂_j f_i`.
pub fn gradient(f: &Field) -> Field {
    let dim = f.grid.dim;
    let base = analyze_unchecked(f);
    let n = f.grid.len();
    let mut data = vec![0.0; n * f.ncomp * dim];
    for j in 0..dim {
        let mut spec = base.clone();
        differentiate_spectrum(&mut spec, j);
        let d = synthesize(&spec);
        for i in 0..f.ncomp {
            let dst = (i * dim + j) * n;
            data[dst..dst + n].copy_from_slice(d.component(i));
        }
    }
    Field::from_raw(f.grid, f.ncomp * dim, data)
}

/// Mean value per component (the `k = 0` coefficient).
pub fn mean(f: &Field) -> Vec<f64> {
    let n = f.grid.len() as f64;
    (0..f.ncomp)
        .map(|c| f.component(c).iter().sum::<f64>() / n)
        .collect()
}

/// Integral over the unit torus per component; the trapezoidal rule, exact
/// for trigonometric polynomials below the grid Nyquist frequency.
pub fn integrate(f: &Field) -> Vec<f64> {
    mean(f)
}

/// `∫ f·g`, summed over components.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    if f.ncomp != g.ncomp {
        return Err(Error::ComponentMismatch {
            expected: f.ncomp,
            found: g.ncomp,
        });
    }
    let s: f64 = f.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
    Ok(s / f.grid.len() as f64)
}

/// Evaluates the trigonometric interpolant of `f` at off-grid points given
/// as `dim` coordinates each. Output is component-major.
pub fn evaluate_at(f: &Field, points: &[f64]) -> Result<Vec<f64>> {
    if !points.len().is_multiple_of(f.grid.dim) {
        return Err(Error::ComponentMismatch {
            expected: f.grid.dim,
            found: points.len() % f.grid.dim,
        });
    }
    Ok(analyze(f)?.evaluate(points))
}

/// 2/3-rule projection: zeroes every mode with some `|k_i| > N/3`.
pub fn dealias(spec: &Spectrum) -> Spectrum {
    let mut out = spec.clone();
    let size = spec.grid.size as i64;
    out.apply_symbol(|k| {
        if k.iter().any(|&ki| 3 * ki.abs() > size) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    out
}

/// Random real trigonometric polynomial with all `|k_i| <= max_mode`.
pub fn random_trig_field<R: Rng + ?Sized>(
    grid: Grid,
    ncomp: usize,
    max_mode: i64,
    amplitude: f64,
    rng: &mut R,
) -> Field {
    let dim = grid.dim;
    let side = (2 * max_mode + 1) as usize;
    let count = side.pow(dim as u32);
    let mut terms = Vec::with_capacity(count * ncomp);
    for c in 0..ncomp {
        for t in 0..count {
            let mut rem = t;
            let mut k = vec![0i64; dim];
            for a in (0..dim).rev() {
                k[a] = (rem % side) as i64 - max_mode;
                rem /= side;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            terms.push((c, k, a, b));
        }
    }
    let norm = amplitude / (count as f64).sqrt();
    Field::from_fn(grid, ncomp, |x, c| {
        terms
            .iter()
            .filter(|t| t.0 == c)
            .map(|(_, k, a, b)| {
                let phase: f64 =
                    2.0 * PI * k.iter().zip(x).map(|(ki, xi)| *ki as f64 * xi).sum::<f64>();
                a * phase.cos() + b * phase.sin()
            })
            .sum::<f64>()
            * norm
    })
}
