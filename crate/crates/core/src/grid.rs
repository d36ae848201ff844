//! Periodic Cartesian grids, complex fields on them, and the FFT machinery
//! used for every spectral operation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Row-major periodic grid centred on the origin. Axis `j` has `shape[j]`
/// points at `-L/2 + i*dx`, so the origin is always a node when `n` is even.
#[derive(Clone, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    lengths: Vec<f64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid{:?} box {:?}", self.shape, self.lengths)
    }
}

impl Grid {
    pub fn new(shape: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 || shape.len() != lengths.len() {
            return Err(Error::Domain(format!(
                "grid needs 1 to 3 axes with matching lengths, got {shape:?} / {lengths:?}"
            )));
        }
        if shape.iter().any(|&n| n < 2 || n % 2 != 0) {
            return Err(Error::Domain(format!("axis sizes must be even, got {shape:?}")));
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Domain(format!("box lengths must be positive, got {lengths:?}")));
        }
        Ok(Self { shape, lengths })
    }

    pub fn cube(dim: usize, n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n; dim], vec![length; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.shape[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -0.5 * self.lengths[axis] + i as f64 * self.spacing(axis)
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.shape[axis];
        let dk = 2.0 * PI / self.lengths[axis];
        (0..n)
            .map(|m| if m < n / 2 { m as f64 * dk } else { (m as f64 - n as f64) * dk })
            .collect()
    }

    /// Strides of the row-major layout.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for j in (0..self.dim().saturating_sub(1)).rev() {
            s[j] = s[j + 1] * self.shape[j + 1];
        }
        s
    }

    /// Visits every node with its flat index and coordinates.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let d = self.dim();
        let axes: Vec<Vec<f64>> = (0..d).map(|j| self.coords(j)).collect();
        let mut x = vec![0.0; d];
        let mut idx = vec![0usize; d];
        for flat in 0..self.len() {
            for j in 0..d {
                x[j] = axes[j][idx[j]];
            }
            f(flat, &x);
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.shape[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// Wraps a displacement into the centred periodic cell of `axis`.
    pub fn wrap(&self, axis: usize, dx: f64) -> f64 {
        let l = self.lengths[axis];
        dx - l * (dx / l).round()
    }
}

/// Complex field sampled on a [`Grid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_vec(grid: &Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: data.len() });
        }
        Ok(Self { grid: grid.clone(), data })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        grid.for_each_point(|i, x| out.data[i] = f(x));
        out
    }

    pub fn from_real_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    fn check(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Complex pairing `∫ u conj(w)`.
    pub fn pairing(&self, other: &Field) -> Result<Complex64> {
        self.check(other)?;
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Real inner product `Re ∫ u conj(w)`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        Ok(self.pairing(other)?.re)
    }

    /// Symplectic form `Im ∫ u conj(w)`.
    pub fn omega(&self, other: &Field) -> Result<f64> {
        Ok(self.pairing(other)?.im)
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Field) -> Result<()> {
        self.check(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn mul_real(&mut self, f: &[f64]) {
        self.data.iter_mut().zip(f).for_each(|(z, r)| *z *= r);
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    /// Fraction of the mass found in the outer 10% of the box along any axis.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total = self.mass();
        if total == 0.0 {
            return 0.0;
        }
        let lengths = self.grid.lengths().to_vec();
        let mut edge = 0.0;
        self.grid.for_each_point(|i, x| {
            if x.iter().zip(&lengths).any(|(xi, l)| xi.abs() > 0.4 * l) {
                edge += self.data[i].norm_sqr();
            }
        });
        edge * self.grid.cell_volume() / total
    }
}

/// FFT plans and wavenumber tables for one grid. Cheap to clone.
#[derive(Clone)]
pub struct Fourier {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    backward: Vec<Arc<dyn Fft<f64>>>,
    k: Vec<Vec<f64>>,
    k_deriv: Vec<Vec<f64>>,
    k2: Arc<Vec<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fourier({:?})", self.grid)
    }
}

const TILE: usize = 32;

impl Fourier {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.shape().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let backward = grid.shape().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let k: Vec<Vec<f64>> = (0..grid.dim()).map(|j| grid.wavenumbers(j)).collect();
        let k_deriv = k
            .iter()
            .map(|kj| {
                let n = kj.len();
                let mut kd = kj.clone();
                kd[n / 2] = 0.0;
                kd
            })
            .collect();
        let mut k2 = vec![0.0; grid.len()];
        let strides = grid.strides();
        for (flat, v) in k2.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..grid.dim() {
                let i = (flat / strides[j]) % grid.shape()[j];
                s += k[j][i] * k[j][i];
            }
            *v = s;
        }
        Self { grid: grid.clone(), forward, backward, k, k_deriv, k2: Arc::new(k2) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `|k|^2` on the full spectral grid, FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        for (axis, fft) in plans.iter().enumerate() {
            self.transform_axis(data, axis, fft.as_ref());
        }
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fft: &dyn Fft<f64>) {
        let shape = self.grid.shape();
        let total = data.len();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        if inner == 1 {
            fft.process_with_scratch(data, &mut scratch);
            return;
        }
        let outer = total / (n * inner);
        let mut buf = vec![Complex64::new(0.0, 0.0); n * TILE.min(inner)];
        for o in 0..outer {
            let block = &mut data[o * n * inner..(o + 1) * n * inner];
            let mut j0 = 0;
            while j0 < inner {
                let w = TILE.min(inner - j0);
                let b = &mut buf[..n * w];
                for i in 0..n {
                    let row = &block[i * inner + j0..i * inner + j0 + w];
                    for (jj, z) in row.iter().enumerate() {
                        b[jj * n + i] = *z;
                    }
                }
                fft.process_with_scratch(b, &mut scratch);
                for i in 0..n {
                    let row = &mut block[i * inner + j0..i * inner + j0 + w];
                    for (jj, z) in row.iter_mut().enumerate() {
                        *z = b[jj * n + i];
                    }
                }
                j0 += w;
            }
        }
    }

    /// Unnormalised forward DFT along a single axis.
    pub fn forward_axis(&self, data: &mut [Complex64], axis: usize) {
        self.transform_axis(data, axis, self.forward[axis].as_ref());
    }

    /// Normalised inverse DFT along a single axis.
    pub fn inverse_axis(&self, data: &mut [Complex64], axis: usize) {
        self.transform_axis(data, axis, self.backward[axis].as_ref());
        let s = 1.0 / self.grid.shape()[axis] as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Unnormalised forward DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT in place, normalised so that `inverse(forward(u)) = u`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.backward);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Applies a real Fourier multiplier given on the full spectral grid.
    pub fn apply_multiplier(&self, u: &Field, mult: &[f64]) -> Field {
        let mut out = u.clone();
        self.forward(out.data_mut());
        out.data_mut().iter_mut().zip(mult).for_each(|(z, m)| *z *= m);
        self.inverse(out.data_mut());
        out
    }

    /// Spectral derivative along `axis` (Nyquist mode dropped).
    pub fn derivative(&self, u: &Field, axis: usize) -> Field {
        let mut out = u.clone();
        self.forward(out.data_mut());
        let strides = self.grid.strides();
        let n = self.grid.shape()[axis];
        let kd = &self.k_deriv[axis];
        out.data_mut().iter_mut().enumerate().for_each(|(flat, z)| {
            let i = (flat / strides[axis]) % n;
            *z *= Complex64::new(0.0, kd[i]);
        });
        self.inverse(out.data_mut());
        out
    }

    pub fn laplacian(&self, u: &Field) -> Field {
        let m: Vec<f64> = self.k2.iter().map(|k| -k).collect();
        self.apply_multiplier(u, &m)
    }

    /// `∫ |∇u|^2` by Parseval.
    pub fn gradient_norm_sq(&self, u: &Field) -> f64 {
        let mut s = u.data().to_vec();
        self.forward(&mut s);
        let n = s.len() as f64;
        let sum: f64 = s.iter().zip(self.k2.iter()).map(|(z, k)| z.norm_sqr() * k).sum();
        sum * self.grid.cell_volume() / n
    }

    pub fn h1_norm(&self, u: &Field) -> f64 {
        (u.mass() + self.gradient_norm_sq(u)).sqrt()
    }

    pub fn h1_distance(&self, u: &Field, w: &Field) -> Result<f64> {
        Ok(self.h1_norm(&u.sub(w)?))
    }

    /// `x · ∇u` with spectral derivatives.
    pub fn radial_derivative(&self, u: &Field) -> Field {
        let mut out = Field::zeros(&self.grid);
        for j in 0..self.grid.dim() {
            let mut dj = self.derivative(u, j);
            let x = coordinate_field(&self.grid, j);
            dj.mul_real(&x);
            out.axpy(Complex64::new(1.0, 0.0), &dj).expect("same grid");
        }
        out
    }
}

/// The coordinate function `x_axis` sampled on the grid.
pub fn coordinate_field(grid: &Grid, axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    grid.for_each_point(|i, x| out[i] = x[axis]);
    out
}

/// Samples a real function on the grid.
pub fn sample_real(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    grid.for_each_point(|i, x| out[i] = f(x));
    out
}
