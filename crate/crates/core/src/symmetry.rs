//! The symmetry group generated by translations, Galilean boosts, phase
//! rotations and mass-critical dilations, its action on fields, and the
//! symplectic structure restricted to the soliton manifold.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{coordinate_field, Field, Fourier, Grid};
use crate::groundstate::GroundState;

/// `(g·u)(x) = e^{iγ} e^{i v·(x-a)} μ^w u(μ(x-a))`, `w = (d+1)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
}

/// Time derivative of a curve of group elements, in the same coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupTangent {
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        Self { a: vec![0.0; dim], v: vec![0.0; dim], gamma: 0.0, mu: 1.0 }
    }

    pub fn new(a: Vec<f64>, v: Vec<f64>, gamma: f64, mu: f64) -> Result<Self> {
        let g = Self { a, v, gamma, mu };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.v.len() {
            return Err(Error::Dimension { expected: self.a.len(), got: self.v.len() });
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Domain(format!("dilation must be positive, got {}", self.mu)));
        }
        if !self.a.iter().chain(&self.v).chain([&self.gamma]).all(|x| x.is_finite()) {
            return Err(Error::Domain("group element has non-finite entries".into()));
        }
        Ok(())
    }

    /// Product `g ∘ h` with `(g∘h)·u = g·(h·u)`.
    pub fn compose(&self, h: &GroupElement) -> Result<GroupElement> {
        if self.dim() != h.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: h.dim() });
        }
        let a = self.a.iter().zip(&h.a).map(|(a, ah)| a + ah / self.mu).collect();
        let v = self.v.iter().zip(&h.v).map(|(v, vh)| v + self.mu * vh).collect();
        let va: f64 = self.v.iter().zip(&h.a).map(|(v, ah)| v * ah).sum();
        Ok(GroupElement { a, v, gamma: self.gamma + h.gamma + va / self.mu, mu: self.mu * h.mu })
    }

    pub fn inverse(&self) -> GroupElement {
        let va: f64 = self.v.iter().zip(&self.a).map(|(v, a)| v * a).sum();
        GroupElement {
            a: self.a.iter().map(|a| -self.mu * a).collect(),
            v: self.v.iter().map(|v| -v / self.mu).collect(),
            gamma: -self.gamma + va,
            mu: 1.0 / self.mu,
        }
    }

    /// Largest coordinate difference, with phases compared modulo `2π`.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        let dg = (self.gamma - other.gamma).rem_euclid(std::f64::consts::TAU);
        let dg = dg.min(std::f64::consts::TAU - dg);
        self.a
            .iter()
            .zip(&other.a)
            .chain(self.v.iter().zip(&other.v))
            .map(|(x, y)| (x - y).abs())
            .fold(dg.max((self.mu - other.mu).abs()), f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: GroupElement = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }
}

/// Number of group parameters in dimension `d`.
pub fn group_dim(d: usize) -> usize {
    2 * d + 2
}

/// Coordinates of `g⁻¹ ġ` in the generator basis
/// `[translations, boosts, phase, scale]`.
pub fn curve_derivative(g: &GroupElement, gdot: &GroupTangent) -> Result<Vec<f64>> {
    let d = g.dim();
    if gdot.a.len() != d || gdot.v.len() != d {
        return Err(Error::Dimension { expected: d, got: gdot.a.len().min(gdot.v.len()) });
    }
    let mut c = Vec::with_capacity(2 * d + 2);
    c.extend(gdot.a.iter().map(|ad| g.mu * ad));
    c.extend(gdot.v.iter().map(|vd| vd / g.mu));
    let av: f64 = gdot.a.iter().zip(&g.v).map(|(ad, v)| ad * v).sum();
    c.push(gdot.gamma - av);
    c.push(gdot.mu / g.mu);
    Ok(c)
}

/// Applies generator `j` (1-based, `1..=2d+2`) to `u`:
/// `-∂_j`, `i x_j`, `i`, and `(d+1)/2 + x·∇`.
pub fn apply_generator(j: usize, u: &Field, fourier: &Fourier) -> Result<Field> {
    let d = u.grid().dim();
    if j == 0 || j > 2 * d + 2 {
        return Err(Error::Domain(format!("generator index {j} outside 1..={}", 2 * d + 2)));
    }
    let k = j - 1;
    let i = Complex64::new(0.0, 1.0);
    Ok(if k < d {
        fourier.derivative(u, k).scaled(Complex64::new(-1.0, 0.0))
    } else if k < 2 * d {
        let mut out = u.scaled(i);
        out.mul_real(&coordinate_field(u.grid(), k - d));
        out
    } else if k == 2 * d {
        u.scaled(i)
    } else {
        let mut out = fourier.radial_derivative(u);
        out.axpy(Complex64::new((d as f64 + 1.0) / 2.0, 0.0), u)?;
        out
    })
}

/// `ω(u, w) = Im ∫ u conj(w)`.
pub fn symplectic_form(u: &Field, w: &Field) -> Result<f64> {
    u.omega(w)
}

/// `⟨u, w⟩ = Re ∫ u conj(w)`.
pub fn inner_product(u: &Field, w: &Field) -> Result<f64> {
    u.inner(w)
}

/// Trigonometric interpolation of every line along `axis` at the points
/// `targets` (one per node of that axis). Targets outside the box evaluate to
/// zero rather than to the periodic image, since fields are localised.
fn resample_axis(data: &mut [Complex64], fourier: &Fourier, axis: usize, targets: &[f64]) {
    let grid = fourier.grid();
    let n = grid.shape()[axis];
    let l = grid.lengths()[axis];
    let x0 = -0.5 * l;
    let dk = std::f64::consts::TAU / l;
    let inner: usize = grid.shape()[axis + 1..].iter().product();
    let outer = data.len() / (n * inner);
    fourier.forward_axis(data, axis);

    let row = |y: f64, out: &mut [Complex64]| {
        if y < x0 || y > -x0 {
            out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            return;
        }
        let theta = dk * (y - x0);
        let step = Complex64::from_polar(1.0, theta);
        let mut e = Complex64::new(1.0, 0.0);
        for m in 0..n / 2 {
            out[m] = e;
            if m > 0 {
                out[n - m] = e.conj();
            }
            e *= step;
        }
        out[n / 2] = Complex64::new((theta * (n / 2) as f64).cos(), 0.0);
        let s = 1.0 / n as f64;
        out.iter_mut().for_each(|z| *z *= s);
    };

    let lines = outer * inner;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut result = vec![Complex64::new(0.0, 0.0); n];
    let matrix: Option<Vec<Complex64>> = (lines > 1).then(|| {
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, y) in targets.iter().enumerate() {
            row(*y, &mut m[i * n..(i + 1) * n]);
        }
        m
    });
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        for j in 0..inner {
            let base = o * n * inner + j;
            for (m, z) in line.iter_mut().enumerate() {
                *z = data[base + m * inner];
            }
            for (i, y) in targets.iter().enumerate() {
                let coeffs: &[Complex64] = match &matrix {
                    Some(mat) => &mat[i * n..(i + 1) * n],
                    None => {
                        row(*y, &mut r);
                        &r
                    }
                };
                result[i] = coeffs.iter().zip(&line).map(|(c, z)| c * z).sum();
            }
            for (i, z) in result.iter().enumerate() {
                data[base + i * inner] = *z;
            }
        }
    }
}

/// Exact sub-grid translation `u(x) -> u(x - shift)` along `axis`.
fn shift_axis(data: &mut [Complex64], fourier: &Fourier, axis: usize, shift: f64) {
    let grid = fourier.grid();
    let n = grid.shape()[axis];
    let strides = grid.strides();
    let k = fourier.wavenumbers(axis).to_vec();
    let mult: Vec<Complex64> = (0..n)
        .map(|m| {
            if m == n / 2 {
                Complex64::new((k[m] * shift).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -k[m] * shift)
            }
        })
        .collect();
    fourier.forward_axis(data, axis);
    data.iter_mut().enumerate().for_each(|(flat, z)| *z *= mult[(flat / strides[axis]) % n]);
    fourier.inverse_axis(data, axis);
}

/// Action of `g` on a field sampled on a periodic grid. The field is
/// evaluated through its trigonometric interpolant at `μ·(x-a)`, with the
/// displacement `x-a` taken as the periodic minimum image.
pub fn act(g: &GroupElement, u: &Field, fourier: &Fourier) -> Result<Field> {
    g.validate()?;
    let grid = u.grid().clone();
    let d = grid.dim();
    if g.dim() != d {
        return Err(Error::Dimension { expected: d, got: g.dim() });
    }
    if fourier.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let mut data = u.data().to_vec();
    let disp: Vec<Vec<f64>> =
        (0..d).map(|j| grid.coords(j).iter().map(|x| grid.wrap(j, x - g.a[j])).collect()).collect();
    for j in 0..d {
        if g.mu == 1.0 {
            if g.a[j] != 0.0 {
                shift_axis(&mut data, fourier, j, g.a[j]);
            }
        } else {
            let targets: Vec<f64> = disp[j].iter().map(|y| g.mu * y).collect();
            resample_axis(&mut data, fourier, j, &targets);
        }
    }
    let w = (d as f64 + 1.0) / 2.0;
    let global = Complex64::from_polar(g.mu.powf(w), g.gamma);
    let phases: Vec<Vec<Complex64>> = (0..d)
        .map(|j| disp[j].iter().map(|y| Complex64::from_polar(1.0, g.v[j] * y)).collect())
        .collect();
    let strides = grid.strides();
    for (flat, z) in data.iter_mut().enumerate() {
        let mut ph = global;
        for j in 0..d {
            ph *= phases[j][(flat / strides[j]) % grid.shape()[j]];
        }
        *z *= ph;
    }
    Field::from_vec(&grid, data)
}

/// Matrix `ω(e_j η, e_k η)` of the symplectic form on the tangent space of
/// the soliton manifold at `η`.
pub fn restricted_form_matrix(gs: &GroundState, fourier: &Fourier) -> Result<Vec<Vec<f64>>> {
    let n = 2 * gs.dim() + 2;
    let tangents: Vec<Field> =
        (1..=n).map(|j| apply_generator(j, &gs.field, fourier)).collect::<Result<_>>()?;
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        for k in 0..n {
            m[j][k] = tangents[j].omega(&tangents[k])?;
        }
    }
    Ok(m)
}

/// Ratio `ω(g·u, g·w) / ω(u, w)`, which equals `μ`.
pub fn conformal_factor_check(g: &GroupElement, u: &Field, w: &Field, fourier: &Fourier) -> Result<f64> {
    let base = u.omega(w)?;
    if base.abs() < 1e-12 {
        return Err(Error::UndefinedRatio { value: base });
    }
    let gu = act(g, u, fourier)?;
    let gw = act(g, w, fourier)?;
    Ok(gu.omega(&gw)? / base)
}

/// Smooth well-localised test field with non-trivial phase.
pub fn test_field(grid: &Grid, seed: u64) -> Field {
    let s = seed as f64;
    let c = [0.3 * (s * 1.3).sin(), 0.2 * (s * 0.7).cos(), 0.1 * (s * 2.1).sin()];
    Field::from_fn(grid, |x| {
        let mut r2 = 0.0;
        let mut lin = 0.0;
        for (j, xj) in x.iter().enumerate() {
            r2 += (xj - c[j]).powi(2);
            lin += (0.4 + 0.1 * j as f64) * xj;
        }
        let amp = (-0.5 * r2).exp() * (1.0 + 0.2 * x[0] + 0.1 * s.cos() * r2);
        Complex64::from_polar(amp, lin + 0.3 * s)
    })
}
