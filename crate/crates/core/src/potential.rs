//! Slowly varying external potentials `V(x) = W(h x)` with analytic
//! derivatives up to third order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Profile `W` of the external potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Landscape {
    Constant { value: f64 },
    /// `amplitude * cos(k·x + phase)`.
    Cosine { amplitude: f64, wave: Vec<f64>, phase: f64 },
    /// `slope·x`.
    Linear { slope: Vec<f64> },
    /// `½ (x-c)ᵀ M (x-c)`, `M` row-major and symmetric.
    Quadratic { matrix: Vec<f64>, center: Vec<f64> },
    /// `amplitude * exp(-|x-c|²/(2 width²))`.
    Gaussian { amplitude: f64, width: f64, center: Vec<f64> },
}

impl Landscape {
    /// Vector-like parameters must have exactly `dim` entries.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |got: usize, expected: usize| Err(Error::Dimension { expected, got });
        match self {
            Landscape::Constant { .. } => Ok(()),
            Landscape::Cosine { wave, .. } if wave.len() != dim => bad(wave.len(), dim),
            Landscape::Linear { slope } if slope.len() != dim => bad(slope.len(), dim),
            Landscape::Quadratic { matrix, .. } if matrix.len() != dim * dim => bad(matrix.len(), dim * dim),
            Landscape::Quadratic { center, .. } if center.len() != dim => bad(center.len(), dim),
            Landscape::Gaussian { center, .. } if center.len() != dim => bad(center.len(), dim),
            Landscape::Gaussian { width, .. } if !(*width > 0.0) => {
                Err(Error::Domain(format!("gaussian width must be positive, got {width}")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Landscape::Constant { value } => *value,
            Landscape::Cosine { amplitude, wave, phase } => amplitude * (dot(wave, x) + phase).cos(),
            Landscape::Linear { slope } => dot(slope, x),
            Landscape::Quadratic { matrix, center } => {
                let d = x.len();
                let mut s = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        s += (x[j] - center[j]) * matrix[j * d + k] * (x[k] - center[k]);
                    }
                }
                0.5 * s
            }
            Landscape::Gaussian { amplitude, width, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            Landscape::Constant { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            Landscape::Cosine { amplitude, wave, phase } => {
                let s = -amplitude * (dot(wave, x) + phase).sin();
                for j in 0..d {
                    out[j] = s * wave[j];
                }
            }
            Landscape::Linear { slope } => out.copy_from_slice(slope),
            Landscape::Quadratic { matrix, center } => {
                for j in 0..d {
                    out[j] = (0..d).map(|k| matrix[j * d + k] * (x[k] - center[k])).sum();
                }
            }
            Landscape::Gaussian { width, center, .. } => {
                let w = self.value(x);
                let s2 = width * width;
                for j in 0..d {
                    out[j] = -w * (x[j] - center[j]) / s2;
                }
            }
        }
    }

    /// Row-major `d×d` Hessian.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            Landscape::Constant { .. } | Landscape::Linear { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            Landscape::Cosine { amplitude, wave, phase } => {
                let c = -amplitude * (dot(wave, x) + phase).cos();
                for j in 0..d {
                    for k in 0..d {
                        out[j * d + k] = c * wave[j] * wave[k];
                    }
                }
            }
            Landscape::Quadratic { matrix, .. } => out.copy_from_slice(matrix),
            Landscape::Gaussian { width, center, .. } => {
                let w = self.value(x);
                let s2 = width * width;
                let y: Vec<f64> = (0..d).map(|j| (x[j] - center[j]) / s2).collect();
                for j in 0..d {
                    for k in 0..d {
                        let delta = if j == k { 1.0 / s2 } else { 0.0 };
                        out[j * d + k] = w * (y[j] * y[k] - delta);
                    }
                }
            }
        }
    }

    /// Row-major `d×d×d` tensor of third derivatives.
    pub fn third(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            Landscape::Constant { .. } | Landscape::Linear { .. } | Landscape::Quadratic { .. } => {
                out.iter_mut().for_each(|o| *o = 0.0)
            }
            Landscape::Cosine { amplitude, wave, phase } => {
                let s = amplitude * (dot(wave, x) + phase).sin();
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            out[(j * d + k) * d + l] = s * wave[j] * wave[k] * wave[l];
                        }
                    }
                }
            }
            Landscape::Gaussian { width, center, .. } => {
                let w = self.value(x);
                let s2 = width * width;
                let y: Vec<f64> = (0..d).map(|j| (x[j] - center[j]) / s2).collect();
                let delta = |a: usize, b: usize| if a == b { 1.0 / s2 } else { 0.0 };
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            out[(j * d + k) * d + l] = w
                                * (-y[j] * y[k] * y[l]
                                    + delta(j, k) * y[l]
                                    + delta(j, l) * y[k]
                                    + delta(k, l) * y[j]);
                        }
                    }
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `V(x) = W(h x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalPotential {
    pub landscape: Landscape,
    pub h: f64,
    pub dim: usize,
}

impl ExternalPotential {
    pub fn new(landscape: Landscape, h: f64, dim: usize) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Domain(format!("h must lie in (0, 1], got {h}")));
        }
        landscape.validate(dim)?;
        Ok(Self { landscape, h, dim })
    }

    /// `V = 0`.
    pub fn zero(dim: usize) -> Self {
        Self { landscape: Landscape::Constant { value: 0.0 }, h: 1.0, dim }
    }

    /// Same landscape with another slowness parameter.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.landscape.clone(), h, self.dim)
    }

    fn scaled(&self, x: &[f64]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for (yj, xj) in y.iter_mut().zip(x) {
            *yj = self.h * xj;
        }
        y
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let y = self.scaled(x);
        self.landscape.value(&y[..x.len()])
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let y = self.scaled(x);
        self.landscape.gradient(&y[..x.len()], out);
        out.iter_mut().for_each(|o| *o *= self.h);
    }

    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let y = self.scaled(x);
        self.landscape.hessian(&y[..x.len()], out);
        let h2 = self.h * self.h;
        out.iter_mut().for_each(|o| *o *= h2);
    }

    pub fn third(&self, x: &[f64], out: &mut [f64]) {
        let y = self.scaled(x);
        self.landscape.third(&y[..x.len()], out);
        let h3 = self.h.powi(3);
        out.iter_mut().for_each(|o| *o *= h3);
    }

    /// `V` on the grid nodes.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: grid.dim() });
        }
        Ok(crate::grid::sample_real(grid, |x| self.value(x)))
    }
}
