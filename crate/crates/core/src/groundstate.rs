//! Ground states: the radial Hartree profile computed by spectral
//! renormalisation, and the closed-form cubic NLS soliton `sech`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::symmetry::GroupElement;

/// Which equation a ground state belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// 3D Hartree equation with Coulomb self-interaction.
    Hartree3d,
    /// 1D cubic focusing NLS (Gross–Pitaevskii).
    Gp1d,
}

impl Model {
    pub fn dim(self) -> usize {
        match self {
            Model::Hartree3d => 3,
            Model::Gp1d => 1,
        }
    }

    /// Exponent `w` in the amplitude factor `mu^w` of the dilation.
    pub fn scale_weight(self) -> f64 {
        (self.dim() as f64 + 1.0) / 2.0
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Hartree3d => "hartree3d",
            Model::Gp1d => "gp1d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hartree3d" | "hartree" => Ok(Model::Hartree3d),
            "gp1d" | "gp" | "nls1d" => Ok(Model::Gp1d),
            other => Err(Error::Parse(format!("unknown equation `{other}`"))),
        }
    }
}

/// Discrete sine transform of type I, computed through an odd extension
/// and a complex FFT of length `2(n+1)`.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    /// `X_m = sum_j x_j sin(pi j m / (n+1))`, with `j, m = 1..n`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * (n + 1)];
        for (j, &v) in x.iter().enumerate() {
            buf[j + 1] = Complex64::new(v, 0.0);
            buf[2 * (n + 1) - j - 1] = Complex64::new(-v, 0.0);
        }
        self.fft.process(&mut buf);
        (1..=n).map(|m| -0.5 * buf[m].im).collect()
    }

    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        let s = 2.0 / (self.n as f64 + 1.0);
        self.apply(x).into_iter().map(|v| v * s).collect()
    }
}

/// Radial profile `eta(r)` on the uniform nodes `r_j = j * rmax/(n+1)`,
/// `j = 1..n`, with `eta(rmax) = 0` implied.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub lambda: f64,
}

/// Options of the spectral renormalisation iteration.
#[derive(Clone, Debug)]
pub struct RadialSolverOptions {
    pub n: usize,
    pub r_max: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for RadialSolverOptions {
    fn default() -> Self {
        Self { n: 16383, r_max: 30.0, tol: 1e-9, max_iterations: 2000 }
    }
}

/// Coulomb potential `|x|^{-1} * eta^2` of a radial density, evaluated at the
/// profile nodes with the shell theorem. Both cumulative integrals use the
/// trapezoid rule with the Euler–Maclaurin end correction.
pub fn newton_potential(r: &[f64], eta: &[f64], r_max: f64) -> Vec<f64> {
    let n = r.len();
    let dr = r_max / (n as f64 + 1.0);
    // nodes 0..=n+1 with r_0 = 0 and r_{n+1} = r_max
    let mut g = vec![0.0; n + 2];
    let mut b = vec![0.0; n + 2];
    for j in 0..n {
        let e2 = eta[j] * eta[j];
        g[j + 1] = r[j] * r[j] * e2;
        b[j + 1] = r[j] * e2;
    }
    let dg = fd4(&g, dr, 1.0);
    let db = fd4(&b, dr, -1.0);
    let mut cg = vec![0.0; n + 2];
    let mut cb = vec![0.0; n + 2];
    for j in 1..n + 2 {
        cg[j] = cg[j - 1] + 0.5 * dr * (g[j - 1] + g[j]);
        cb[j] = cb[j - 1] + 0.5 * dr * (b[j - 1] + b[j]);
    }
    let c = dr * dr / 12.0;
    (1..=n)
        .map(|j| {
            let inner = cg[j] - c * (dg[j] - dg[0]);
            let outer = cb[n + 1] - cb[j] - c * (db[n + 1] - db[j]);
            4.0 * PI * (inner / r[j - 1] + outer)
        })
        .collect()
}

/// Fourth-order central differences on nodes `0..len` with the reflection
/// `f(-x) = parity * f(x)` at the origin and zero continuation at the end.
fn fd4(f: &[f64], dr: f64, parity: f64) -> Vec<f64> {
    let len = f.len() as isize;
    let at = |i: isize| -> f64 {
        if i < 0 {
            parity * f[(-i) as usize]
        } else if i >= len {
            0.0
        } else {
            f[i as usize]
        }
    };
    (0..len)
        .map(|i| (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * dr))
        .collect()
}

/// Sixth-order central differences of an even function given on nodes
/// `0..len` (node 0 at the origin); the last three nodes fall back to
/// the exponential tail rate `kappa`.
fn fd6_even(f: &[f64], dr: f64, kappa: f64) -> Vec<f64> {
    let len = f.len();
    let at = |i: isize| -> f64 { f[i.unsigned_abs()] };
    (0..len)
        .map(|i| {
            if i + 3 >= len {
                -kappa * f[i]
            } else {
                let i = i as isize;
                (-at(i - 3) + 9.0 * at(i - 2) - 45.0 * at(i - 1) + 45.0 * at(i + 1)
                    - 9.0 * at(i + 2)
                    + at(i + 3))
                    / (60.0 * dr)
            }
        })
        .collect()
}

impl RadialProfile {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn r_max(&self) -> f64 {
        self.dr() * (self.n() as f64 + 1.0)
    }

    pub fn dr(&self) -> f64 {
        self.r_grid[1] - self.r_grid[0]
    }

    fn wavenumbers(&self) -> Vec<f64> {
        let r_max = self.r_max();
        (1..=self.n()).map(|m| m as f64 * PI / r_max).collect()
    }

    /// `4 pi ∫ r^2 eta^2 dr`.
    pub fn mass(&self) -> f64 {
        4.0 * PI * self.dr() * self.r_grid.iter().zip(&self.values).map(|(r, e)| r * r * e * e).sum::<f64>()
    }

    pub fn potential(&self) -> Vec<f64> {
        newton_potential(&self.r_grid, &self.values, self.r_max())
    }

    /// Relative `L²(R³)` residual of `-½Δη + λη - Φη = 0`.
    pub fn residual(&self) -> f64 {
        let dst = SineTransform::new(self.n());
        let k = self.wavenumbers();
        let phi: Vec<f64> = self.r_grid.iter().zip(&self.values).map(|(r, e)| r * e).collect();
        let mut ph = dst.apply(&phi);
        ph.iter_mut().zip(&k).for_each(|(p, k)| *p *= 0.5 * k * k);
        let kin = dst.inverse(&ph);
        let pot = self.potential();
        let res: Vec<f64> =
            (0..self.n()).map(|j| kin[j] + (self.lambda - pot[j]) * phi[j]).collect();
        relative_l2(&res, &phi)
    }

    /// Energy `¼∫|∇η|² - ¼∫(|x|⁻¹*η²)η²`; the kinetic part uses Parseval on
    /// the sine coefficients of `r η`.
    pub fn hamiltonian(&self) -> f64 {
        let dst = SineTransform::new(self.n());
        let k = self.wavenumbers();
        let phi: Vec<f64> = self.r_grid.iter().zip(&self.values).map(|(r, e)| r * e).collect();
        let c = dst.inverse(&phi);
        let kinetic =
            4.0 * PI * 0.5 * self.r_max() * c.iter().zip(&k).map(|(c, k)| c * c * k * k).sum::<f64>();
        let pot = self.potential();
        let interaction = 4.0
            * PI
            * self.dr()
            * (0..self.n())
                .map(|j| self.r_grid[j].powi(2) * pot[j] * self.values[j].powi(2))
                .sum::<f64>();
        0.25 * kinetic - 0.25 * interaction
    }

    /// `eta(0)` from the sine series of `r eta`.
    pub fn value_at_origin(&self) -> f64 {
        let dst = SineTransform::new(self.n());
        let phi: Vec<f64> = self.r_grid.iter().zip(&self.values).map(|(r, e)| r * e).collect();
        let c = dst.inverse(&phi);
        c.iter().zip(self.wavenumbers()).map(|(c, k)| c * k).sum()
    }

    /// Least-squares exponential decay rate of `eta` on `[r_lo, r_hi]`.
    pub fn decay_rate(&self, r_lo: f64, r_hi: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .r_grid
            .iter()
            .zip(&self.values)
            .filter(|(r, e)| **r >= r_lo && **r <= r_hi && **e > 0.0)
            .map(|(r, e)| (*r, e.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::Domain(format!("no tail samples in [{r_lo}, {r_hi}]")));
        }
        let (slope, _) = linear_fit(&pts);
        Ok(-slope)
    }

    /// Dilation `eta -> mu^2 eta(mu r)`, which maps a solution with
    /// eigenvalue `lambda` to one with `mu^2 lambda` and multiplies the mass by `mu`.
    pub fn rescale(&self, mu: f64) -> Result<RadialProfile> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Domain(format!("scale factor must be positive, got {mu}")));
        }
        Ok(RadialProfile {
            r_grid: self.r_grid.iter().map(|r| r / mu).collect(),
            values: self.values.iter().map(|v| v * mu * mu).collect(),
            lambda: self.lambda * mu * mu,
        })
    }

    /// Exponent `p` in the asymptotic form `eta ~ C r^p e^{-kappa r}`.
    fn tail_power(&self) -> f64 {
        let kappa = (2.0 * self.lambda).sqrt();
        self.mass() / kappa - 1.0
    }

    /// Replaces values below `floor * max(eta)` by the asymptotic tail
    /// continued from the last trustworthy node.
    fn continue_tail(&mut self, floor: f64) {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        let Some(cut) = self.values.iter().position(|v| *v < floor * max) else {
            return;
        };
        if cut == 0 {
            return;
        }
        let kappa = (2.0 * self.lambda).sqrt();
        let p = self.tail_power();
        let (rc, ec) = (self.r_grid[cut - 1], self.values[cut - 1]);
        for j in cut..self.n() {
            let r = self.r_grid[j];
            self.values[j] = ec * (r / rc).powf(p) * (-kappa * (r - rc)).exp();
        }
    }

    /// Text serialisation: `key=value` header lines then `r value` pairs,
    /// all numbers with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda={:.16e}", self.lambda);
        let _ = writeln!(s, "mass={:.16e}", self.mass());
        let _ = writeln!(s, "n={}", self.n());
        let _ = writeln!(s, "rmax={:.16e}", self.r_max());
        for (r, v) in self.r_grid.iter().zip(&self.values) {
            let _ = writeln!(s, "{r:.16e} {v:.16e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lambda = None;
        let mut n = None;
        let mut r_grid = Vec::new();
        let mut values = Vec::new();
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")))
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            if let Some((key, val)) = line.split_once('=') {
                match key.trim() {
                    "lambda" => lambda = Some(num(val)?),
                    "n" => {
                        n = Some(val.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                    }
                    "mass" | "rmax" => {
                        num(val)?;
                    }
                    other => return Err(Error::Parse(format!("unknown header `{other}`"))),
                }
                continue;
            }
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(r), Some(v), None) => {
                    r_grid.push(num(r)?);
                    values.push(num(v)?);
                }
                _ => return Err(Error::Parse(format!("malformed data line `{line}`"))),
            }
        }
        let lambda = lambda.ok_or_else(|| Error::Parse("missing lambda".into()))?;
        if let Some(n) = n {
            if n != values.len() {
                return Err(Error::Dimension { expected: n, got: values.len() });
            }
        }
        if values.len() < 2 {
            return Err(Error::Parse("profile needs at least two nodes".into()));
        }
        Ok(Self { r_grid, values, lambda })
    }

    /// Cubic Hermite interpolant with derivatives from sixth-order finite
    /// differences, continued by the asymptotic tail beyond the last node.
    pub fn interpolant(&self) -> RadialInterpolant {
        let mut nodes = Vec::with_capacity(self.n() + 1);
        nodes.push(self.value_at_origin());
        nodes.extend_from_slice(&self.values);
        let kappa = (2.0 * self.lambda).sqrt();
        let derivs = fd6_even(&nodes, self.dr(), kappa);
        RadialInterpolant {
            dr: self.dr(),
            values: nodes,
            derivs,
            kappa,
            tail_power: self.tail_power(),
        }
    }
}

fn relative_l2(res: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = res.iter().map(|x| x * x).sum();
    let den: f64 = reference.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Solves `-½Δη + λη - (|x|⁻¹*η²)η = 0` for a positive radial `η` at fixed `λ`.
pub fn solve_radial(lambda: f64, opts: &RadialSolverOptions) -> Result<RadialProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if opts.n < 512 || !(opts.r_max > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "radial grid needs n >= 512, rmax > 0 and tol > 0 (got n={}, rmax={}, tol={})",
            opts.n, opts.r_max, opts.tol
        )));
    }
    let n = opts.n;
    let dr = opts.r_max / (n as f64 + 1.0);
    let r: Vec<f64> = (1..=n).map(|j| j as f64 * dr).collect();
    let k2: Vec<f64> = (1..=n).map(|m| (m as f64 * PI / opts.r_max).powi(2)).collect();
    let denom: Vec<f64> = k2.iter().map(|k| 0.5 * k + lambda).collect();
    let dst = SineTransform::new(n);

    let mut eta: Vec<f64> = r.iter().map(|r| (-r).exp()).collect();
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let pot = newton_potential(&r, &eta, opts.r_max);
        let phi: Vec<f64> = r.iter().zip(&eta).map(|(r, e)| r * e).collect();
        let src: Vec<f64> = (0..n).map(|j| r[j] * pot[j] * eta[j]).collect();
        let ph = dst.apply(&phi);
        let nh = dst.apply(&src);

        let res_hat: Vec<f64> = (0..n).map(|m| denom[m] * ph[m] - nh[m]).collect();
        // Parseval: the sine coefficients carry the radial L² norm of r*residual
        residual = relative_l2(&res_hat, &ph);
        if !residual.is_finite() {
            return Err(Error::Instability(format!("non-finite residual at iteration {it}")));
        }
        if residual < opts.tol {
            let mut profile = RadialProfile { r_grid: r, values: eta, lambda };
            check_positive(&profile)?;
            profile.continue_tail(1e-12);
            log::debug!("radial ground state converged in {it} iterations, residual {residual:e}");
            return Ok(profile);
        }

        let num: f64 = (0..n).map(|m| ph[m] * ph[m] * denom[m]).sum();
        let den: f64 = (0..n).map(|m| ph[m] * nh[m]).sum();
        if !(den > 0.0) {
            return Err(Error::Instability(format!("renormalisation factor undefined at iteration {it}")));
        }
        let factor = (num / den).powf(1.5);
        let new_hat: Vec<f64> = (0..n).map(|m| factor * nh[m] / denom[m]).collect();
        let new_phi = dst.inverse(&new_hat);
        eta = new_phi.iter().zip(&r).map(|(p, r)| p / r).collect();
    }
    Err(Error::IterationLimit { iterations: opts.max_iterations, residual })
}

fn check_positive(p: &RadialProfile) -> Result<()> {
    let max = p.values.iter().cloned().fold(0.0, f64::max);
    if let Some((j, v)) = p.values.iter().enumerate().find(|(_, v)| **v < -1e-10 * max) {
        return Err(Error::Instability(format!("negative profile value {v:e} at r={}", p.r_grid[j])));
    }
    Ok(())
}

/// Radial Hartree ground state normalised to mass 2.
pub fn solve_hartree_ground_state(opts: &RadialSolverOptions) -> Result<RadialProfile> {
    let unit = solve_radial(1.0, opts)?;
    let mu = 2.0 / unit.mass();
    unit.rescale(mu)
}

/// Uniform-node cubic Hermite interpolant of a radial profile.
#[derive(Clone, Debug)]
pub struct RadialInterpolant {
    dr: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    kappa: f64,
    tail_power: f64,
}

impl RadialInterpolant {
    /// Returns `(eta(r), eta'(r))`.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let s = r / self.dr;
        let last = self.values.len() - 1;
        if s >= last as f64 {
            let rl = last as f64 * self.dr;
            let e = self.values[last] * (r / rl).powf(self.tail_power) * (-self.kappa * (r - rl)).exp();
            return (e, e * (self.tail_power / r - self.kappa));
        }
        let i = s as usize;
        let t = s - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i] * self.dr, self.derivs[i + 1] * self.dr);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let dv = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1;
        (v, dv / self.dr)
    }
}

/// Radial profile evaluator used to sample the soliton and its orbit.
#[derive(Clone, Debug)]
pub enum Profile {
    /// `sech(r)`.
    Sech,
    Radial(RadialInterpolant),
}

impl Profile {
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            Profile::Sech => {
                let s = 1.0 / r.cosh();
                (s, -s * r.tanh())
            }
            Profile::Radial(p) => p.eval(r),
        }
    }
}

/// A ground state sampled on a simulation grid together with its profile.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub model: Model,
    pub profile: Profile,
    pub radial: Option<RadialProfile>,
    pub lambda: f64,
    pub mass: f64,
    pub field: Field,
}

impl GroundState {
    /// Samples a radial Hartree profile on a 3D grid.
    pub fn hartree(grid: &Grid, radial: RadialProfile) -> Result<Self> {
        if grid.dim() != 3 {
            return Err(Error::Dimension { expected: 3, got: grid.dim() });
        }
        check_grid(grid)?;
        let interp = Profile::Radial(radial.interpolant());
        let mut gs = Self {
            model: Model::Hartree3d,
            profile: interp,
            lambda: radial.lambda,
            mass: radial.mass(),
            radial: Some(radial),
            field: Field::zeros(grid),
        };
        gs.field = gs.orbit_field(grid, &GroupElement::identity(3));
        Ok(gs)
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Decay rate `sqrt(2 lambda)` of the profile.
    pub fn kappa(&self) -> f64 {
        (2.0 * self.lambda).sqrt()
    }

    /// Same ground state sampled on another grid.
    pub fn on_grid(&self, grid: &Grid) -> Result<Self> {
        if grid.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: grid.dim() });
        }
        check_grid(grid)?;
        let mut gs = self.clone();
        gs.field = self.orbit_field(grid, &GroupElement::identity(self.dim()));
        Ok(gs)
    }

    /// `∫ x_1^2 eta^2`, equal to `∫ x_j^2 eta^2` for every axis by symmetry.
    pub fn second_moment(&self) -> f64 {
        match (&self.model, &self.radial) {
            (Model::Gp1d, _) => PI * PI / 6.0,
            (Model::Hartree3d, Some(p)) => {
                4.0 * PI / 3.0
                    * p.dr()
                    * p.r_grid.iter().zip(&p.values).map(|(r, e)| r.powi(4) * e * e).sum::<f64>()
            }
            (Model::Hartree3d, None) => {
                let x = crate::grid::coordinate_field(self.grid(), 0);
                self.field.data().iter().zip(&x).map(|(z, x)| z.norm_sqr() * x * x).sum::<f64>()
                    * self.grid().cell_volume()
            }
        }
    }

    /// Energy of the ground state (no external potential).
    pub fn hamiltonian_value(&self) -> f64 {
        match (&self.model, &self.radial) {
            // ¼∫sech'^2 - ¼∫sech^4 = ¼(2/3) - ¼(4/3)
            (Model::Gp1d, _) => -1.0 / 6.0,
            (Model::Hartree3d, Some(p)) => p.hamiltonian(),
            (Model::Hartree3d, None) => f64::NAN,
        }
    }

    /// `g · eta` sampled on `grid`.
    pub fn orbit_field(&self, grid: &Grid, g: &GroupElement) -> Field {
        let mut out = Field::zeros(grid);
        let data = out.data_mut();
        self.visit_orbit(grid, g, false, |i, v, _| data[i] = v);
        out
    }

    /// `g · (e_j eta)` for every generator, in generator order.
    pub fn orbit_tangents(&self, grid: &Grid, g: &GroupElement) -> Vec<Field> {
        let n = 2 * self.dim() + 2;
        let mut out = vec![Field::zeros(grid); n];
        self.visit_orbit(grid, g, true, |i, _, t| {
            for j in 0..n {
                out[j].data_mut()[i] = t[j];
            }
        });
        out
    }

    /// Complex pairings `∫ u conj(g·η)` and `∫ u conj(g·(e_j η))` in one pass.
    pub fn orbit_pairings(&self, u: &Field, g: &GroupElement) -> (Complex64, Vec<Complex64>) {
        let n = 2 * self.dim() + 2;
        let mut base = Complex64::new(0.0, 0.0);
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let data = u.data();
        self.visit_orbit(u.grid(), g, true, |i, v, t| {
            let z = data[i];
            base += z * v.conj();
            for j in 0..n {
                acc[j] += z * t[j].conj();
            }
        });
        let dv = u.grid().cell_volume();
        (base * dv, acc.into_iter().map(|z| z * dv).collect())
    }

    /// Calls `f(index, (g·η)(x), [(g·e_j η)(x)])` at every grid node. The
    /// tangent slice is empty unless `tangents` is set. Displacements from
    /// the centre `a` use the periodic minimum image.
    pub fn visit_orbit(
        &self,
        grid: &Grid,
        g: &GroupElement,
        tangents: bool,
        mut f: impl FnMut(usize, Complex64, &[Complex64]),
    ) {
        let d = grid.dim();
        let w = self.model.scale_weight();
        let amp = g.mu.powf(w);
        let global = Complex64::from_polar(amp, g.gamma);
        let disp: Vec<Vec<f64>> = (0..d)
            .map(|j| grid.coords(j).iter().map(|x| grid.wrap(j, x - g.a[j])).collect())
            .collect();
        let phases: Vec<Vec<Complex64>> = (0..d)
            .map(|j| disp[j].iter().map(|y| Complex64::from_polar(1.0, g.v[j] * y)).collect())
            .collect();
        let shape = grid.shape().to_vec();
        let nt = if tangents { 2 * d + 2 } else { 0 };
        let mut t = vec![Complex64::new(0.0, 0.0); nt];
        let mut y = [0.0f64; 3];
        let mut idx = [0usize; 3];
        let i_unit = Complex64::new(0.0, 1.0);
        for flat in 0..grid.len() {
            let mut ph = global;
            let mut r2 = 0.0;
            for j in 0..d {
                y[j] = g.mu * disp[j][idx[j]];
                r2 += y[j] * y[j];
                ph *= phases[j][idx[j]];
            }
            let r = r2.sqrt();
            let (e, de) = self.profile.eval(r);
            let value = ph * e;
            if tangents {
                let ratio = if r > 0.0 { de / r } else { 0.0 };
                for j in 0..d {
                    // translation: -∂_j η ; boost: i y_j η
                    t[j] = ph * (-ratio * y[j]);
                    t[d + j] = ph * i_unit * (y[j] * e);
                }
                t[2 * d] = ph * i_unit * e;
                t[2 * d + 1] = ph * (w * e + r * de);
            }
            f(flat, value, &t);
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < shape[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
    }
}

fn check_grid(grid: &Grid) -> Result<()> {
    if grid.len() < 128 {
        return Err(Error::Domain(format!("grid with {} points is too coarse", grid.len())));
    }
    Ok(())
}

/// The cubic NLS soliton `sech(x)` (mass 2, `lambda = 1/2`) on a 1D grid.
pub fn gp_ground_state(grid: &Grid) -> Result<GroundState> {
    if grid.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: grid.dim() });
    }
    check_grid(grid)?;
    let mut gs = GroundState {
        model: Model::Gp1d,
        profile: Profile::Sech,
        radial: None,
        lambda: 0.5,
        mass: 2.0,
        field: Field::zeros(grid),
    };
    gs.field = gs.orbit_field(grid, &GroupElement::identity(1));
    Ok(gs)
}

/// Ground state for `model` on `grid`; the Hartree profile is computed with `opts`.
pub fn ground_state(model: Model, grid: &Grid, opts: &RadialSolverOptions) -> Result<GroundState> {
    match model {
        Model::Gp1d => gp_ground_state(grid),
        Model::Hartree3d => GroundState::hartree(grid, solve_hartree_ground_state(opts)?),
    }
}
