//! Strang split-step Fourier integration of
//! `i u_t = -½Δu + V u - N(u) u` with `N(u) = |x|⁻¹*|u|²` (3D Hartree) or
//! `N(u) = |u|²` (1D cubic NLS), plus conserved quantities and checkpoints.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Fourier, Grid};
use crate::groundstate::Model;
use crate::potential::ExternalPotential;

/// Fourier multiplier of the Coulomb kernel truncated to the ball of
/// radius `R`: `4π(1 - cos(|k|R))/|k|²`, with value `2πR²` at `k = 0`.
/// With `R` half the box side this reproduces the free-space potential,
/// without periodic images, for densities in the centred ball of radius `R/2`.
#[derive(Clone, Debug)]
pub struct HartreeKernel {
    pub radius: f64,
    multiplier: Vec<f64>,
}

impl HartreeKernel {
    /// Kernel with `R` equal to half the smallest box side.
    pub fn new(fourier: &Fourier) -> Result<Self> {
        let grid = fourier.grid();
        if grid.dim() != 3 {
            return Err(Error::Dimension { expected: 3, got: grid.dim() });
        }
        let radius = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
        Ok(Self::with_radius(fourier, radius))
    }

    pub fn with_radius(fourier: &Fourier, radius: f64) -> Self {
        let multiplier = fourier
            .k_squared()
            .iter()
            .map(|&k2| {
                if k2 == 0.0 {
                    2.0 * PI * radius * radius
                } else {
                    4.0 * PI * (1.0 - (k2.sqrt() * radius).cos()) / k2
                }
            })
            .collect();
        Self { radius, multiplier }
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }
}

/// `|x|⁻¹ * ρ` for a real density on the grid.
pub fn hartree_potential(density: &[f64], kernel: &HartreeKernel, fourier: &Fourier) -> Vec<f64> {
    let mut buf: Vec<Complex64> = density.iter().map(|r| Complex64::new(*r, 0.0)).collect();
    fourier.forward(&mut buf);
    buf.iter_mut().zip(kernel.multiplier()).for_each(|(z, m)| *z *= m);
    fourier.inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

#[derive(Clone, Debug)]
pub enum Nonlinearity {
    Cubic,
    Hartree(HartreeKernel),
}

/// The evolution equation on a fixed grid with a sampled external potential.
#[derive(Clone, Debug)]
pub struct Equation {
    pub model: Model,
    pub fourier: Fourier,
    pub nonlinearity: Nonlinearity,
    pub external: Vec<f64>,
}

/// One `(t, mass, energy)` sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
}

/// Called at every observation time with the current field.
pub trait Observer {
    fn observe(&mut self, t: f64, u: &Field) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Steps between observations (the final time is always observed).
    pub observe_every: usize,
    /// Abort when `max|u|` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
}

impl RunOptions {
    pub fn new(t_final: f64, dt: f64, observe_every: usize) -> Self {
        Self { t_final, dt, observe_every, blowup_factor: 10.0 }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub field: Field,
    pub t: f64,
    pub steps: usize,
    pub conservation: Vec<ConservationRecord>,
}

impl Equation {
    pub fn new(model: Model, grid: &Grid, potential: &ExternalPotential) -> Result<Self> {
        if grid.dim() != model.dim() {
            return Err(Error::Dimension { expected: model.dim(), got: grid.dim() });
        }
        let fourier = Fourier::new(grid);
        let nonlinearity = match model {
            Model::Gp1d => Nonlinearity::Cubic,
            Model::Hartree3d => Nonlinearity::Hartree(HartreeKernel::new(&fourier)?),
        };
        let external = potential.sample(grid)?;
        Ok(Self { model, fourier, nonlinearity, external })
    }

    pub fn grid(&self) -> &Grid {
        self.fourier.grid()
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `N(u)`: the self-consistent potential of `u`.
    pub fn self_potential(&self, u: &Field) -> Vec<f64> {
        let density: Vec<f64> = u.data().iter().map(|z| z.norm_sqr()).collect();
        match &self.nonlinearity {
            Nonlinearity::Cubic => density,
            Nonlinearity::Hartree(k) => hartree_potential(&density, k, &self.fourier),
        }
    }

    /// Energy gradient `-½Δu + V u - N(u) u`.
    pub fn energy_gradient(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = self.fourier.laplacian(u).scaled(Complex64::new(-0.5, 0.0));
        let n = self.self_potential(u);
        for (i, z) in out.data_mut().iter_mut().enumerate() {
            *z += (self.external[i] - n[i]) * u.data()[i];
        }
        Ok(out)
    }

    /// `∂_t u = -i(-½Δu + V u - N(u) u)`.
    pub fn rhs(&self, u: &Field) -> Result<Field> {
        Ok(self.energy_gradient(u)?.scaled(Complex64::new(0.0, -1.0)))
    }

    /// `¼∫|∇u|² - ¼∫N(u)|u|² + ½∫V|u|²`.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let kinetic = self.fourier.gradient_norm_sq(u);
        let n = self.self_potential(u);
        let dv = self.grid().cell_volume();
        let (mut inter, mut ext) = (0.0, 0.0);
        for (i, z) in u.data().iter().enumerate() {
            let rho = z.norm_sqr();
            inter += n[i] * rho;
            ext += self.external[i] * rho;
        }
        Ok(0.25 * kinetic - 0.25 * inter * dv + 0.5 * ext * dv)
    }

    pub fn mass(&self, u: &Field) -> f64 {
        u.mass()
    }

    fn kinetic_factors(&self, tau: f64) -> Vec<Complex64> {
        self.fourier.k_squared().iter().map(|k2| Complex64::from_polar(1.0, -0.5 * k2 * tau)).collect()
    }

    fn kinetic(&self, u: &mut Field, factors: &[Complex64]) {
        let d = u.data_mut();
        self.fourier.forward(d);
        d.iter_mut().zip(factors).for_each(|(z, f)| *z *= f);
        self.fourier.inverse(d);
    }

    /// Exact flow of `i u_t = (V - N(u)) u` over `dt`; `|u|` and hence
    /// `N(u)` are constant along it.
    fn potential_flow(&self, u: &mut Field, dt: f64) {
        let n = self.self_potential(u);
        for (i, z) in u.data_mut().iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, -(self.external[i] - n[i]) * dt);
        }
    }

    /// One Strang step: half kinetic, full potential, half kinetic.
    pub fn step_strang(&self, u: &mut Field, dt: f64) -> Result<()> {
        self.check(u)?;
        let half = self.kinetic_factors(dt / 2.0);
        self.kinetic(u, &half);
        self.potential_flow(u, dt);
        self.kinetic(u, &half);
        Ok(())
    }

    /// Integrates from `u0` at `t = 0`, fusing adjacent kinetic half steps
    /// between observations. Observers and conservation records are taken
    /// at `t = 0`, every `observe_every` steps and at the final time.
    pub fn run(&self, u0: Field, opts: &RunOptions, observers: &mut [&mut dyn Observer]) -> Result<RunOutcome> {
        self.check(&u0)?;
        if !(opts.dt > 0.0 && opts.t_final >= 0.0 && opts.observe_every > 0) {
            return Err(Error::Domain(format!("invalid run options {opts:?}")));
        }
        let steps = opts.steps();
        let half = self.kinetic_factors(opts.dt / 2.0);
        let full = self.kinetic_factors(opts.dt);
        let initial_max = u0.max_abs();
        let mut u = u0;
        let mut records = Vec::new();
        let mut observe = |t: f64, u: &Field, records: &mut Vec<ConservationRecord>| -> Result<()> {
            records.push(ConservationRecord { t, mass: u.mass(), energy: self.energy(u)? });
            for o in observers.iter_mut() {
                o.observe(t, u).map_err(|e| Error::Observer { t, source: Box::new(e) })?;
            }
            Ok(())
        };
        observe(0.0, &u, &mut records)?;
        let mut synced = true;
        let mut t_stable = 0.0;
        for s in 1..=steps {
            self.kinetic(&mut u, if synced { &half } else { &full });
            self.potential_flow(&mut u, opts.dt);
            let t = s as f64 * opts.dt;
            if s % opts.observe_every == 0 || s == steps {
                self.kinetic(&mut u, &half);
                synced = true;
                let m = u.max_abs();
                if !m.is_finite() || m > opts.blowup_factor * initial_max {
                    return Err(Error::Blowup { t_last_stable: t_stable });
                }
                t_stable = t;
                observe(t, &u, &mut records)?;
            } else {
                synced = false;
            }
        }
        Ok(RunOutcome { field: u, t: steps as f64 * opts.dt, steps, conservation: records })
    }
}

/// Writes `u` at time `t`: little-endian `u64` dimension count, `u64` axis
/// sizes, `f64` box lengths, `f64` time, then interleaved `re, im` values in
/// row-major order.
pub fn write_checkpoint(path: &Path, u: &Field, t: f64) -> Result<()> {
    let grid = u.grid();
    let mut buf = Vec::with_capacity(16 * grid.len() + 64);
    buf.extend_from_slice(&(grid.dim() as u64).to_le_bytes());
    for n in grid.shape() {
        buf.extend_from_slice(&(*n as u64).to_le_bytes());
    }
    for l in grid.lengths() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&t.to_le_bytes());
    for z in u.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(Field, f64)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut next = || -> Result<[u8; 8]> {
        let chunk = bytes
            .get(pos..pos + 8)
            .ok_or_else(|| Error::Parse("checkpoint truncated".into()))?
            .try_into()
            .expect("8-byte slice");
        pos += 8;
        Ok(chunk)
    };
    let dim = u64::from_le_bytes(next()?) as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Parse(format!("checkpoint dimension {dim} out of range")));
    }
    let shape: Vec<usize> = (0..dim).map(|_| next().map(|b| u64::from_le_bytes(b) as usize)).collect::<Result<_>>()?;
    let lengths: Vec<f64> = (0..dim).map(|_| next().map(f64::from_le_bytes)).collect::<Result<_>>()?;
    let t = f64::from_le_bytes(next()?);
    let grid = Grid::new(shape, lengths)?;
    let mut data = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = f64::from_le_bytes(next()?);
        let im = f64::from_le_bytes(next()?);
        data.push(Complex64::new(re, im));
    }
    if next().is_ok() {
        return Err(Error::Parse("trailing bytes in checkpoint".into()));
    }
    Ok((Field::from_vec(&grid, data)?, t))
}
