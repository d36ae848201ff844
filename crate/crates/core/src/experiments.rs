//! Tracking experiments: the PDE started near the soliton manifold, run next
//! to the effective ODE, with modulation fits along the way; `h`-sweeps with
//! a half-step companion run for the time-discretisation error.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::effective::{EffectiveModel, EffectiveState, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{Field, Fourier, Grid};
use crate::groundstate::{GroundState, Model};
use crate::modulation::{self, alpha_beta, build_wtilde, compute_x, lie_norm, FitOptions, ModulationRecord};
use crate::pde::{Equation, Observer, RunOptions};
use crate::potential::{ExternalPotential, Landscape};
use crate::spectral::LinearizedOperator;
use crate::stats::loglog_slope;
use crate::symmetry::{act, GroupElement, GroupTangent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveSpec {
    pub model: Model,
    pub landscape: Landscape,
    pub h: f64,
    pub points: usize,
    pub box_len: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Time between observations; a multiple of `dt`.
    pub observe_dt: f64,
    pub a0: Vec<f64>,
    pub v0: Vec<f64>,
    /// `H¹` size of the symplectically orthogonal initial perturbation.
    pub eps0: f64,
    pub seed: u64,
    /// Run the modulation fit at every observation.
    pub fit: bool,
    /// Evaluate the corrector and `⟨Lw₁, w₁⟩` every this many fits (0: never).
    pub corrector_every: usize,
    pub fit_tol: f64,
    /// Keep the field at every observation (used for the half-step comparison).
    pub keep_snapshots: bool,
}

impl EvolveSpec {
    /// Defaults for the 1D cubic NLS with `W = cos`.
    pub fn gp_default() -> Self {
        Self {
            model: Model::Gp1d,
            landscape: Landscape::Cosine { amplitude: 1.0, wave: vec![1.0], phase: 0.0 },
            h: 0.1,
            points: 4096,
            box_len: 200.0,
            dt: 0.005,
            t_final: 10.0,
            observe_dt: 0.5,
            a0: vec![0.0],
            v0: vec![0.5],
            eps0: 0.0,
            seed: 1,
            fit: true,
            corrector_every: 1,
            fit_tol: 1e-10,
            keep_snapshots: false,
        }
    }

    /// Defaults for the 3D Hartree equation with `W = -cos(x_1)`.
    pub fn hartree_default() -> Self {
        Self {
            model: Model::Hartree3d,
            landscape: Landscape::Cosine { amplitude: -1.0, wave: vec![1.0, 0.0, 0.0], phase: 0.0 },
            h: 0.1,
            points: 128,
            box_len: 40.0,
            dt: 0.05,
            t_final: 50.0,
            observe_dt: 1.0,
            a0: vec![0.0; 3],
            v0: vec![0.3, 0.0, 0.0],
            eps0: 0.0,
            seed: 1,
            fit: true,
            corrector_every: 0,
            fit_tol: 1e-9,
            keep_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        if self.a0.len() != d || self.v0.len() != d {
            return Err(Error::Dimension { expected: d, got: self.a0.len().min(self.v0.len()) });
        }
        self.landscape.validate(d)?;
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::Domain(format!("h must lie in (0, 1], got {}", self.h)));
        }
        if !(self.dt > 0.0 && self.t_final >= 0.0 && self.observe_dt >= self.dt && self.box_len > 0.0) {
            return Err(Error::Domain("need dt > 0, t_final ≥ 0, observe_dt ≥ dt, box > 0".into()));
        }
        let ratio = self.observe_dt / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::Domain(format!("observe_dt {} is not a multiple of dt {}", self.observe_dt, self.dt)));
        }
        if !(self.eps0 >= 0.0) {
            return Err(Error::Domain(format!("eps0 must be non-negative, got {}", self.eps0)));
        }
        Ok(())
    }

    fn observe_every(&self) -> usize {
        (self.observe_dt / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveRecord {
    pub t: f64,
    /// `‖u - g_eff·η‖_{H¹}`.
    pub tracking_h1: f64,
    /// `‖w‖_{H¹}` of the modulation fit (NaN without a fit).
    pub w_h1: f64,
    pub mass: f64,
    pub energy: f64,
    pub fit: Option<GroupElement>,
    pub max_residual: f64,
    /// `|X|` from centred differences of the fitted parameters.
    pub x_norm: f64,
    pub lyapounov: f64,
    pub corrector_h1: f64,
    pub theta: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveReport {
    pub spec: EvolveSpec,
    pub records: Vec<EvolveRecord>,
    pub effective: Trajectory,
    pub sup_tracking: f64,
    pub sup_w: f64,
    /// Time of the first failed modulation fit; fitting stops there.
    pub fit_failure: Option<f64>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub snapshots: Vec<Field>,
}

impl EvolveReport {
    /// Columns `t, tracking_h1, w_h1, mass, energy, x_norm, lyapounov, corrector_h1, theta, max_residual`.
    pub fn tracking_csv(&self) -> String {
        let mut out = String::from("t,tracking_h1,w_h1,mass,energy,x_norm,lyapounov,corrector_h1,theta,max_residual\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:.10e},{:.10e},{:.10e},{:.15e},{:.15e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                r.t, r.tracking_h1, r.w_h1, r.mass, r.energy, r.x_norm, r.lyapounov, r.corrector_h1, r.theta, r.max_residual
            );
        }
        out
    }

    pub fn modulation_rows(&self) -> Vec<ModulationRecord> {
        self.records
            .iter()
            .filter_map(|r| {
                r.fit.as_ref().map(|g| ModulationRecord {
                    t: r.t,
                    g: g.clone(),
                    w_h1: r.w_h1,
                    x_norm: r.x_norm,
                    lyapounov: r.lyapounov,
                    max_residual: r.max_residual,
                })
            })
            .collect()
    }

    /// Smallest `c` with `|X| ≤ c(h²‖w‖ + ‖w‖² + ‖w‖³)` at every sample.
    /// Samples with `‖w‖ < 1e-8` are skipped: there `|X|` is time-differencing noise.
    pub fn x_bound_constant(&self) -> f64 {
        let h2 = self.spec.h * self.spec.h;
        self.records
            .iter()
            .filter(|r| r.x_norm.is_finite() && r.w_h1.is_finite() && r.w_h1 >= 1e-8)
            .map(|r| r.x_norm / (h2 * r.w_h1 + r.w_h1.powi(2) + r.w_h1.powi(3)))
            .fold(0.0, f64::max)
    }
}

/// Smooth random field from a seed: a sum of modulated Gaussian bumps.
pub fn random_field(grid: &Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let bumps: Vec<(Vec<f64>, f64, Complex64, Vec<f64>)> = (0..6)
        .map(|_| {
            let c = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w = rng.random_range(0.6..2.0);
            let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let k = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            (c, w, amp, k)
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, amp, k)| {
                let r2: f64 = (0..d).map(|j| (x[j] - c[j]).powi(2)).sum();
                let phase: f64 = (0..d).map(|j| k[j] * x[j]).sum();
                amp * Complex64::from_polar((-r2 / (w * w)).exp(), phase)
            })
            .sum()
    })
}

/// `g₀·(η + ε₀φ)` with `φ` a seeded random field made symplectically
/// orthogonal to the tangent space and normalised in `H¹`.
pub fn initial_data(gs: &GroundState, fourier: &Fourier, g0: &GroupElement, eps0: f64, seed: u64) -> Result<Field> {
    let mut base = gs.field.clone();
    if eps0 > 0.0 {
        let phi = modulation::orthogonalize(&random_field(gs.grid(), seed), gs, fourier)?;
        base.axpy(Complex64::new(eps0, 0.0), &phi)?;
    }
    act(g0, &base, fourier)
}

/// Effective trajectory sampled exactly at the observation times.
fn effective_trajectory(model: &EffectiveModel, s0: &EffectiveState, spec: &EvolveSpec) -> Result<Trajectory> {
    let speed = s0.v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let max_dt = 0.01 / speed.max(1.0);
    let sub = (spec.observe_dt / max_dt).ceil().max(1.0) as usize;
    let dt = spec.observe_dt / sub as f64;
    model.integrate(s0, spec.t_final, dt, sub)
}

struct Tracker<'a> {
    gs: &'a GroundState,
    fourier: &'a Fourier,
    model: &'a EffectiveModel,
    op: Option<&'a LinearizedOperator>,
    spec: &'a EvolveSpec,
    effective: &'a Trajectory,
    last: Option<(f64, GroupElement)>,
    fits: usize,
    fit_failure: Option<f64>,
    records: Vec<EvolveRecord>,
    snapshots: Vec<Field>,
}

impl Tracker<'_> {
    fn warm_start(&self, t: f64) -> Result<GroupElement> {
        match &self.last {
            None => Ok(GroupElement::new(self.spec.a0.clone(), self.spec.v0.clone(), 0.0, 1.0)?),
            Some((t0, g)) if t > *t0 => {
                let mut s = EffectiveState::from_group(g);
                s.t = *t0;
                let speed = s.v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let n = ((t - t0) / (0.01 / speed.max(1.0))).ceil().max(1.0);
                let tr = self.model.integrate(&s, t, (t - t0) / n, usize::MAX);
                Ok(tr.ok().and_then(|mut tr| tr.states.pop()).map_or_else(|| g.clone(), |s| s.group_element()))
            }
            Some((_, g)) => Ok(g.clone()),
        }
    }
}

impl Observer for Tracker<'_> {
    fn observe(&mut self, t: f64, u: &Field) -> Result<()> {
        let k = (t / self.spec.observe_dt).round() as usize;
        let eff = self.effective.states.get(k).unwrap_or_else(|| self.effective.states.last().expect("nonempty"));
        let orbit = self.gs.orbit_field(self.gs.grid(), &eff.group_element());
        let tracking_h1 = self.fourier.h1_distance(u, &orbit)?;
        let mut rec = EvolveRecord {
            t,
            tracking_h1,
            w_h1: f64::NAN,
            mass: f64::NAN,
            energy: f64::NAN,
            fit: None,
            max_residual: f64::NAN,
            x_norm: f64::NAN,
            lyapounov: f64::NAN,
            corrector_h1: f64::NAN,
            theta: f64::NAN,
        };
        if self.spec.fit && self.fit_failure.is_none() {
            let guess = self.warm_start(t)?;
            let opts = FitOptions { tol: self.spec.fit_tol, ..FitOptions::default() };
            match modulation::fit(u, &guess, self.gs, self.fourier, &opts) {
                Ok(dec) => {
                    rec.w_h1 = dec.w_h1;
                    rec.max_residual = dec.max_residual();
                    if let (Some(op), true) = (self.op, self.spec.corrector_every > 0 && self.fits % self.spec.corrector_every.max(1) == 0) {
                        let c = build_wtilde(op, &self.model.potential, &dec.g.a, dec.g.mu, &dec.g.v, 0.0, 1e-10)?;
                        let w1 = dec.w.sub(&c.field)?;
                        rec.lyapounov = modulation::lyapounov(op, &w1)?;
                        rec.corrector_h1 = self.fourier.h1_norm(&c.field);
                        rec.theta = c.theta_norm();
                    }
                    self.fits += 1;
                    self.last = Some((t, dec.g.clone()));
                    rec.fit = Some(dec.g);
                }
                Err(Error::FitDivergence { .. }) => {
                    log::warn!("modulation fit diverged at t = {t}; continuing without fits");
                    self.fit_failure = Some(t);
                }
                Err(e) => return Err(e),
            }
        }
        if self.spec.keep_snapshots {
            self.snapshots.push(u.clone());
        }
        self.records.push(rec);
        Ok(())
    }
}

/// `|X|` at every interior record with a fit, from centred differences of
/// the fitted parameters.
fn fill_x(records: &mut [EvolveRecord], model: &EffectiveModel, lambda: f64) -> Result<()> {
    let idx: Vec<usize> = records.iter().enumerate().filter(|(_, r)| r.fit.is_some()).map(|(i, _)| i).collect();
    for n in 1..idx.len().saturating_sub(1) {
        let (lo, i, hi) = (idx[n - 1], idx[n], idx[n + 1]);
        let (gl, gh) = (records[lo].fit.clone().expect("fit"), records[hi].fit.clone().expect("fit"));
        let dt = records[hi].t - records[lo].t;
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect() };
        let gdot = GroupTangent {
            a: diff(&gl.a, &gh.a),
            v: diff(&gl.v, &gh.v),
            gamma: (gh.gamma - gl.gamma) / dt,
            mu: (gh.mu - gl.mu) / dt,
        };
        let g = records[i].fit.clone().expect("fit");
        let (alpha, beta) = alpha_beta(model, &g.a, g.mu);
        records[i].x_norm = lie_norm(&compute_x(&g, &gdot, alpha, &beta, lambda)?);
    }
    Ok(())
}

/// Runs the PDE from `g₀·(η + ε₀φ)` with `g₀ = (a₀, v₀, 0, 1)` and the
/// effective ODE from `g₀`, recording the tracking error at each observation.
/// `profile` supplies the ground state; it is resampled on the run grid.
pub fn evolve(spec: &EvolveSpec, profile: &GroundState) -> Result<EvolveReport> {
    spec.validate()?;
    if profile.model != spec.model {
        return Err(Error::Domain("ground state belongs to another model".into()));
    }
    let d = spec.model.dim();
    let grid = Grid::cube(d, spec.points, spec.box_len)?;
    let gs = profile.on_grid(&grid)?;
    let fourier = Fourier::new(&grid);
    let pot = ExternalPotential::new(spec.landscape.clone(), spec.h, d)?;
    let eq = Equation::new(spec.model, &grid, &pot)?;
    let model = EffectiveModel::new(&gs, &pot)?;
    let g0 = GroupElement::new(spec.a0.clone(), spec.v0.clone(), 0.0, 1.0)?;
    let u0 = initial_data(&gs, &fourier, &g0, spec.eps0, spec.seed)?;
    let s0 = EffectiveState::from_group(&g0);
    let effective = effective_trajectory(&model, &s0, spec)?;
    let op = if spec.fit && spec.corrector_every > 0 { Some(LinearizedOperator::new(&gs)?) } else { None };
    let mut tracker = Tracker {
        gs: &gs,
        fourier: &fourier,
        model: &model,
        op: op.as_ref(),
        spec,
        effective: &effective,
        last: None,
        fits: 0,
        fit_failure: None,
        records: Vec::new(),
        snapshots: Vec::new(),
    };
    let opts = RunOptions::new(spec.t_final, spec.dt, spec.observe_every());
    let outcome = eq.run(u0, &opts, &mut [&mut tracker])?;
    let Tracker { mut records, fit_failure, snapshots, .. } = tracker;
    for (r, c) in records.iter_mut().zip(&outcome.conservation) {
        r.mass = c.mass;
        r.energy = c.energy;
    }
    fill_x(&mut records, &model, gs.lambda)?;
    let (m0, e0) = (outcome.conservation[0].mass, outcome.conservation[0].energy);
    let mass_drift = outcome.conservation.iter().map(|c| (c.mass - m0).abs() / m0).fold(0.0, f64::max);
    let energy_drift = outcome.conservation.iter().map(|c| (c.energy - e0).abs()).fold(0.0, f64::max);
    let sup_tracking = records.iter().map(|r| r.tracking_h1).fold(0.0, f64::max);
    let sup_w = records.iter().map(|r| r.w_h1).filter(|w| w.is_finite()).fold(0.0, f64::max);
    Ok(EvolveReport {
        spec: spec.clone(),
        records,
        effective,
        sup_tracking,
        sup_w,
        fit_failure,
        mass_drift,
        energy_drift,
        snapshots,
    })
}

/// Time-discretisation error estimate for a second-order scheme:
/// `(4/3) max_t ‖u_dt(t) - u_{dt/2}(t)‖_{H¹}` from the kept snapshots.
pub fn richardson_estimate(coarse: &EvolveReport, fine: &EvolveReport) -> Result<f64> {
    if coarse.snapshots.len() != fine.snapshots.len() || coarse.snapshots.is_empty() {
        return Err(Error::Domain("runs must keep matching snapshots".into()));
    }
    let fourier = Fourier::new(coarse.snapshots[0].grid());
    let mut worst: f64 = 0.0;
    for (a, b) in coarse.snapshots.iter().zip(&fine.snapshots) {
        worst = worst.max(fourier.h1_distance(a, b)?);
    }
    Ok(4.0 / 3.0 * worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HorizonRule {
    Fixed { t: f64 },
    /// `c₁/h + δ log(1/h)/(c₂ h)`.
    Theorem { c1: f64, c2: f64, delta: f64 },
}

impl HorizonRule {
    pub fn horizon(&self, h: f64) -> f64 {
        match self {
            HorizonRule::Fixed { t } => *t,
            HorizonRule::Theorem { c1, c2, delta } => c1 / h + delta * (1.0 / h).ln() / (c2 * h),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: EvolveSpec,
    pub h_list: Vec<f64>,
    pub horizon: HorizonRule,
    /// `ε₀ = eps_scale · h^eps_power` (`eps_scale = 0` for unperturbed data).
    pub eps_scale: f64,
    pub eps_power: f64,
    /// Also run at `dt/2` and report the time-discretisation error.
    pub richardson: bool,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub h: f64,
    pub t_final: f64,
    pub eps0: f64,
    pub sup_tracking: f64,
    pub sup_w: f64,
    pub richardson_error: Option<f64>,
    /// `sup_tracking / (ε₀ + h²)`.
    pub constant: f64,
    pub mass_drift: f64,
    pub fit_failure: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the tracking error against `h`; `None` when degenerate.
    pub slope: Option<f64>,
    /// `exp(mean ln(sup/(ε₀ + h²)))`.
    pub fitted_constant: Option<f64>,
    /// Largest over smallest of the per-`h` constants.
    pub constant_spread: Option<f64>,
}

impl SweepReport {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

fn sweep_member(spec: &SweepSpec, h: f64, profile: &GroundState) -> SweepRow {
    let mut s = spec.base.clone();
    s.h = h;
    s.t_final = spec.horizon.horizon(h);
    // observation times land on whole steps
    let per_obs = (s.observe_dt / s.dt).round().max(1.0);
    let obs = (s.t_final / s.observe_dt).ceil().max(1.0);
    s.t_final = obs * per_obs * s.dt;
    s.eps0 = spec.eps_scale * h.powf(spec.eps_power);
    s.keep_snapshots = spec.richardson;
    let mut row = SweepRow {
        h,
        t_final: s.t_final,
        eps0: s.eps0,
        sup_tracking: f64::NAN,
        sup_w: f64::NAN,
        richardson_error: None,
        constant: f64::NAN,
        mass_drift: f64::NAN,
        fit_failure: None,
        error: None,
    };
    let mut run = || -> Result<()> {
        let coarse = evolve(&s, profile)?;
        row.sup_tracking = coarse.sup_tracking;
        row.sup_w = coarse.sup_w;
        row.mass_drift = coarse.mass_drift;
        row.fit_failure = coarse.fit_failure;
        row.constant = coarse.sup_tracking / (s.eps0 + h * h);
        if spec.richardson {
            let mut fine_spec = s.clone();
            fine_spec.dt = s.dt / 2.0;
            fine_spec.fit = false;
            let fine = evolve(&fine_spec, profile)?;
            row.richardson_error = Some(richardson_estimate(&coarse, &fine)?);
        }
        Ok(())
    };
    if let Err(e) = run() {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs one tracking experiment per `h`, `threads` at a time.
pub fn sweep(spec: &SweepSpec, profile: &GroundState) -> Result<SweepReport> {
    spec.base.validate()?;
    if spec.h_list.is_empty() || spec.h_list.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
        return Err(Error::Domain("h_list entries must lie in (0, 1]".into()));
    }
    let threads = spec.threads.max(1);
    let mut rows: Vec<SweepRow> = Vec::with_capacity(spec.h_list.len());
    for chunk in spec.h_list.chunks(threads) {
        let done: Vec<SweepRow> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|&h| scope.spawn(move || sweep_member(spec, h, profile))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        rows.extend(done);
    }
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let hs: Vec<f64> = ok.iter().map(|r| r.h).collect();
    let errs: Vec<f64> = ok.iter().map(|r| r.sup_tracking).collect();
    let slope = loglog_slope(&hs, &errs);
    let cs: Vec<f64> = ok.iter().map(|r| r.constant).filter(|c| c.is_finite() && *c > 0.0).collect();
    let (fitted_constant, constant_spread) = if cs.is_empty() {
        (None, None)
    } else {
        let mean_log = cs.iter().map(|c| c.ln()).sum::<f64>() / cs.len() as f64;
        let max = cs.iter().cloned().fold(f64::MIN, f64::max);
        let min = cs.iter().cloned().fold(f64::MAX, f64::min);
        (Some(mean_log.exp()), Some(max / min))
    };
    Ok(SweepReport { rows, slope, fitted_constant, constant_spread })
}

/// Columns `h, t_final, eps0, sup_tracking, sup_w, richardson_error, constant, mass_drift, status`.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("h,t_final,eps0,sup_tracking,sup_w,richardson_error,constant,mass_drift,status\n");
    for r in &report.rows {
        let status = match (&r.error, r.fit_failure) {
            (Some(_), _) => "error".to_string(),
            (None, Some(t)) => format!("fit-diverged@{t}"),
            (None, None) => "ok".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{:.10e},{:.10e},{:.10e},{},{:.10e},{:.10e},{status}",
            r.h,
            r.t_final,
            r.eps0,
            r.sup_tracking,
            r.sup_w,
            r.richardson_error.map_or("n/a".to_string(), |e| format!("{e:.10e}")),
            r.constant,
            r.mass_drift
        );
    }
    out
}
