//! Effective Hamiltonian dynamics of the soliton parameters `(a, v, γ, μ)`
//! in a slowly varying potential, and the perturbed-trajectory comparison.
//!
//! On the soliton manifold `H_V(g·η) = μ|v|²/2 - λμ³/3 + (μ/2)∫V(y/μ + a)η²(y)dy`
//! and the restricted symplectic form is `μ dv∧da + v dμ∧da + dγ∧dμ`, which gives
//! `ȧ = v`, `v̇ = -½∫∇V(y/μ + a)η²`, `μ̇ = 0` and
//! `γ̇ = ½|v|² + λμ² - ½∫V(y/μ + a)η² + (1/2μ)∫y·∇V(y/μ + a)η²`.

use std::fmt::Write as _;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::{GroundState, Model};
use crate::potential::{ExternalPotential, Landscape};
use crate::stats::loglog_slope;
use crate::symmetry::GroupElement;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveState {
    pub t: f64,
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
    pub mu: f64,
}

impl EffectiveState {
    pub fn new(a: Vec<f64>, v: Vec<f64>, gamma: f64, mu: f64) -> Result<Self> {
        GroupElement::new(a.clone(), v.clone(), gamma, mu)?;
        Ok(Self { t: 0.0, a, v, gamma, mu })
    }

    pub fn from_group(g: &GroupElement) -> Self {
        Self { t: 0.0, a: g.a.clone(), v: g.v.clone(), gamma: g.gamma, mu: g.mu }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn group_element(&self) -> GroupElement {
        GroupElement { a: self.a.clone(), v: self.v.clone(), gamma: self.gamma, mu: self.mu }
    }
}

/// Quadrature for `∫ F(y) η²(y) dy`: weights already carry `η²`.
#[derive(Clone, Debug)]
pub struct SolitonQuadrature {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Moments of the potential seen by a soliton at `(a, μ)`, all against `η²(y)dy`:
/// `∫V(y/μ + a)`, `∫∇V(y/μ + a)`, `∫y·∇V(y/μ + a)` and `∫∇²V(y/μ + a)` (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialMoments {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub virial: f64,
    pub hessian: Vec<f64>,
}

impl SolitonQuadrature {
    /// Trapezoid rule on `[-30, 30]` (1D, spacing 0.03) or a spherical
    /// Gauss–Legendre × Gauss–Legendre × trapezoid product rule on `r ≤ 20` (3D).
    pub fn new(gs: &GroundState) -> Self {
        match gs.model {
            Model::Gp1d => Self::line(gs, 30.0, 2001),
            Model::Hartree3d => Self::spherical(gs, 20.0, 48, 16, 24),
        }
    }

    /// `n` equispaced nodes on `[-half_width, half_width]`.
    pub fn line(gs: &GroundState, half_width: f64, n: usize) -> Self {
        let dx = 2.0 * half_width / (n as f64 - 1.0);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let x = -half_width + i as f64 * dx;
            let e = gs.profile.eval(x.abs()).0;
            let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            nodes.push(x);
            weights.push(end * dx * e * e);
        }
        Self { dim: 1, nodes, weights }
    }

    /// Product rule in spherical coordinates with `n_r` radial and
    /// `n_theta` polar Gauss–Legendre nodes and `n_phi` azimuthal points.
    pub fn spherical(gs: &GroundState, r_max: f64, n_r: usize, n_theta: usize, n_phi: usize) -> Self {
        let gl = |n: usize| GaussLegendre::new(NonZeroUsize::new(n.max(1)).expect("positive")).as_node_weight_pairs().to_vec();
        let radial = gl(n_r);
        let polar = gl(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(3 * n_r * n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_r * n_theta * n_phi);
        for &(xr, wr) in &radial {
            let r = 0.5 * r_max * (xr + 1.0);
            let e = gs.profile.eval(r).0;
            let wr = 0.5 * r_max * wr * r * r * e * e;
            for &(c, wc) in &polar {
                let s = (1.0 - c * c).sqrt();
                for k in 0..n_phi {
                    let phi = k as f64 * dphi;
                    nodes.extend_from_slice(&[r * s * phi.cos(), r * s * phi.sin(), r * c]);
                    weights.push(wr * wc * dphi);
                }
            }
        }
        Self { dim: 3, nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `∫ f(y) η²(y) dy`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.chunks(self.dim).zip(&self.weights).map(|(y, w)| w * f(y)).sum()
    }

    /// `∫ η²`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn moments(&self, pot: &ExternalPotential, a: &[f64], mu: f64) -> PotentialMoments {
        self.accumulate(pot, a, mu, true)
    }

    /// Same as [`Self::moments`] without the Hessian (left zero).
    pub fn accumulate_without_hessian(&self, pot: &ExternalPotential, a: &[f64], mu: f64) -> PotentialMoments {
        self.accumulate(pot, a, mu, false)
    }

    fn accumulate(&self, pot: &ExternalPotential, a: &[f64], mu: f64, with_hessian: bool) -> PotentialMoments {
        let d = self.dim;
        let mut m = PotentialMoments { value: 0.0, gradient: vec![0.0; d], virial: 0.0, hessian: vec![0.0; d * d] };
        let mut x = [0.0; 3];
        let mut g = [0.0; 3];
        let mut h = [0.0; 9];
        for (y, w) in self.nodes.chunks(d).zip(&self.weights) {
            for j in 0..d {
                x[j] = y[j] / mu + a[j];
            }
            m.value += w * pot.value(&x[..d]);
            pot.gradient(&x[..d], &mut g[..d]);
            for j in 0..d {
                m.gradient[j] += w * g[j];
                m.virial += w * y[j] * g[j];
            }
            if with_hessian {
                pot.hessian(&x[..d], &mut h[..d * d]);
                for k in 0..d * d {
                    m.hessian[k] += w * h[k];
                }
            }
        }
        m
    }
}

/// The effective ODE system for one ground state and potential.
#[derive(Clone, Debug)]
pub struct EffectiveModel {
    pub quadrature: SolitonQuadrature,
    pub potential: ExternalPotential,
    pub lambda: f64,
}

/// Sampled effective trajectory with the restricted Hamiltonian at each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<EffectiveState>,
    pub energies: Vec<f64>,
}

impl Trajectory {
    /// Columns `t, a_1..a_d, v_1..v_d, gamma, mu, energy`.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(1, |s| s.dim());
        let mut out = String::from("t");
        (1..=d).for_each(|j| out.push_str(&format!(",a_{j}")));
        (1..=d).for_each(|j| out.push_str(&format!(",v_{j}")));
        out.push_str(",gamma,mu,energy\n");
        for (s, e) in self.states.iter().zip(&self.energies) {
            let _ = write!(out, "{:.10e}", s.t);
            for x in s.a.iter().chain(&s.v) {
                let _ = write!(out, ",{x:.10e}");
            }
            let _ = writeln!(out, ",{:.10e},{:.10e},{e:.10e}", s.gamma, s.mu);
        }
        out
    }
}

impl EffectiveModel {
    pub fn new(gs: &GroundState, potential: &ExternalPotential) -> Result<Self> {
        if potential.dim != gs.dim() {
            return Err(Error::Dimension { expected: gs.dim(), got: potential.dim });
        }
        Ok(Self { quadrature: SolitonQuadrature::new(gs), potential: potential.clone(), lambda: gs.lambda })
    }

    pub fn dim(&self) -> usize {
        self.quadrature.dim()
    }

    pub fn moments(&self, a: &[f64], mu: f64) -> PotentialMoments {
        self.quadrature.moments(&self.potential, a, mu)
    }

    /// `v̇ = -½∫∇V(y/μ + a)η²(y)dy`; at `μ = 1` this is `-∇V̄(a)` with `V̄ = V*η²/2`.
    pub fn force(&self, a: &[f64], mu: f64) -> Vec<f64> {
        self.quadrature.accumulate(&self.potential, a, mu, false).gradient.iter().map(|g| -0.5 * g).collect()
    }

    pub fn gamma_rate(&self, s: &EffectiveState) -> f64 {
        let m = self.quadrature.accumulate(&self.potential, &s.a, s.mu, false);
        let v2: f64 = s.v.iter().map(|x| x * x).sum();
        0.5 * v2 + self.lambda * s.mu * s.mu - 0.5 * m.value + m.virial / (2.0 * s.mu)
    }

    /// `H_V` restricted to the soliton manifold.
    pub fn hamiltonian(&self, s: &EffectiveState) -> f64 {
        let m = self.quadrature.accumulate(&self.potential, &s.a, s.mu, false);
        let v2: f64 = s.v.iter().map(|x| x * x).sum();
        0.5 * v2 * s.mu - self.lambda * s.mu.powi(3) / 3.0 + 0.5 * s.mu * m.value
    }

    /// `½|v|² + ½∫V(y/μ + a)η²`, conserved together with `μ`.
    pub fn classical_energy(&self, s: &EffectiveState) -> f64 {
        let v2: f64 = s.v.iter().map(|x| x * x).sum();
        0.5 * v2 + 0.5 * self.quadrature.accumulate(&self.potential, &s.a, s.mu, false).value
    }

    /// `(ȧ, v̇, γ̇)` in one quadrature pass.
    fn rates(&self, a: &[f64], v: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let m = self.quadrature.accumulate(&self.potential, a, mu, false);
        let v2: f64 = v.iter().map(|x| x * x).sum();
        let gdot = 0.5 * v2 + self.lambda * mu * mu - 0.5 * m.value + m.virial / (2.0 * mu);
        (v.to_vec(), m.gradient.iter().map(|g| -0.5 * g).collect(), gdot)
    }

    /// One classical RK4 step; `μ` is not stepped.
    pub fn step(&self, s: &EffectiveState, dt: f64) -> EffectiveState {
        let d = s.dim();
        let shift = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + c * k).collect() };
        let (ka1, kv1, kg1) = self.rates(&s.a, &s.v, s.mu);
        let (ka2, kv2, kg2) = self.rates(&shift(&s.a, &ka1, dt / 2.0), &shift(&s.v, &kv1, dt / 2.0), s.mu);
        let (ka3, kv3, kg3) = self.rates(&shift(&s.a, &ka2, dt / 2.0), &shift(&s.v, &kv2, dt / 2.0), s.mu);
        let (ka4, kv4, kg4) = self.rates(&shift(&s.a, &ka3, dt), &shift(&s.v, &kv3, dt), s.mu);
        let comb = |x: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
            (0..d).map(|j| x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).collect()
        };
        EffectiveState {
            t: s.t + dt,
            a: comb(&s.a, &ka1, &ka2, &ka3, &ka4),
            v: comb(&s.v, &kv1, &kv2, &kv3, &kv4),
            gamma: s.gamma + dt / 6.0 * (kg1 + 2.0 * kg2 + 2.0 * kg3 + kg4),
            mu: s.mu,
        }
    }

    /// Fixed-step RK4 from `state0` to `t_final` (signed; negative runs
    /// backwards), sampling every `sample_every` steps and at the end.
    /// Requires `|dt| ≤ 0.01/max(1, |v₀|)`; a step whose restricted energy
    /// jumps by more than `1e-6` is rejected.
    pub fn integrate(&self, state0: &EffectiveState, t_final: f64, dt: f64, sample_every: usize) -> Result<Trajectory> {
        let speed = state0.v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if dt == 0.0 || dt.abs() > 0.01 / speed.max(1.0) * (1.0 + 1e-12) || sample_every == 0 {
            return Err(Error::Domain(format!("step {dt} exceeds 0.01/max(1,|v0|) or is zero")));
        }
        if state0.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: state0.dim() });
        }
        let steps = ((t_final - state0.t) / dt).round();
        if steps < 0.0 {
            return Err(Error::Domain("step has the wrong sign for the requested horizon".into()));
        }
        let steps = steps as usize;
        let mut s = state0.clone();
        let mut e = self.hamiltonian(&s);
        let mut out = Trajectory { states: vec![s.clone()], energies: vec![e] };
        for k in 1..=steps {
            let mut next = self.step(&s, dt);
            next.t = state0.t + k as f64 * dt;
            let en = self.hamiltonian(&next);
            if (en - e).abs() > 1e-6 || !en.is_finite() {
                return Err(Error::StepRejected { t: s.t, jump: (en - e).abs() });
            }
            s = next;
            e = en;
            if k % sample_every == 0 || k == steps {
                out.states.push(s.clone());
                out.energies.push(e);
            }
        }
        Ok(out)
    }
}

/// Largest deviations between the perturbed and the exact trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub sup_a: f64,
    pub sup_v: f64,
}

/// Integrates `ȧ = v + ε₁(t), v̇ = F(a) + ε₂(t)` next to `ȧ = v, v̇ = F(a)`
/// from the same data with RK4 and returns the sup-norm deviations.
pub fn compare_perturbed(
    force: &dyn Fn(&[f64]) -> Vec<f64>,
    eps1: &dyn Fn(f64) -> f64,
    eps2: &dyn Fn(f64) -> f64,
    a0: &[f64],
    v0: &[f64],
    t_final: f64,
    dt: f64,
) -> Divergence {
    let d = a0.len();
    let rhs = |t: f64, a: &[f64], v: &[f64], perturbed: bool| -> (Vec<f64>, Vec<f64>) {
        let (e1, e2) = if perturbed { (eps1(t), eps2(t)) } else { (0.0, 0.0) };
        let f = force(a);
        ((0..d).map(|j| v[j] + e1).collect(), (0..d).map(|j| f[j] + e2).collect())
    };
    let rk4 = |t: f64, a: &[f64], v: &[f64], perturbed: bool| -> (Vec<f64>, Vec<f64>) {
        let add = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + c * k).collect() };
        let (a1, v1) = rhs(t, a, v, perturbed);
        let (a2, v2) = rhs(t + dt / 2.0, &add(a, &a1, dt / 2.0), &add(v, &v1, dt / 2.0), perturbed);
        let (a3, v3) = rhs(t + dt / 2.0, &add(a, &a2, dt / 2.0), &add(v, &v2, dt / 2.0), perturbed);
        let (a4, v4) = rhs(t + dt, &add(a, &a3, dt), &add(v, &v3, dt), perturbed);
        let comb = |x: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
            (0..d).map(|j| x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).collect()
        };
        (comb(a, &a1, &a2, &a3, &a4), comb(v, &v1, &v2, &v3, &v4))
    };
    let steps = (t_final / dt).round() as usize;
    let (mut a, mut v) = (a0.to_vec(), v0.to_vec());
    let (mut ab, mut vb) = (a0.to_vec(), v0.to_vec());
    let mut out = Divergence { sup_a: 0.0, sup_v: 0.0 };
    for k in 0..steps {
        let t = k as f64 * dt;
        (a, v) = rk4(t, &a, &v, true);
        (ab, vb) = rk4(t, &ab, &vb, false);
        let da = a.iter().zip(&ab).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let dv = v.iter().zip(&vb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        out.sup_a = out.sup_a.max(da);
        out.sup_v = out.sup_v.max(dv);
    }
    out
}

/// `1/h + δ log(1/h)/h`.
pub fn divergence_horizon(h: f64, delta: f64) -> f64 {
    (1.0 + delta * (1.0 / h).ln()) / h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub h: f64,
    pub horizon: f64,
    pub eps: f64,
    pub sup_a: f64,
    pub sup_v: f64,
    /// `sup_a / (h^{2-2δ} log(1/h))`.
    pub c_a: f64,
    /// `sup_v / (h^{3-2δ} log(1/h))`.
    pub c_v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScan {
    pub delta: f64,
    pub rows: Vec<DivergenceRow>,
    pub slope_a: Option<f64>,
    pub slope_v: Option<f64>,
    pub c_a: f64,
    pub c_v: f64,
}

/// For each `h`, compares the effective force system for `V = W(hx)` with
/// its perturbation by the constants `ε₁ = ε₂ = scale·h^{4-δ}` over
/// `[0, 1/h + δ log(1/h)/h]` and fits the divergence exponents.
pub fn divergence_scan(
    gs: &GroundState,
    landscape: &Landscape,
    h_list: &[f64],
    delta: f64,
    state0: &EffectiveState,
    scale: f64,
    dt: f64,
) -> Result<DivergenceScan> {
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let pot = ExternalPotential::new(landscape.clone(), h, gs.dim())?;
        let model = EffectiveModel::new(gs, &pot)?;
        let mu = state0.mu;
        let force = |a: &[f64]| model.force(a, mu);
        let eps = scale * h.powf(4.0 - delta);
        let e = move |_t: f64| eps;
        let horizon = divergence_horizon(h, delta);
        let dv = compare_perturbed(&force, &e, &e, &state0.a, &state0.v, horizon, dt);
        let log = (1.0 / h).ln();
        rows.push(DivergenceRow {
            h,
            horizon,
            eps,
            sup_a: dv.sup_a,
            sup_v: dv.sup_v,
            c_a: dv.sup_a / (h.powf(2.0 - 2.0 * delta) * log),
            c_v: dv.sup_v / (h.powf(3.0 - 2.0 * delta) * log),
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slope_a = loglog_slope(&hs, &rows.iter().map(|r| r.sup_a).collect::<Vec<_>>());
    let slope_v = loglog_slope(&hs, &rows.iter().map(|r| r.sup_v).collect::<Vec<_>>());
    let c_a = rows.iter().map(|r| r.c_a).fold(0.0, f64::max);
    let c_v = rows.iter().map(|r| r.c_v).fold(0.0, f64::max);
    Ok(DivergenceScan { delta, rows, slope_a, slope_v, c_a, c_v })
}
