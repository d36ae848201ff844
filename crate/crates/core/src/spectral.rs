//! Linearization of the energy about the ground state:
//! `L(p + iq) = L₊p + i L₋q` with
//! `L₋ = -½Δ + λ - N(η)` and `L₊ = L₋ - 2η K*(η ·)` (3D Hartree) or
//! `L₊ = L₋ - 2η²` (1D cubic).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{coordinate_field, Field, Fourier};
use crate::groundstate::{GroundState, Model};
use crate::pde::{hartree_potential, HartreeKernel};
use crate::symmetry::GroupElement;

/// `Q(x) = a0 + Σ a_jk x_j x_k` with symmetric row-major `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSource {
    pub a0: f64,
    pub a: Vec<f64>,
}

impl QuadraticSource {
    pub fn zero(dim: usize) -> Self {
        Self { a0: 0.0, a: vec![0.0; dim * dim] }
    }

    pub fn constant(dim: usize, a0: f64) -> Self {
        Self { a0, a: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        (self.a.len() as f64).sqrt().round() as usize
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut s = self.a0;
        for j in 0..d {
            for k in 0..d {
                s += self.a[j * d + k] * x[j] * x[k];
            }
        }
        s
    }

    /// `Q η` on the ground-state grid.
    pub fn times_eta(&self, gs: &GroundState) -> Result<Vec<f64>> {
        let d = gs.dim();
        if self.a.len() != d * d {
            return Err(Error::Dimension { expected: d * d, got: self.a.len() });
        }
        let eta = gs.field.real_part();
        let mut out = vec![0.0; eta.len()];
        gs.grid().for_each_point(|i, x| out[i] = self.eval(x) * eta[i]);
        Ok(out)
    }
}

/// Options for the deflated MINRES solve of `L₊ f = b`.
#[derive(Clone, Debug)]
pub struct KrylovOptions {
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { max_iterations: 400, restarts: 6 }
    }
}

/// Outcome of the constrained Galerkin eigenproblem.
#[derive(Clone, Debug)]
pub struct Coercivity {
    pub constant: f64,
    /// Minimiser of the constrained quotient, normalised in `H¹`.
    pub minimizer: Field,
    /// Smallest eigenvalue of the `L₊` block without constraints.
    pub unconstrained_lplus: f64,
    pub n_basis: usize,
    pub width: f64,
}

pub struct LinearizedOperator {
    gs: GroundState,
    fourier: Fourier,
    kernel: Option<HartreeKernel>,
    eta: Vec<f64>,
    /// `λ - N(η)`.
    local: Vec<f64>,
    /// Real parts of the analytic tangents `e_j η`.
    tangents: Vec<Vec<f64>>,
    /// Orthonormal (discrete `L²`) basis of `span{∂_j η}`.
    kernel_basis: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += c * b);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl LinearizedOperator {
    pub fn new(gs: &GroundState) -> Result<Self> {
        let fourier = Fourier::new(gs.grid());
        let eta = gs.field.real_part();
        let density: Vec<f64> = eta.iter().map(|e| e * e).collect();
        let (kernel, n_eta) = match gs.model {
            Model::Gp1d => (None, density),
            Model::Hartree3d => {
                let k = HartreeKernel::new(&fourier)?;
                let phi = hartree_potential(&density, &k, &fourier);
                (Some(k), phi)
            }
        };
        let local = n_eta.iter().map(|n| gs.lambda - n).collect();
        let d = gs.dim();
        let tangents = gs
            .orbit_tangents(gs.grid(), &GroupElement::identity(d))
            .iter()
            .map(|t| t.real_part())
            .collect();
        let mut op = Self { gs: gs.clone(), fourier, kernel, eta, local, tangents, kernel_basis: Vec::new() };
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for j in 0..gs.dim() {
            let mut v = op.derivative_eta(j);
            for b in &basis {
                let c = dot(&v, b);
                axpy(&mut v, -c, b);
            }
            let n = norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        op.kernel_basis = basis;
        Ok(op)
    }

    pub fn ground_state(&self) -> &GroundState {
        &self.gs
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn lambda(&self) -> f64 {
        self.gs.lambda
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `∂_j η` from the analytic profile.
    pub fn derivative_eta(&self, axis: usize) -> Vec<f64> {
        self.tangents[axis].iter().map(|t| -t).collect()
    }

    /// `(w + x·∇)η` with `w = (d+1)/2`, the generator of scalings applied to `η`.
    pub fn scaling_eta(&self) -> Vec<f64> {
        self.tangents[2 * self.gs.dim() + 1].clone()
    }

    fn laplacian_real(&self, p: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = p.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.fourier.forward(&mut buf);
        buf.iter_mut().zip(self.fourier.k_squared()).for_each(|(z, k2)| *z *= -k2);
        self.fourier.inverse(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    /// `2η K*(η p)` (3D) or `2η² p` (1D).
    fn exchange(&self, p: &[f64]) -> Vec<f64> {
        match &self.kernel {
            None => p.iter().zip(&self.eta).map(|(p, e)| 2.0 * e * e * p).collect(),
            Some(k) => {
                let rho: Vec<f64> = p.iter().zip(&self.eta).map(|(p, e)| p * e).collect();
                let conv = hartree_potential(&rho, k, &self.fourier);
                conv.iter().zip(&self.eta).map(|(c, e)| 2.0 * c * e).collect()
            }
        }
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.eta.len() {
            return Err(Error::Dimension { expected: self.eta.len(), got: p.len() });
        }
        Ok(())
    }

    pub fn apply_lminus(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_len(q)?;
        let lap = self.laplacian_real(q);
        Ok(lap.iter().zip(q).zip(&self.local).map(|((l, q), c)| -0.5 * l + c * q).collect())
    }

    pub fn apply_lplus(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply_lminus(p)?;
        axpy(&mut out, -1.0, &self.exchange(p));
        Ok(out)
    }

    fn real_input(&self, w: &Field) -> Result<Vec<f64>> {
        if w.grid() != self.gs.grid() {
            return Err(Error::GridMismatch);
        }
        let scale = w.max_abs().max(f64::MIN_POSITIVE);
        if w.data().iter().any(|z| z.im.abs() > 1e-14 * scale) {
            return Err(Error::Domain("L₊ and L₋ act on real fields".into()));
        }
        Ok(w.real_part())
    }

    /// `L₊` on a real field; complex input is rejected.
    pub fn apply_lplus_field(&self, w: &Field) -> Result<Field> {
        let p = self.real_input(w)?;
        self.to_field(&self.apply_lplus(&p)?)
    }

    /// `L₋` on a real field; complex input is rejected.
    pub fn apply_lminus_field(&self, w: &Field) -> Result<Field> {
        let q = self.real_input(w)?;
        self.to_field(&self.apply_lminus(&q)?)
    }

    pub fn to_field(&self, p: &[f64]) -> Result<Field> {
        Field::from_vec(self.gs.grid(), p.iter().map(|x| Complex64::new(*x, 0.0)).collect())
    }

    /// `L(p + iq) = L₊p + i L₋q`.
    pub fn apply(&self, w: &Field) -> Result<Field> {
        if w.grid() != self.gs.grid() {
            return Err(Error::GridMismatch);
        }
        let mut out = self.fourier.laplacian(w).scaled(Complex64::new(-0.5, 0.0));
        let exch = self.exchange(&w.real_part());
        for (i, z) in out.data_mut().iter_mut().enumerate() {
            *z += self.local[i] * w.data()[i] - exch[i];
        }
        Ok(out)
    }

    /// `⟨Lw, w⟩`.
    pub fn quadratic_form(&self, w: &Field) -> Result<f64> {
        self.apply(w)?.inner(w)
    }

    /// `⟨Lw, w⟩ / ‖w‖²_{H¹}`.
    pub fn rayleigh_quotient(&self, w: &Field) -> Result<f64> {
        let h1 = self.fourier.h1_norm(w);
        Ok(self.quadratic_form(w)? / (h1 * h1))
    }

    /// `‖L₋η‖ / ‖η‖`.
    pub fn lminus_kernel_residual(&self) -> Result<f64> {
        Ok(norm(&self.apply_lminus(&self.eta)?) / norm(&self.eta))
    }

    /// `‖L₊∂_jη‖ / ‖∂_jη‖` for every axis.
    pub fn lplus_kernel_residuals(&self) -> Result<Vec<f64>> {
        (0..self.gs.dim())
            .map(|j| {
                let d = self.derivative_eta(j);
                Ok(norm(&self.apply_lplus(&d)?) / norm(&d))
            })
            .collect()
    }

    /// `‖L₊((w + x·∇)η) - c η‖ / ‖η‖`.
    pub fn scaling_residual(&self, c: f64) -> Result<f64> {
        let mut r = self.apply_lplus(&self.scaling_eta())?;
        axpy(&mut r, -c, &self.eta);
        Ok(norm(&r) / norm(&self.eta))
    }

    /// `max_j |⟨b, ∂_jη⟩| / (‖b‖ ‖∂_jη‖)`.
    pub fn kernel_projection(&self, b: &[f64]) -> f64 {
        let nb = norm(b);
        if nb == 0.0 {
            return 0.0;
        }
        self.kernel_basis.iter().map(|k| dot(b, k).abs() / nb).fold(0.0, f64::max)
    }

    fn deflate(&self, v: &mut [f64]) {
        for k in &self.kernel_basis {
            let c = dot(v, k);
            axpy(v, -c, k);
        }
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let lambda = self.gs.lambda;
        let mut buf: Vec<Complex64> = r.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.fourier.forward(&mut buf);
        buf.iter_mut().zip(self.fourier.k_squared()).for_each(|(z, k2)| *z /= 0.5 * k2 + lambda);
        self.fourier.inverse(&mut buf);
        let mut out: Vec<f64> = buf.iter().map(|z| z.re).collect();
        self.deflate(&mut out);
        out
    }

    fn deflated_lplus(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.apply_lplus(v).expect("length checked");
        self.deflate(&mut out);
        out
    }

    /// Solves `L₊ f = b` in `(ker L₊)^⊥` starting from zero.
    pub fn solve_lplus(&self, b: &[f64], tol: f64, opts: &KrylovOptions) -> Result<Vec<f64>> {
        self.solve_lplus_from(b, &vec![0.0; b.len()], tol, opts)
    }

    /// Solves `L₊ f = b` in `(ker L₊)^⊥` by preconditioned MINRES with the
    /// translation modes deflated, restarting from the current iterate until
    /// `‖L₊f - b‖ ≤ tol ‖b‖`.
    pub fn solve_lplus_from(&self, b: &[f64], x0: &[f64], tol: f64, opts: &KrylovOptions) -> Result<Vec<f64>> {
        self.check_len(b)?;
        self.check_len(x0)?;
        let projection = self.kernel_projection(b);
        if projection > 10.0 * tol {
            return Err(Error::IncompatibleSource { projection });
        }
        let nb = norm(b);
        let mut x = x0.to_vec();
        self.deflate(&mut x);
        if nb == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut rhs = b.to_vec();
        self.deflate(&mut rhs);
        let mut total = 0;
        let mut best = f64::INFINITY;
        for _ in 0..=opts.restarts {
            let mut r = rhs.clone();
            axpy(&mut r, -1.0, &self.deflated_lplus(&x));
            let rel = norm(&r) / nb;
            if rel <= tol {
                return Ok(x);
            }
            if rel > 0.5 * best {
                return Err(Error::NonConvergence { iterations: total, residual: rel });
            }
            best = rel;
            let (dx, its) = self.minres(&r, 0.1 * tol * nb / norm(&r), opts.max_iterations);
            total += its;
            axpy(&mut x, 1.0, &dx);
            self.deflate(&mut x);
        }
        let mut r = rhs;
        axpy(&mut r, -1.0, &self.deflated_lplus(&x));
        let rel = norm(&r) / nb;
        if rel <= tol {
            Ok(x)
        } else {
            Err(Error::NonConvergence { iterations: total, residual: rel })
        }
    }

    /// Preconditioned MINRES (Paige–Saunders) for the deflated operator,
    /// zero initial guess. Returns the iterate and the iteration count.
    fn minres(&self, b: &[f64], rtol: f64, max_it: usize) -> (Vec<f64>, usize) {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r1 = b.to_vec();
        let mut y = self.precondition(&r1);
        let beta1 = dot(&r1, &y).sqrt();
        if beta1 == 0.0 {
            return (x, 0);
        }
        let mut r2 = r1.clone();
        let (mut oldb, mut beta) = (0.0, beta1);
        let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
        let (mut cs, mut sn) = (-1.0f64, 0.0f64);
        let mut w = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for itn in 1..=max_it {
            let s = 1.0 / beta;
            let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
            y = self.deflated_lplus(&v);
            if itn >= 2 {
                axpy(&mut y, -beta / oldb, &r1);
            }
            let alfa = dot(&v, &y);
            axpy(&mut y, -alfa / beta, &r2);
            r1 = std::mem::replace(&mut r2, y.clone());
            y = self.precondition(&r2);
            oldb = beta;
            beta = dot(&r2, &y).max(0.0).sqrt();
            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(f64::EPSILON);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;
            let w1 = std::mem::replace(&mut w2, w.clone());
            for i in 0..n {
                w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
                x[i] += phi * w[i];
            }
            if phibar <= rtol * beta1 || beta == 0.0 {
                return (x, itn);
            }
        }
        (x, max_it)
    }

    /// Solves `L₊ f = Q η`.
    pub fn solve_quadratic(&self, src: &QuadraticSource, tol: f64) -> Result<Field> {
        let b = src.times_eta(&self.gs)?;
        let f = self.solve_lplus(&b, tol, &KrylovOptions::default())?;
        self.to_field(&f)
    }

    /// `e_j η` for the generators `1..=2d+2`.
    pub fn tangent_vectors(&self) -> Vec<Field> {
        self.gs.orbit_tangents(self.gs.grid(), &GroupElement::identity(self.gs.dim()))
    }

    /// `ω(f, e_j η)` for every generator.
    pub fn symplectic_residuals(&self, f: &Field) -> Result<Vec<f64>> {
        self.tangent_vectors().iter().map(|t| f.omega(t)).collect()
    }

    /// For each generator, the part of `iL(e_j η)` outside `span{e_k η}`
    /// (least squares in `⟨·,·⟩`), relative to `max(‖iL(e_jη)‖, ‖e_jη‖)`.
    pub fn manifold_invariance(&self) -> Result<Vec<f64>> {
        let tangents = self.tangent_vectors();
        let m = tangents.len();
        let mut gram = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                gram[(a, b)] = tangents[a].inner(&tangents[b])?;
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Instability("tangent vectors are linearly dependent".into()))?;
        let mut out = Vec::with_capacity(m);
        for t in &tangents {
            let y = self.apply(t)?.scaled(Complex64::new(0.0, 1.0));
            let rhs = DVector::from_iterator(m, tangents.iter().map(|s| s.inner(&y).expect("grid")));
            let c = chol.solve(&rhs);
            let mut r = y.clone();
            for (k, s) in tangents.iter().enumerate() {
                r.axpy(Complex64::new(-c[k], 0.0), s)?;
            }
            out.push(r.norm() / y.norm().max(t.norm()));
        }
        Ok(out)
    }

    pub fn manifold_invariance_check(&self) -> Result<f64> {
        Ok(self.manifold_invariance()?.into_iter().fold(0.0, f64::max))
    }

    /// Minimal `⟨Lw,w⟩/‖w‖²_{H¹}` over the span of the first `n_basis`
    /// Hermite functions of width `1/κ` (graded by total degree), restricted
    /// to `ω(w, e_j η) = 0` for all generators.
    pub fn coercivity_constant(&self, n_basis: usize) -> Result<Coercivity> {
        self.coercivity_with_width(n_basis, 1.0 / self.gs.kappa())
    }

    pub fn coercivity_with_width(&self, n_basis: usize, width: f64) -> Result<Coercivity> {
        if n_basis < 50 {
            return Err(Error::Domain(format!("Galerkin basis needs at least 50 functions, got {n_basis}")));
        }
        let grid = self.gs.grid();
        let d = grid.dim();
        let dv = grid.cell_volume();
        let indices = graded_indices(d, n_basis);
        let max_deg = indices.iter().flatten().cloned().max().unwrap_or(0);
        let tables: Vec<Vec<Vec<f64>>> =
            (0..d).map(|j| hermite_table(&grid.coords(j), max_deg, width)).collect();

        let w_eta = self.scaling_eta();
        let p_constraints: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let x = coordinate_field(grid, j);
                x.iter().zip(&self.eta).map(|(x, e)| x * e).collect()
            })
            .chain(std::iter::once(self.eta.clone()))
            .collect();
        let q_constraints: Vec<Vec<f64>> =
            (0..d).map(|j| self.derivative_eta(j)).chain(std::iter::once(w_eta)).collect();

        let mut best = (f64::INFINITY, Vec::new(), false);
        let mut unconstrained = f64::INFINITY;
        let n_classes = 1usize << d;
        for class in 0..n_classes {
            let members: Vec<&Vec<usize>> = indices
                .iter()
                .filter(|idx| (0..d).all(|j| (idx[j] % 2) == ((class >> j) & 1)))
                .collect();
            if members.is_empty() {
                continue;
            }
            let m = members.len();
            let basis: Vec<Vec<f64>> = members
                .iter()
                .map(|idx| {
                    let mut f = vec![0.0; grid.len()];
                    let strides = grid.strides();
                    for (flat, v) in f.iter_mut().enumerate() {
                        let mut prod = 1.0;
                        for j in 0..d {
                            let i = (flat / strides[j]) % grid.shape()[j];
                            prod *= tables[j][idx[j]][i];
                        }
                        *v = prod;
                    }
                    f
                })
                .collect();
            let mut lap = Vec::with_capacity(m);
            let mut exch = Vec::with_capacity(m);
            for f in &basis {
                lap.push(self.laplacian_real(f));
                exch.push(self.exchange(f));
            }
            let mut a_minus = DMatrix::zeros(m, m);
            let mut a_plus = DMatrix::zeros(m, m);
            let mut gram = DMatrix::zeros(m, m);
            for a in 0..m {
                for b in a..m {
                    let (mut km, mut ex, mut h1) = (0.0, 0.0, 0.0);
                    for i in 0..grid.len() {
                        let fa = basis[a][i];
                        km += fa * (-0.5 * lap[b][i] + self.local[i] * basis[b][i]);
                        ex += fa * exch[b][i];
                        h1 += fa * (basis[b][i] - lap[b][i]);
                    }
                    for (mat, val) in [(&mut a_minus, km), (&mut a_plus, km - ex), (&mut gram, h1)] {
                        mat[(a, b)] = val * dv;
                        mat[(b, a)] = val * dv;
                    }
                }
            }
            let (u, _) = min_generalized(&a_plus, &gram, None)?;
            unconstrained = unconstrained.min(u);
            for (mat, cons, imaginary) in [(&a_plus, &p_constraints, false), (&a_minus, &q_constraints, true)] {
                let c = DMatrix::from_fn(cons.len(), m, |r, a| {
                    dot(&cons[r], &basis[a]) / norm(&cons[r])
                });
                let z = null_space(&c);
                if z.ncols() == 0 {
                    continue;
                }
                let (val, coeff) = min_generalized(mat, &gram, Some(&z))?;
                if val < best.0 {
                    let mut w = vec![0.0; grid.len()];
                    for (k, f) in basis.iter().enumerate() {
                        axpy(&mut w, coeff[k], f);
                    }
                    best = (val, w, imaginary);
                }
            }
        }
        let (constant, w, imaginary) = best;
        if constant < -1e-6 {
            return Err(Error::Indefinite { value: constant });
        }
        let unit = if imaginary { Complex64::new(0.0, 1.0) } else { Complex64::new(1.0, 0.0) };
        let mut minimizer = Field::from_vec(grid, w.iter().map(|x| unit * x).collect())?;
        let h1 = self.fourier.h1_norm(&minimizer);
        minimizer.scale(Complex64::new(1.0 / h1, 0.0));
        Ok(Coercivity { constant, minimizer, unconstrained_lplus: unconstrained, n_basis, width })
    }
}

/// Multi-indices of the first `n` tensor Hermite functions ordered by total degree.
fn graded_indices(d: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(n);
    let mut total = 0;
    while out.len() < n {
        match d {
            1 => out.push(vec![total]),
            2 => (0..=total).for_each(|a| out.push(vec![a, total - a])),
            _ => {
                for a in 0..=total {
                    for b in 0..=total - a {
                        out.push(vec![a, b, total - a - b]);
                    }
                }
            }
        }
        total += 1;
    }
    out.truncate(n);
    out
}

/// `σ^{-1/2} ψ_n(x/σ)` for `n = 0..=max_deg`, with `ψ_n` the
/// L²-normalised Hermite functions.
fn hermite_table(x: &[f64], max_deg: usize, sigma: f64) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; x.len()]; max_deg + 1];
    let c0 = std::f64::consts::PI.powf(-0.25) / sigma.sqrt();
    for (i, xi) in x.iter().enumerate() {
        let s = xi / sigma;
        let mut prev = 0.0;
        let mut cur = c0 * (-0.5 * s * s).exp();
        t[0][i] = cur;
        for n in 0..max_deg {
            let next = (2.0 / (n as f64 + 1.0)).sqrt() * s * cur - (n as f64 / (n as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            t[n + 1][i] = cur;
        }
    }
    t
}

/// Orthonormal basis (columns) of `{c : C c = 0}`.
fn null_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let m = c.ncols();
    let ctc = c.transpose() * c;
    let eig = SymmetricEigen::new(ctc);
    let cols: Vec<DVector<f64>> = (0..m)
        .filter(|&k| eig.eigenvalues[k] < 1e-12)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Smallest `σ` with `A c = σ B c` on the column space of `z` (all of
/// coefficient space when `z` is `None`), and its coefficient vector.
fn min_generalized(a: &DMatrix<f64>, b: &DMatrix<f64>, z: Option<&DMatrix<f64>>) -> Result<(f64, DVector<f64>)> {
    let (ar, br) = match z {
        Some(z) => (z.transpose() * a * z, z.transpose() * b * z),
        None => (a.clone(), b.clone()),
    };
    let chol = br.cholesky().ok_or_else(|| Error::Instability("H¹ Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Instability("singular Cholesky factor".into()))?;
    let mut m = &linv * ar * linv.transpose();
    m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let (k, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if *v < acc.1 { (k, *v) } else { acc });
    let y = eig.eigenvectors.column(k).into_owned();
    let c = linv.transpose() * y;
    let coeff = match z {
        Some(z) => z * c,
        None => c,
    };
    Ok((val, coeff))
}

/// Diagnostics of the linearized operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub model: Model,
    pub lambda: f64,
    pub lminus_eta_residual: f64,
    pub lplus_translation_residuals: Vec<f64>,
    /// `‖L₊((w+x·∇)η) + 2λη‖/‖η‖`.
    pub lplus_scaling_residual: f64,
    /// `‖L₊((w+x·∇)η) - η‖/‖η‖`.
    pub lplus_scaling_vs_eta: f64,
    pub coercivity_constant: f64,
    pub unconstrained_lplus_minimum: f64,
    pub n_basis: usize,
    pub invariance_residuals: Vec<f64>,
    pub corrector_residual: f64,
    pub corrector_symplectic_residuals: Vec<f64>,
}

/// `Q = a0 + Σ a_jk x_j x_k` with `a0 = (s/2) tr a`, `s = ∫x_1²η²`: the
/// constant for which `L₊⁻¹(Qη)` is orthogonal to `η`.
pub fn balanced_source(gs: &GroundState, a: Vec<f64>) -> QuadraticSource {
    let d = gs.dim();
    let trace: f64 = (0..d).map(|j| a[j * d + j]).sum();
    QuadraticSource { a0: 0.5 * gs.second_moment() * trace, a }
}

pub fn spectral_report(op: &LinearizedOperator, n_basis: usize, tol: f64) -> Result<SpectralReport> {
    let gs = op.ground_state();
    let d = gs.dim();
    let coercivity = op.coercivity_constant(n_basis)?;
    let mut a = vec![0.0; d * d];
    for j in 0..d {
        a[j * d + j] = -0.5 * (j + 1) as f64;
        if j + 1 < d {
            a[j * d + j + 1] = 0.2;
            a[(j + 1) * d + j] = 0.2;
        }
    }
    let src = balanced_source(gs, a);
    let f = op.solve_quadratic(&src, tol)?;
    let b = src.times_eta(gs)?;
    let mut r = op.apply_lplus(&f.real_part())?;
    axpy(&mut r, -1.0, &b);
    Ok(SpectralReport {
        model: gs.model,
        lambda: gs.lambda,
        lminus_eta_residual: op.lminus_kernel_residual()?,
        lplus_translation_residuals: op.lplus_kernel_residuals()?,
        lplus_scaling_residual: op.scaling_residual(-2.0 * gs.lambda)?,
        lplus_scaling_vs_eta: op.scaling_residual(1.0)?,
        coercivity_constant: coercivity.constant,
        unconstrained_lplus_minimum: coercivity.unconstrained_lplus,
        n_basis,
        invariance_residuals: op.manifold_invariance()?,
        corrector_residual: norm(&r) / norm(&b),
        corrector_symplectic_residuals: op.symplectic_residuals(&f)?,
    })
}
