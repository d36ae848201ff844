use std::f64::consts::PI;

use num_complex::Complex64;
use soliton_core::groundstate::{gp_ground_state, solve_hartree_ground_state, GroundState, RadialSolverOptions};
use soliton_core::pde::{hartree_potential, read_checkpoint, write_checkpoint, Equation, HartreeKernel, Observer, RunOptions};
use soliton_core::{Error, ExternalPotential, Field, Fourier, Grid, Landscape, Model};

fn gp_setup(v: ExternalPotential) -> (Equation, GroundState) {
    let grid = Grid::cube(1, 1024, 60.0).unwrap();
    (Equation::new(Model::Gp1d, &grid, &v).unwrap(), gp_ground_state(&grid).unwrap())
}

fn cos_potential(h: f64) -> ExternalPotential {
    ExternalPotential::new(Landscape::Cosine { amplitude: 1.0, wave: vec![1.0], phase: 0.0 }, h, 1).unwrap()
}

fn perturbed(gs: &GroundState) -> Field {
    Field::from_fn(gs.grid(), |x| {
        let s = 1.0 / x[0].cosh();
        Complex64::from_polar(1.1 * s, 0.4 * x[0]) + 0.05 * (-(x[0] - 1.0).powi(2)).exp()
    })
}

#[test]
fn soliton_is_a_standing_wave() {
    let (eq, gs) = gp_setup(ExternalPotential::zero(1));
    let rhs = eq.rhs(&gs.field).unwrap();
    let expected = gs.field.scaled(Complex64::new(0.0, gs.lambda));
    assert!(eq.fourier.h1_distance(&rhs, &expected).unwrap() < 1e-10);
    let out = eq.run(gs.field.clone(), &RunOptions::new(2.0, 1e-3, 500), &mut []).unwrap();
    let exact = gs.field.scaled(Complex64::from_polar(1.0, gs.lambda * 2.0));
    assert!(eq.fourier.h1_distance(&out.field, &exact).unwrap() < 1e-6);
}

#[test]
fn mass_is_conserved_to_roundoff() {
    let (eq, gs) = gp_setup(cos_potential(0.1));
    let u0 = perturbed(&gs);
    let m0 = u0.mass();
    let out = eq.run(u0, &RunOptions::new(1.0, 1e-3, 100), &mut []).unwrap();
    assert_eq!(out.steps, 1000);
    let drift = out.conservation.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-12 * m0, "{drift}");
}

#[test]
fn energy_error_is_second_order() {
    let (eq, gs) = gp_setup(cos_potential(0.5));
    let drift = |dt: f64| {
        let out = eq.run(perturbed(&gs), &RunOptions::new(2.0, dt, 1), &mut []).unwrap();
        let e0 = out.conservation[0].energy;
        out.conservation.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max)
    };
    let ratio = drift(0.02) / drift(0.01);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn energy_gradient_matches_gateaux_derivative() {
    let (eq, gs) = gp_setup(cos_potential(0.3));
    let u = perturbed(&gs);
    let w = Field::from_fn(gs.grid(), |x| Complex64::new((-x[0] * x[0]).exp(), 0.3 * x[0] * (-x[0] * x[0] / 2.0).exp()));
    let dh = eq.energy_gradient(&u).unwrap();
    let s = 1e-5;
    let mut up = u.clone();
    up.axpy(Complex64::new(s, 0.0), &w).unwrap();
    let mut um = u.clone();
    um.axpy(Complex64::new(-s, 0.0), &w).unwrap();
    let fd = (eq.energy(&up).unwrap() - eq.energy(&um).unwrap()) / (2.0 * s);
    let an = dh.inner(&w).unwrap();
    assert!((fd - an).abs() < 1e-8 * an.abs().max(1.0), "{fd} {an}");
}

#[test]
fn truncated_kernel_reproduces_coulomb_potential() {
    let grid = Grid::cube(3, 64, 20.0).unwrap();
    let f = Fourier::new(&grid);
    let k = HartreeKernel::new(&f).unwrap();
    assert_eq!(k.radius, 10.0);
    assert!((k.multiplier()[0] - 2.0 * PI * 100.0).abs() < 1e-12);
    let rho = soliton_core::grid::sample_real(&grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
    let phi = hartree_potential(&rho, &k, &f);
    let mut worst: f64 = 0.0;
    grid.for_each_point(|i, x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r < 3.0 {
            let exact = if r == 0.0 { 2.0 * PI } else { PI.powf(1.5) * erf(r) / r };
            worst = worst.max((phi[i] - exact).abs());
        }
    });
    assert!(worst < 1e-9, "{worst}");
    assert!(HartreeKernel::new(&Fourier::new(&Grid::cube(1, 128, 10.0).unwrap())).is_err());
}

fn erf(x: f64) -> f64 {
    if x > 5.0 {
        return 1.0;
    }
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term.abs() > 1e-18 * sum.abs() {
        k += 1.0;
        term *= -x * x / k;
        sum += term / (2.0 * k + 1.0);
    }
    2.0 / PI.sqrt() * sum
}

#[test]
fn hartree_ground_state_is_stationary_on_grid() {
    let grid = Grid::cube(3, 64, 40.0).unwrap();
    let p = solve_hartree_ground_state(&RadialSolverOptions { n: 4095, ..Default::default() }).unwrap();
    let gs = GroundState::hartree(&grid, p).unwrap();
    let eq = Equation::new(Model::Hartree3d, &grid, &ExternalPotential::zero(3)).unwrap();
    let e = eq.energy(&gs.field).unwrap();
    assert!(((e + gs.lambda / 3.0) / (gs.lambda / 3.0)).abs() < 1e-3, "{e}");
    let rhs = eq.rhs(&gs.field).unwrap();
    let mut res = rhs.clone();
    res.axpy(Complex64::new(0.0, -gs.lambda), &gs.field).unwrap();
    assert!(res.norm() / gs.field.norm() < 1e-3, "{}", res.norm());
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let dir = std::env::temp_dir().join(format!("ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let grid = Grid::new(vec![4, 6, 8], vec![1.0, 2.0, 3.5]).unwrap();
    let u = Field::from_fn(&grid, |x| Complex64::new(x[0].sin() + x[1], x[2].exp()));
    let path = dir.join("u.bin");
    write_checkpoint(&path, &u, 12.5).unwrap();
    let (v, t) = read_checkpoint(&path).unwrap();
    assert_eq!(t, 12.5);
    assert_eq!(v.grid(), u.grid());
    assert_eq!(v.data(), u.data());
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(read_checkpoint(&path).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn growth_beyond_threshold_is_reported() {
    let (eq, gs) = gp_setup(ExternalPotential::zero(1));
    let u0 = gs.field.scaled(Complex64::new(1.5, 0.0));
    let mut opts = RunOptions::new(3.0, 1e-3, 10);
    opts.blowup_factor = 1.05;
    match eq.run(u0, &opts, &mut []) {
        Err(Error::Blowup { t_last_stable }) => assert!(t_last_stable > 0.0 && t_last_stable < 3.0),
        other => panic!("expected blowup, got {other:?}"),
    }
}

struct Count(usize);
impl Observer for Count {
    fn observe(&mut self, _t: f64, _u: &Field) -> soliton_core::Result<()> {
        self.0 += 1;
        Ok(())
    }
}

struct Failing;
impl Observer for Failing {
    fn observe(&mut self, t: f64, _u: &Field) -> soliton_core::Result<()> {
        if t > 0.5 {
            return Err(Error::Domain("stop".into()));
        }
        Ok(())
    }
}

#[test]
fn observers_run_on_schedule_and_errors_carry_time() {
    let (eq, gs) = gp_setup(ExternalPotential::zero(1));
    let mut c = Count(0);
    eq.run(gs.field.clone(), &RunOptions::new(1.0, 0.01, 10), &mut [&mut c]).unwrap();
    assert_eq!(c.0, 11);
    let mut f = Failing;
    match eq.run(gs.field.clone(), &RunOptions::new(1.0, 0.01, 10), &mut [&mut f]) {
        Err(Error::Observer { t, .. }) => assert!((t - 0.6).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fused_run_matches_single_steps() {
    let (eq, gs) = gp_setup(cos_potential(0.2));
    let u0 = perturbed(&gs);
    let out = eq.run(u0.clone(), &RunOptions::new(0.5, 0.01, 7), &mut []).unwrap();
    let mut u = u0;
    for _ in 0..50 {
        eq.step_strang(&mut u, 0.01).unwrap();
    }
    assert!(u.sub(&out.field).unwrap().norm() < 1e-12);
}
