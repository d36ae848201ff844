use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soliton_core::groundstate::{gp_ground_state, solve_hartree_ground_state, GroundState, RadialSolverOptions};
use soliton_core::spectral::{balanced_source, KrylovOptions, LinearizedOperator, QuadraticSource};
use soliton_core::{Error, Field, Grid};

fn gp() -> &'static LinearizedOperator {
    static OP: OnceLock<LinearizedOperator> = OnceLock::new();
    OP.get_or_init(|| {
        let gs = gp_ground_state(&Grid::cube(1, 2048, 100.0).unwrap()).unwrap();
        LinearizedOperator::new(&gs).unwrap()
    })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|&(c, w, re, k)| Complex64::from_polar(re, k * x[0]) * (-(x[0] - c).powi(2) / (w * w)).exp())
            .sum()
    })
}

#[test]
fn kernel_directions_and_scaling_identity() {
    let op = gp();
    assert!(op.lminus_kernel_residual().unwrap() < 1e-10);
    assert!(op.lplus_kernel_residuals().unwrap()[0] < 1e-8);
    // L₊((1 + x∂)η) = -2λη; the image is not +η
    assert!(op.scaling_residual(-2.0 * op.lambda()).unwrap() < 1e-8);
    assert!(op.scaling_residual(1.0).unwrap() > 1.0);
}

#[test]
fn operator_is_self_adjoint() {
    let op = gp();
    let grid = op.ground_state().grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let u = random_field(&grid, &mut rng);
        let w = random_field(&grid, &mut rng);
        let lhs = op.apply(&u).unwrap().inner(&w).unwrap();
        let rhs = u.inner(&op.apply(&w).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-9 * u.norm() * w.norm(), "{lhs} {rhs}");
    }
}

#[test]
fn block_structure_and_real_inputs() {
    let op = gp();
    let grid = op.ground_state().grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_field(&grid, &mut rng);
    let lu = op.apply(&u).unwrap();
    let lp = op.apply_lplus(&u.real_part()).unwrap();
    let lq = op.apply_lminus(&u.imag_part()).unwrap();
    for i in 0..grid.len() {
        assert!((lu.data()[i].re - lp[i]).abs() < 1e-12);
        assert!((lu.data()[i].im - lq[i]).abs() < 1e-12);
    }
    assert!(matches!(op.apply_lplus_field(&u), Err(Error::Domain(_))));
    assert!(matches!(op.apply_lminus_field(&u), Err(Error::Domain(_))));
    let re = op.to_field(&u.real_part()).unwrap();
    assert!(op.apply_lplus_field(&re).is_ok());
}

#[test]
fn zero_source_gives_zero() {
    let op = gp();
    let f = op.solve_quadratic(&QuadraticSource::zero(1), 1e-10).unwrap();
    assert_eq!(f.max_abs(), 0.0);
}

#[test]
fn constant_source_inverts_the_scaling_generator() {
    let op = gp();
    let f = op.solve_quadratic(&QuadraticSource::constant(1, 1.0), 1e-11).unwrap().real_part();
    let lambda = op.lambda();
    let expected: Vec<f64> = op.scaling_eta().iter().map(|s| -s / (2.0 * lambda)).collect();
    let diff: Vec<f64> = f.iter().zip(&expected).map(|(a, b)| a - b).collect();
    assert!(l2(&diff) < 1e-8 * l2(&expected), "{}", l2(&diff) / l2(&expected));
}

#[test]
fn balanced_corrector_is_symplectically_orthogonal() {
    let op = gp();
    let tol = 1e-10;
    let src = balanced_source(op.ground_state(), vec![-0.5]);
    let f = op.solve_quadratic(&src, tol).unwrap();
    for r in op.symplectic_residuals(&f).unwrap() {
        assert!(r.abs() < 1e-8, "{r}");
    }
    let b = src.times_eta(op.ground_state()).unwrap();
    let mut res = op.apply_lplus(&f.real_part()).unwrap();
    res.iter_mut().zip(&b).for_each(|(r, b)| *r -= b);
    assert!(l2(&res) <= tol * l2(&b));
    // a different starting point, including kernel content, reaches the same solution
    let x0: Vec<f64> = op.derivative_eta(0).iter().zip(op.eta()).map(|(d, e)| 3.0 * d - 0.7 * e).collect();
    let g = op.solve_lplus_from(&b, &x0, tol, &KrylovOptions::default()).unwrap();
    let diff: Vec<f64> = g.iter().zip(f.real_part()).map(|(a, b)| a - b).collect();
    assert!(l2(&diff) < 10.0 * tol * l2(&g), "{}", l2(&diff) / l2(&g));
}

#[test]
fn source_with_kernel_component_is_rejected() {
    let op = gp();
    let grid = op.ground_state().grid();
    let x = soliton_core::grid::coordinate_field(grid, 0);
    let b: Vec<f64> = x.iter().zip(op.eta()).map(|(x, e)| x * e).collect();
    match op.solve_lplus(&b, 1e-10, &KrylovOptions::default()) {
        Err(Error::IncompatibleSource { projection }) => assert!(projection > 0.1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn corrector_decays_exponentially() {
    let op = gp();
    let src = balanced_source(op.ground_state(), vec![-0.5]);
    let f = op.solve_quadratic(&src, 1e-11).unwrap().real_part();
    let grid = op.ground_state().grid();
    let x = soliton_core::grid::coordinate_field(grid, 0);
    let pts: Vec<(f64, f64)> =
        x.iter().zip(&f).filter(|(x, _)| **x >= 12.0 && **x <= 24.0).map(|(x, f)| (*x, f.abs().ln())).collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let kappa = op.ground_state().kappa();
    assert!(slope <= -(kappa - 0.1) / 2.0, "slope {slope}");
}

#[test]
fn constrained_quotient_is_positive() {
    let op = gp();
    let c = op.coercivity_constant(60).unwrap();
    assert!(c.constant > 0.1, "{}", c.constant);
    assert!(c.unconstrained_lplus < 0.0);
    let q = op.rayleigh_quotient(&c.minimizer).unwrap();
    assert!((q - c.constant).abs() < 1e-8 * c.constant.abs().max(1.0), "{q}");
    for r in op.symplectic_residuals(&c.minimizer).unwrap() {
        assert!(r.abs() < 1e-8, "{r}");
    }
    let translation = op.to_field(&op.derivative_eta(0)).unwrap();
    assert!(op.rayleigh_quotient(&translation).unwrap().abs() < 1e-8);
    assert!(op.coercivity_constant(49).is_err());
}

#[test]
fn linearized_flow_preserves_tangent_space() {
    for r in gp().manifold_invariance().unwrap() {
        assert!(r < 1e-8, "{r}");
    }
}

#[test]
fn hartree_operator() {
    let p = solve_hartree_ground_state(&RadialSolverOptions::default()).unwrap();
    let gs = GroundState::hartree(&Grid::cube(3, 96, 40.0).unwrap(), p.clone()).unwrap();
    let op = LinearizedOperator::new(&gs).unwrap();
    assert!(op.lminus_kernel_residual().unwrap() < 1e-6);
    for r in op.lplus_kernel_residuals().unwrap() {
        assert!(r < 1e-5, "{r}");
    }
    let c = op.coercivity_constant(56).unwrap();
    assert!(c.constant > 0.0 && c.unconstrained_lplus < 0.0, "{c:?}");
    let src = balanced_source(&gs, vec![-0.5, 0.1, 0.0, 0.1, -0.3, 0.0, 0.0, 0.0, 0.2]);
    let f = op.solve_quadratic(&src, 1e-9).unwrap();
    for r in op.symplectic_residuals(&f).unwrap() {
        assert!(r.abs() < 1e-8, "{r}");
    }
    let fine = LinearizedOperator::new(&gs.on_grid(&Grid::cube(3, 160, 48.0).unwrap()).unwrap()).unwrap();
    assert!(fine.manifold_invariance_check().unwrap() < 1e-6);
}
