use std::f64::consts::PI;
use std::sync::OnceLock;

use soliton_core::groundstate::{
    gp_ground_state, solve_hartree_ground_state, solve_radial, GroundState, RadialProfile,
    RadialSolverOptions,
};
use soliton_core::{Error, Grid};

fn opts(n: usize) -> RadialSolverOptions {
    RadialSolverOptions { n, r_max: 30.0, tol: 1e-10, max_iterations: 3000 }
}

fn profile_2047() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| solve_hartree_ground_state(&opts(2047)).unwrap())
}

/// Nonlinear shooting on the coupled radial system
/// `Δη = 2Uη`, `ΔU = 4πη²` with `η(0) = 1`, bisecting on `U(0)`.
/// Returns `(lambda, mass)` of the unnormalised solution.
fn shoot() -> (f64, f64) {
    let dr = 1e-3;
    let rhs = |r: f64, s: [f64; 5]| -> [f64; 5] {
        let [e, de, u, du, _m] = s;
        [de, 2.0 * u * e - 2.0 * de / r, du, 4.0 * PI * e * e - 2.0 * du / r, 4.0 * PI * r * r * e * e]
    };
    // returns (+1 if eta turns up, -1 if it crosses zero, state at eta=1e-4)
    let run = |u0: f64| -> (f64, Option<(f64, [f64; 5])>) {
        let r0 = 1e-3;
        let mut s = [
            1.0 + u0 * r0 * r0 / 3.0,
            2.0 * u0 * r0 / 3.0,
            u0 + 2.0 * PI * r0 * r0 / 3.0,
            4.0 * PI * r0 / 3.0,
            4.0 * PI * r0.powi(3) / 3.0,
        ];
        let mut r = r0;
        let mut mark = None;
        for _ in 0..40_000 {
            let k1 = rhs(r, s);
            let add = |a: [f64; 5], b: [f64; 5], c: f64| -> [f64; 5] {
                let mut o = a;
                for i in 0..5 {
                    o[i] += c * b[i];
                }
                o
            };
            let k2 = rhs(r + dr / 2.0, add(s, k1, dr / 2.0));
            let k3 = rhs(r + dr / 2.0, add(s, k2, dr / 2.0));
            let k4 = rhs(r + dr, add(s, k3, dr));
            for i in 0..5 {
                s[i] += dr / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            r += dr;
            if mark.is_none() && s[0] < 1e-4 {
                mark = Some((r, s));
            }
            if s[0] < 0.0 {
                return (-1.0, mark);
            }
            if s[1] > 0.0 {
                return (1.0, mark);
            }
        }
        (0.0, mark)
    };
    let (mut lo, mut hi) = (-20.0, 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if run(mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, mark) = run(lo);
    let (r, s) = mark.expect("trajectory reaches the tail");
    let mass = s[4];
    (s[2] + mass / r, mass)
}

#[test]
fn eigenvalue_matches_shooting_oracle() {
    let (lambda1, mass1) = shoot();
    let mu = 2.0 / mass1;
    let lambda_shoot = lambda1 * mu * mu;
    let p = solve_hartree_ground_state(&opts(8191)).unwrap();
    assert!(
        ((p.lambda - lambda_shoot) / lambda_shoot).abs() < 1e-6,
        "solver {} shooting {}",
        p.lambda,
        lambda_shoot
    );
    assert!((p.lambda - 0.6510768).abs() < 2e-7, "{}", p.lambda);
}

#[test]
fn normalised_profile_invariants() {
    let p = profile_2047();
    assert!(p.residual() < 1e-8, "residual {}", p.residual());
    assert!((p.mass() - 2.0).abs() < 1e-10);
    let h = p.hamiltonian();
    assert!(((h + p.lambda / 3.0) / (p.lambda / 3.0)).abs() < 1e-5, "H={h} lambda={}", p.lambda);
    assert!(p.values.iter().all(|v| *v > 0.0));
    assert!(p.values.windows(2).all(|w| w[1] <= w[0]));
    let kappa = (2.0 * p.lambda).sqrt();
    let rate = p.decay_rate(15.0, 25.0).unwrap();
    assert!((rate - kappa).abs() < 0.05 * kappa, "rate {rate} kappa {kappa}");
}

#[test]
fn rescaling_matches_direct_solve() {
    let unit = solve_radial(1.0, &opts(2047)).unwrap();
    let mu = 2.0 / unit.mass();
    let scaled = unit.rescale(mu).unwrap();
    let direct = solve_radial(
        scaled.lambda,
        &RadialSolverOptions { n: 2047, r_max: 30.0 / mu, tol: 1e-10, max_iterations: 3000 },
    )
    .unwrap();
    let max = direct.values[0];
    for (a, b) in direct.values.iter().zip(&scaled.values) {
        assert!((a - b).abs() < 1e-9 * max);
    }
    // mass scales linearly in mu
    let m2 = unit.rescale(1.7).unwrap().mass();
    assert!((m2 / unit.mass() - 1.7).abs() < 1e-12);
}

#[test]
fn text_roundtrip_is_exact() {
    let p = profile_2047();
    let back = RadialProfile::from_text(&p.to_text()).unwrap();
    assert_eq!(&back, p);
}

#[test]
fn malformed_text_is_rejected() {
    assert!(matches!(RadialProfile::from_text("lambda=1\nn=3\n0.1 1\n0.2 0.5\n"), Err(Error::Dimension { .. })));
    assert!(RadialProfile::from_text("n=2\n0.1 1\n0.2 0.5\n").is_err());
    assert!(RadialProfile::from_text("lambda=1\n0.1 1 3\n").is_err());
}

#[test]
fn invalid_solver_inputs() {
    assert!(solve_radial(-1.0, &opts(2047)).is_err());
    assert!(solve_radial(1.0, &opts(100)).is_err());
    let tight = RadialSolverOptions { n: 1023, r_max: 30.0, tol: 1e-10, max_iterations: 3 };
    assert!(matches!(solve_radial(1.0, &tight), Err(Error::IterationLimit { .. })));
    assert!(profile_2047().rescale(0.0).is_err());
}

#[test]
fn gp_soliton_sampling() {
    let grid = Grid::cube(1, 1024, 60.0).unwrap();
    let gs = gp_ground_state(&grid).unwrap();
    assert!((gs.field.mass() - 2.0).abs() < 1e-12);
    assert_eq!(gs.lambda, 0.5);
    assert!(gp_ground_state(&Grid::cube(1, 64, 60.0).unwrap()).is_err());
    assert!(gp_ground_state(&Grid::cube(3, 16, 60.0).unwrap()).is_err());
}

#[test]
fn hartree_sampling_on_cartesian_grid() {
    let grid = Grid::cube(3, 64, 40.0).unwrap();
    let gs = GroundState::hartree(&grid, profile_2047().clone()).unwrap();
    assert!((gs.field.mass() - 2.0).abs() < 1e-6, "{}", gs.field.mass());
    let centre = gs.field.data()[32 * 64 * 64 + 32 * 64 + 32].re;
    assert!((centre - profile_2047().value_at_origin()).abs() < 1e-10);
    let interp = profile_2047().interpolant();
    for (r, v) in profile_2047().r_grid.iter().zip(&profile_2047().values).step_by(97) {
        assert!((interp.eval(*r).0 - v).abs() < 1e-14);
    }
    let s = gs.second_moment();
    let x2: f64 = {
        let x = soliton_core::grid::coordinate_field(&grid, 0);
        gs.field.data().iter().zip(&x).map(|(z, x)| z.norm_sqr() * x * x).sum::<f64>() * grid.cell_volume()
    };
    assert!((s - x2).abs() < 1e-6 * s);
}
