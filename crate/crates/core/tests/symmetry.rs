use num_complex::Complex64;
use proptest::prelude::*;
use soliton_core::groundstate::{gp_ground_state, solve_hartree_ground_state, RadialSolverOptions};
use soliton_core::symmetry::{
    act, apply_generator, conformal_factor_check, curve_derivative, restricted_form_matrix, test_field,
};
use soliton_core::{Field, Fourier, GroundState, Grid, GroupElement, GroupTangent};
use std::sync::OnceLock;

fn line() -> &'static (Grid, Fourier) {
    static L: OnceLock<(Grid, Fourier)> = OnceLock::new();
    L.get_or_init(|| {
        let g = Grid::cube(1, 512, 40.0).unwrap();
        let f = Fourier::new(&g);
        (g, f)
    })
}

fn cube() -> &'static (Grid, Fourier) {
    static C: OnceLock<(Grid, Fourier)> = OnceLock::new();
    C.get_or_init(|| {
        let g = Grid::cube(3, 64, 24.0).unwrap();
        let f = Fourier::new(&g);
        (g, f)
    })
}

fn sup_diff(u: &Field, w: &Field) -> f64 {
    u.data().iter().zip(w.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

fn element(d: usize) -> impl Strategy<Value = GroupElement> {
    (
        prop::collection::vec(-2.0..2.0f64, d),
        prop::collection::vec(-1.0..1.0f64, d),
        -10.0..10.0f64,
        0.6..1.6f64,
    )
        .prop_map(|(a, v, gamma, mu)| GroupElement::new(a, v, gamma, mu).unwrap())
}

fn close(g: &GroupElement, h: &GroupElement, tol: f64) -> bool {
    let pairs = g.a.iter().zip(&h.a).chain(g.v.iter().zip(&h.v)).chain([(&g.gamma, &h.gamma), (&g.mu, &h.mu)]);
    pairs.into_iter().all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

#[test]
fn group_law_examples() {
    let g = GroupElement::new(vec![0.0], vec![0.0], 0.0, 2.0).unwrap();
    let h = GroupElement::new(vec![1.0], vec![0.0], 0.0, 1.0).unwrap();
    let gh = g.compose(&h).unwrap();
    assert_eq!((gh.a[0], gh.v[0], gh.gamma, gh.mu), (0.5, 0.0, 0.0, 2.0));
    let p = GroupElement::new(vec![1.5, -0.5, 2.0], vec![0.0; 3], 0.0, 1.25).unwrap();
    let inv = p.inverse();
    assert_eq!(inv.a, vec![-1.875, 0.625, -2.5]);
    assert_eq!(inv.mu, 0.8);
    assert_eq!(GroupElement::identity(3).inverse(), GroupElement::identity(3));
    assert_eq!(p.compose(&GroupElement::identity(3)).unwrap(), p);
}

#[test]
fn identity_acts_trivially() {
    let (grid, f) = cube();
    let u = test_field(grid, 3);
    assert!(sup_diff(&act(&GroupElement::identity(3), &u, f).unwrap(), &u) < 1e-13);
}

#[test]
fn group_element_json_shape() {
    let g = GroupElement::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.0, -0.5], 7.0, 1.5).unwrap();
    let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
    assert_eq!(v["a"], serde_json::json!([1.0, 2.0, 3.0]));
    assert_eq!(v["gamma"], 7.0);
    assert_eq!(GroupElement::from_json(&g.to_json().unwrap()).unwrap(), g);
}

#[test]
fn action_composes_in_three_dimensions() {
    let (grid, f) = cube();
    let u = test_field(grid, 1);
    let g1 = GroupElement::new(vec![0.7, -0.4, 0.2], vec![0.3, 0.1, -0.2], 0.9, 1.2).unwrap();
    let g2 = GroupElement::new(vec![-0.5, 0.3, 0.6], vec![-0.1, 0.4, 0.2], -2.0, 0.85).unwrap();
    let twice = act(&g1, &act(&g2, &u, f).unwrap(), f).unwrap();
    let once = act(&g1.compose(&g2).unwrap(), &u, f).unwrap();
    assert!(sup_diff(&twice, &once) < 1e-9, "{}", sup_diff(&twice, &once));
    let back = act(&g1.inverse(), &act(&g1, &u, f).unwrap(), f).unwrap();
    assert!(sup_diff(&back, &u) < 1e-9);
    let gu = act(&g1, &u, f).unwrap();
    assert!((gu.mass() / u.mass() - g1.mu).abs() < 1e-10);
}

#[test]
fn generators_at_origin() {
    let (grid, f) = cube();
    let gs = GroundState::hartree(grid, solve_hartree_ground_state(&RadialSolverOptions::default()).unwrap()).unwrap();
    let phase = apply_generator(7, &gs.field, f).unwrap();
    assert!(sup_diff(&phase, &gs.field.scaled(Complex64::i())) < 1e-15);
    let scale = apply_generator(8, &gs.field, f).unwrap();
    let n = grid.shape()[0] / 2;
    let origin = (n * grid.shape()[1] + n) * grid.shape()[2] + n;
    let e0 = gs.field.data()[origin].re;
    assert!((scale.data()[origin].re - 2.0 * e0).abs() < 1e-9 * e0);
}

/// One-parameter subgroup through the identity along generator `j` (1-based).
fn subgroup(d: usize, j: usize, t: f64) -> GroupElement {
    let mut g = GroupElement::identity(d);
    let k = j - 1;
    if k < d {
        g.a[k] = t;
    } else if k < 2 * d {
        g.v[k - d] = t;
    } else if k == 2 * d {
        g.gamma = t;
    } else {
        g.mu = t.exp();
    }
    g
}

#[test]
fn generators_differentiate_the_action() {
    for (grid, f) in [line(), cube()] {
        let d = grid.dim();
        let u = test_field(grid, 4);
        for j in 1..=2 * d + 2 {
            let e = apply_generator(j, &u, f).unwrap();
            let err = |s: f64| {
                let p = act(&subgroup(d, j, s), &u, f).unwrap();
                let m = act(&subgroup(d, j, -s), &u, f).unwrap();
                let mut fd = p.sub(&m).unwrap();
                fd.scale(Complex64::new(0.5 / s, 0.0));
                sup_diff(&fd, &e)
            };
            let (e1, e2) = (err(1e-2), err(5e-3));
            assert!(e1 < 1e-3, "d={d} j={j} {e1}");
            assert!(e1 / e2 > 3.5, "d={d} j={j} order ratio {}", e1 / e2);
        }
    }
}

/// `d/dt (g(t)·u) = g·(Σ c_j e_j u)` with `c = curve_derivative(g, ġ)`.
#[test]
fn curve_derivative_matches_finite_differences() {
    for (grid, f) in [line(), cube()] {
        let d = grid.dim();
        let u = test_field(grid, 5);
        let curve = |t: f64| {
            let a = (0..d).map(|j| 0.3 * (j as f64 + 1.0) * (1.3 * t).sin() + 0.1 * t).collect();
            let v = (0..d).map(|j| 0.2 * (t + j as f64).cos() - 0.1).collect();
            GroupElement::new(a, v, 0.7 * t * t - 1.0, 1.0 + 0.3 * (0.9 * t).sin()).unwrap()
        };
        let t0 = 0.4;
        let g = curve(t0);
        let gdot = GroupTangent {
            a: (0..d).map(|j| 0.3 * (j as f64 + 1.0) * 1.3 * (1.3 * t0).cos() + 0.1).collect(),
            v: (0..d).map(|j| -0.2 * (t0 + j as f64).sin()).collect(),
            gamma: 1.4 * t0,
            mu: 0.27 * (0.9 * t0).cos(),
        };
        let c = curve_derivative(&g, &gdot).unwrap();
        let mut y = Field::zeros(grid);
        for (j, cj) in c.iter().enumerate() {
            y.axpy(Complex64::new(*cj, 0.0), &apply_generator(j + 1, &u, f).unwrap()).unwrap();
        }
        let exact = act(&g, &y, f).unwrap();
        let err = |s: f64| {
            let mut fd = act(&curve(t0 + s), &u, f).unwrap().sub(&act(&curve(t0 - s), &u, f).unwrap()).unwrap();
            fd.scale(Complex64::new(0.5 / s, 0.0));
            sup_diff(&fd, &exact) / exact.max_abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 < 1e-3, "d={d} {e1}");
        assert!(e1 / e2 > 3.5, "d={d} {}", e1 / e2);
    }
    let g = GroupElement::identity(3);
    assert_eq!(curve_derivative(&g, &GroupTangent { a: vec![0.0; 3], v: vec![0.0; 3], gamma: 0.0, mu: 0.0 }).unwrap(), vec![0.0; 8]);
    let scaling = GroupElement::new(vec![0.0; 3], vec![0.0; 3], 0.0, 2.0f64.exp()).unwrap();
    let c = curve_derivative(&scaling, &GroupTangent { a: vec![0.0; 3], v: vec![0.0; 3], gamma: 0.0, mu: 2.0f64.exp() }).unwrap();
    assert_eq!(c, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
}

#[test]
fn symplectic_form_elementary_values() {
    let (grid, f) = line();
    let gs = gp_ground_state(grid).unwrap();
    let eta = &gs.field;
    let i_eta = eta.scaled(Complex64::i());
    assert_eq!(eta.omega(eta).unwrap(), 0.0);
    assert!((eta.omega(&i_eta).unwrap() + 2.0).abs() < 1e-10);
    assert!(eta.inner(&i_eta).unwrap().abs() < 1e-15);
    let u = test_field(grid, 9);
    assert!(u.omega(&u).unwrap().abs() < 1e-14);
    let w = apply_generator(2, &u, f).unwrap();
    assert!((u.omega(&w).unwrap() + w.omega(&u).unwrap()).abs() < 1e-14);
}

fn check_restricted_pattern(m: &[Vec<f64>], d: usize, tol: f64) {
    let n = 2 * d + 2;
    for j in 0..n {
        for k in 0..n {
            assert!((m[j][k] + m[k][j]).abs() < 1e-10, "antisymmetry ({j},{k})");
            let expected = match (j, k) {
                (j, k) if j < d && k == j + d => -1.0,
                (j, k) if k < d && j == k + d => 1.0,
                (j, k) if j == 2 * d && k == 2 * d + 1 => 1.0,
                (j, k) if k == 2 * d && j == 2 * d + 1 => -1.0,
                _ => 0.0,
            };
            assert!((m[j][k] - expected).abs() < tol, "({j},{k}) = {} vs {expected}", m[j][k]);
        }
    }
}

#[test]
fn restricted_form_on_the_soliton_manifold() {
    let (grid, f) = line();
    let m = restricted_form_matrix(&gp_ground_state(grid).unwrap(), f).unwrap();
    check_restricted_pattern(&m, 1, 1e-8);
    let grid = Grid::cube(3, 96, 40.0).unwrap();
    let gs = GroundState::hartree(&grid, solve_hartree_ground_state(&RadialSolverOptions::default()).unwrap()).unwrap();
    let m = restricted_form_matrix(&gs, &Fourier::new(&grid)).unwrap();
    check_restricted_pattern(&m, 3, 1e-8);
}

#[test]
fn conformal_factor_examples() {
    let (grid, f) = cube();
    let (u, w) = (test_field(grid, 1), test_field(grid, 2));
    let dil = GroupElement::new(vec![0.0; 3], vec![0.0; 3], 0.0, 2.0).unwrap();
    assert!((conformal_factor_check(&dil, &u, &w, f).unwrap() - 2.0).abs() < 1e-6);
    let shift = GroupElement::new(vec![0.4, -1.1, 0.3], vec![0.0; 3], 0.0, 1.0).unwrap();
    assert!((conformal_factor_check(&shift, &u, &w, f).unwrap() - 1.0).abs() < 1e-9);
    assert!(conformal_factor_check(&dil, &u, &u, f).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn composition_is_associative(g in element(3), h in element(3), k in element(3)) {
        let left = g.compose(&h).unwrap().compose(&k).unwrap();
        let right = g.compose(&h.compose(&k).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12), "{left:?} vs {right:?}");
    }

    #[test]
    fn inverse_is_two_sided(g in element(3)) {
        let id = GroupElement::identity(3);
        prop_assert!(close(&g.compose(&g.inverse()).unwrap(), &id, 1e-12));
        prop_assert!(close(&g.inverse().compose(&g).unwrap(), &id, 1e-12));
        prop_assert!(close(&g.inverse().inverse(), &g, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn action_respects_the_group_law_on_a_line(g in element(1), h in element(1), seed in 0u64..1000) {
        let (grid, f) = line();
        let u = test_field(grid, seed);
        let twice = act(&g, &act(&h, &u, f).unwrap(), f).unwrap();
        let once = act(&g.compose(&h).unwrap(), &u, f).unwrap();
        prop_assert!(sup_diff(&twice, &once) < 1e-9);
        let gu = act(&g, &u, f).unwrap();
        prop_assert!((gu.mass() / u.mass() - g.mu).abs() < 1e-10);
    }

    #[test]
    fn pullback_of_the_form_is_conformal(g in element(3), s1 in 0u64..500, s2 in 500u64..1000) {
        let (grid, f) = cube();
        let (u, w) = (test_field(grid, s1), test_field(grid, s2));
        prop_assume!(u.omega(&w).unwrap().abs() > 1e-3);
        let ratio = conformal_factor_check(&g, &u, &w, f).unwrap();
        prop_assert!((ratio - g.mu).abs() < 1e-6, "{ratio} vs {}", g.mu);
    }
}
