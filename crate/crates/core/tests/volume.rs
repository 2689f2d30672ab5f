mod common;

use num_complex::Complex64 as C64;
use plurisym::flow::{make_initial_hs, make_initial_kahler, FlowState, ProbeSeries, Rate};
use plurisym::forms::{Bidegree, Form, HermitianMetric, I};
use plurisym::torus::{global_inner_product, integrate, FormField, TorusGrid};
use plurisym::volume::{
    alpha_ks, beta_s, check_beta_pluriclosed, check_derivative_identities, coefficient_a, fit_polynomial,
    functional_p, functional_q, ruled_surface_a2, surface_obstruction, volume_polynomial, volume_v, TestForm,
};
use plurisym::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat(grid: TorusGrid) -> FlowState {
    FlowState::flat_kahler(grid)
}

fn with_constant_phi(grid: TorusGrid, c: C64) -> FlowState {
    let n = grid.dim();
    let phi = FormField::constant(grid, &Form::monomial(n, &[0, 1], &[]).scale(c)).unwrap();
    FlowState::new(0.0, phi, flat(grid).omega().clone()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Mean of `det g`, which is the Riemannian volume of the unit torus.
fn riemannian_volume(s: &FlowState) -> f64 {
    let d = s.metric().det();
    d.iter().sum::<f64>() / d.len() as f64
}

#[test]
fn alpha_edge_cases() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let s = make_initial_hs(grid, 1, 0.05, 1).unwrap();
    let a00 = alpha_ks(s.phi(), s.omega(), 0, 0);
    assert_eq!(a00, s.omega().power(2));
    for (k, sd) in [(-1, 0), (-1, 1), (2, 0), (1, 1), (0, 3)] {
        let a = alpha_ks(s.phi(), s.omega(), k, sd);
        assert_eq!(a.max_abs(), 0.0, "α[{k},{sd}]");
        let d = (2 - sd).clamp(0, 2) as usize;
        assert_eq!(a.bidegree(), Bidegree::new(d, d));
    }
    // β[n] = 1, β[1] = ω in dimension two
    let b2 = beta_s(s.phi(), s.omega(), 2);
    assert!(b2.components()[0].iter().all(|v| *v == C64::new(1.0, 0.0)));
    assert_eq!(beta_s(s.phi(), s.omega(), 1), *s.omega());
}

#[test]
fn beta_zero_in_dimension_two_by_hand() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let s = make_initial_hs(grid, 4, 0.05, 1).unwrap();
    let b0 = beta_s(s.phi(), s.omega(), 0);
    let mut expect = s.omega().wedge(s.omega()).unwrap().scale(C64::new(0.5, 0.0));
    expect.axpy(C64::new(1.0, 0.0), &s.phi().wedge(&s.phi().conjugate()).unwrap()).unwrap();
    assert!((&b0 - &expect).max_abs() < 1e-15);
    assert!(b0.reality_defect() < 1e-15);
}

#[test]
fn volume_of_flat_and_kahler_data_is_one() {
    for n in [2, 3] {
        let grid = TorusGrid::new(n, 8).unwrap();
        let s = flat(grid);
        assert!(close(volume_v(s.phi(), s.omega()), 1.0, 1e-14));
        let k = make_initial_kahler(grid, 3, 0.05, 1).unwrap();
        assert!(close(volume_v(k.phi(), k.omega()), 1.0, 1e-13));
    }
}

#[test]
fn volume_with_constant_phi() {
    for n in [2, 3] {
        let grid = TorusGrid::new(n, 8).unwrap();
        let c = C64::new(0.3, -0.4);
        let s = with_constant_phi(grid, c);
        assert!(close(volume_v(s.phi(), s.omega()), 1.0 + c.norm_sqr(), 1e-14), "n = {n}");
    }
}

#[test]
fn volume_splits_into_riemannian_volume_and_phi_norm() {
    let cases = [(2, 16, 42), (2, 8, 5), (3, 8, 42)];
    for (n, size, seed) in cases {
        let grid = TorusGrid::new(n, size).unwrap();
        let s = make_initial_hs(grid, seed, 0.05, 1).unwrap();
        let f = global_inner_product(s.phi(), s.phi(), s.metric()).unwrap();
        assert!(f.im.abs() < 1e-15);
        assert!(f.re > 1e-5);
        let v = volume_v(s.phi(), s.omega());
        assert!(close(v, riemannian_volume(&s) + f.re, 1e-13), "n = {n}: {v} vs {}", riemannian_volume(&s) + f.re);
    }
}

#[test]
fn coefficients() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let f = flat(grid);
    for i in 1..=2 {
        assert_eq!(coefficient_a(&f, i).unwrap().value, 0.0);
    }
    let s = make_initial_hs(grid, 42, 0.05, 1).unwrap();
    let a0 = coefficient_a(&s, 0).unwrap();
    assert!(close(a0.value, volume_v(s.phi(), s.omega()), 1e-15));
    for i in 1..=2 {
        let a = coefficient_a(&s, i).unwrap();
        assert!(a.scale > 1e-4);
        assert!(a.value.abs() < 1e-12 * a.scale, "a{i} = {a:?}");
    }
    assert!(matches!(coefficient_a(&s, 3), Err(Error::Precondition(_))));
    let p = volume_polynomial(&s).unwrap();
    assert_eq!(p.degree(), 2);
    assert!(p.residual.is_none());
    assert!(close(p.eval(0.3), a0.value, 1e-12));
}

#[test]
fn functionals_against_known_integrals() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let one = TestForm::one(grid);
    let k = make_initial_kahler(grid, 8, 0.05, 1).unwrap();
    assert!(close(functional_p(&k, 0, 0, &one).unwrap(), 2.0, 1e-13));
    let s = make_initial_hs(grid, 42, 0.05, 1).unwrap();
    let v = volume_v(s.phi(), s.omega());
    assert!(close(functional_q(&s, 0, &one).unwrap(), v, 1e-15));
    // ∫ω² = 2 vol, ∫φ∧φ̄ = F
    let f = global_inner_product(s.phi(), s.phi(), s.metric()).unwrap().re;
    assert!(close(functional_p(&s, 0, 0, &one).unwrap(), 2.0 * riemannian_volume(&s), 1e-13));
    assert!(close(functional_p(&s, 1, 0, &one).unwrap(), f, 1e-12));
}

#[test]
fn q_is_linear_in_the_test_form() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let s = make_initial_hs(grid, 6, 0.05, 1).unwrap();
    let h1 = HermitianMetric::new(2, vec![C64::new(2.0, 0.0), C64::new(0.1, 0.3), C64::new(0.1, -0.3), C64::new(1.0, 0.0)])
        .unwrap()
        .fundamental_form();
    let p2 = Form::monomial(2, &[0], &[1]).scale(I);
    let p2 = &p2 + &p2.conjugate();
    let t1 = FormField::constant(grid, &h1).unwrap();
    let t2 = FormField::constant(grid, &p2).unwrap();
    let sum = &t1 + &(&t2 * 2.0);
    let q = |f: &FormField| functional_q(&s, 1, &TestForm::new(f.clone()).unwrap()).unwrap();
    assert!(close(q(&sum), q(&t1) + 2.0 * q(&t2), 1e-14));
    // on the flat state Q[1;ψ] = ∫ω∧ψ = tr ψ
    let qf = functional_q(&flat(grid), 1, &TestForm::new(t1.clone()).unwrap()).unwrap();
    assert!(close(qf, 3.0, 1e-14));
}

#[test]
fn test_form_validation() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let deg = Bidegree::new(1, 1);
    let bumpy = FormField::from_fn(grid, deg, |x| {
        Form::monomial(2, &[0], &[0]).scale(I * (2.0 * std::f64::consts::PI * x[2]).cos())
    })
    .unwrap();
    assert!(matches!(TestForm::new(bumpy), Err(Error::Precondition(_))));
    let complex = FormField::constant(grid, &Form::monomial(2, &[0], &[0])).unwrap();
    assert!(matches!(TestForm::new(complex), Err(Error::NotReal(_))));
    let wrong = FormField::zeros(grid, Bidegree::new(2, 0));
    assert!(TestForm::new(wrong).is_err());
    let s = flat(grid);
    assert!(matches!(functional_q(&s, 0, &TestForm::new(flat(grid).omega().clone()).unwrap()), Err(Error::BidegreeMismatch { .. })));
    let other = TestForm::one(TorusGrid::new(2, 10).unwrap());
    assert!(functional_q(&s, 0, &other).is_err());
}

#[test]
fn beta_pluriclosedness() {
    let grid = TorusGrid::new(2, 16).unwrap();
    let k = make_initial_kahler(grid, 2, 0.05, 1).unwrap();
    assert!(check_beta_pluriclosed(&k, 1).unwrap() < 1e-12);
    let s = make_initial_hs(grid, 42, 0.05, 1).unwrap();
    assert!(check_beta_pluriclosed(&s, 1).unwrap() < 1e-12);
    assert_eq!(check_beta_pluriclosed(&s, 0).unwrap(), 0.0);

    // negative control: a real (1,1) bump that is not ∂∂̄-closed
    let bump = FormField::from_fn(grid, Bidegree::new(1, 1), |x| {
        Form::monomial(2, &[0], &[0]).scale(I * 0.05 * (2.0 * std::f64::consts::PI * x[2]).cos())
    })
    .unwrap();
    let bad = FlowState::new(0.0, s.phi().clone(), s.omega() + &bump).unwrap();
    assert!(check_beta_pluriclosed(&bad, 1).unwrap() > 1e-3);
}

#[test]
fn beta_pluriclosedness_in_dimension_three() {
    let grid = TorusGrid::new(3, 8).unwrap();
    let s = make_initial_hs(grid, 42, 0.05, 1).unwrap();
    assert!(check_beta_pluriclosed(&s, 2).unwrap() < 1e-12);
    assert!(check_beta_pluriclosed(&s, 1).unwrap() < 1e-12);
}

#[test]
fn fit_recovers_exact_polynomials() {
    let ts: Vec<f64> = (0..21).map(|i| 0.01 * i as f64).collect();
    let want = [1.0, -0.7, 2.5];
    let vs: Vec<f64> = ts.iter().map(|t| want[0] + want[1] * t + want[2] * t * t).collect();
    let p = fit_polynomial(&ts, &vs, 2).unwrap();
    for (a, b) in p.coeffs.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{:?}", p.coeffs);
    }
    assert!(p.residual.unwrap() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noisy: Vec<f64> = vs.iter().map(|v| v + 1e-8 * (rng.random::<f64>() - 0.5)).collect();
    let p = fit_polynomial(&ts, &noisy, 2).unwrap();
    assert!((p.coeffs[0] - want[0]).abs() < 1e-7);
    assert!((p.coeffs[1] - want[1]).abs() < 1e-5);
    assert!((p.coeffs[2] - want[2]).abs() < 1e-3);
    assert!(p.residual.unwrap() < 1e-8);
}

#[test]
fn fit_rejects_bad_samples() {
    assert!(matches!(fit_polynomial(&[0.0, 1.0], &[1.0, 2.0], 2), Err(Error::Precondition(_))));
    assert!(matches!(fit_polynomial(&[0.5; 5], &[1.0; 5], 2), Err(Error::Numerical(_))));
    assert!(matches!(fit_polynomial(&[0.0, 1.0, 2.0], &[1.0, f64::NAN, 2.0], 1), Err(Error::Precondition(_))));
    assert!(matches!(fit_polynomial(&[0.0, 1.0], &[1.0], 1), Err(Error::DimensionMismatch { .. })));
    let p = fit_polynomial(&[0.5; 3], &[2.0; 3], 0).unwrap();
    assert_eq!(p.coeffs, vec![2.0]);
}

#[test]
fn obstruction_examples() {
    let v = surface_obstruction(1.0, 0.0, ruled_surface_a2(2)).unwrap();
    assert!(v.obstructed);
    assert!((v.min_positive_root.unwrap() - 0.5).abs() < 1e-15);
    let v = surface_obstruction(1.0, -3.0, 2.0).unwrap();
    assert!((v.min_positive_root.unwrap() - 0.5).abs() < 1e-15);
    let v = surface_obstruction(1.0, -2.0, 1.0).unwrap();
    assert_eq!(v.discriminant, 0.0);
    assert!((v.min_positive_root.unwrap() - 1.0).abs() < 1e-15);
    assert!(!surface_obstruction(1.0, 1.0, 1.0).unwrap().obstructed);
    assert!(!surface_obstruction(1.0, 3.0, 2.0).unwrap().obstructed);
    assert!(!surface_obstruction(2.0, 0.0, ruled_surface_a2(0)).unwrap().obstructed);
    assert!(!surface_obstruction(2.0, 0.0, ruled_surface_a2(1)).unwrap().obstructed);
    assert_eq!(surface_obstruction(1.0, -4.0, 0.0).unwrap().min_positive_root, Some(0.25));
    assert!(!surface_obstruction(1.0, 4.0, 0.0).unwrap().obstructed);
    assert!(matches!(surface_obstruction(0.0, 1.0, 1.0), Err(Error::Precondition(_))));
    assert!(matches!(surface_obstruction(1.0, f64::INFINITY, 1.0), Err(Error::Precondition(_))));
    // tiny a1 against large a2 must not lose the small root
    let v = surface_obstruction(1e-10, -1.0, 1e8).unwrap();
    let r = v.min_positive_root.unwrap();
    assert!((r - 1.010205144336438e-10).abs() < 1e-24, "{r}");
    assert!((1e-10 - r + 1e8 * r * r).abs() < 1e-15 * (1e-10 + r));
}

#[test]
fn obstruction_matches_sign_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let a0 = rng.random_range(0.01..10.0);
        let a1 = rng.random_range(-10.0..10.0);
        let a2 = rng.random_range(-10.0..10.0);
        let v = surface_obstruction(a0, a1, a2).unwrap();
        match (common::scan_root(a0, a1, a2), v.min_positive_root) {
            (Some(s), Some(r)) => assert!((s - r).abs() <= 1e-9 * r, "{a0} {a1} {a2}: {s} vs {r}"),
            (None, None) => {}
            (None, Some(r)) => assert!(r > 1e8 || (v.discriminant.abs() < 1e-9), "{a0} {a1} {a2}: {r}"),
            (Some(s), None) => panic!("{a0} {a1} {a2}: scan found {s}"),
        }
    }
}

#[test]
fn identity_check_on_synthetic_series() {
    let dt = 1e-3;
    let values: Vec<_> = (0..=40).map(|i| (i, i as f64 * dt, (i as f64 * dt).sin())).collect();
    let rates = vec![(20, 20.0 * dt, Rate { value: (20.0 * dt).cos(), scale: 1.0 })];
    let s = ProbeSeries { name: "sin".into(), values: values.clone(), rates };
    let c = check_derivative_identities(&[s], dt).unwrap();
    assert_eq!(c[0].windows, 1);
    assert!(c[0].max_rel_error < 1e-12);

    let wrong = vec![(20, 20.0 * dt, Rate { value: 1.1 * (20.0 * dt).cos(), scale: 1.0 })];
    let s = ProbeSeries { name: "sin".into(), values: values.clone(), rates: wrong };
    assert!(check_derivative_identities(&[s], dt).unwrap()[0].max_rel_error > 0.09);

    let edge = vec![(40, 40.0 * dt, Rate { value: 1.0, scale: 1.0 })];
    let s = ProbeSeries { name: "sin".into(), values, rates: edge };
    assert!(matches!(check_derivative_identities(&[s], dt), Err(Error::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_is_exact_on_quadratics(
        a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
        t0 in 0.0f64..1.0, span in 0.01f64..2.0, m in 3usize..30,
    ) {
        let ts: Vec<f64> = (0..m).map(|i| t0 + span * i as f64 / (m - 1) as f64).collect();
        let vs: Vec<f64> = ts.iter().map(|t| a + b * t + c * t * t).collect();
        let p = fit_polynomial(&ts, &vs, 2).unwrap();
        for &t in &ts {
            prop_assert!((p.eval(t) - (a + b * t + c * t * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn obstruction_root_is_a_first_crossing(a0 in 0.01f64..10.0, a1 in -10.0f64..10.0, a2 in -10.0f64..10.0) {
        let v = surface_obstruction(a0, a1, a2).unwrap();
        let p = |t: f64| a0 + a1 * t + a2 * t * t;
        if let Some(r) = v.min_positive_root {
            prop_assert!(r > 0.0);
            let s = a0.abs() + (a1 * r).abs() + (a2 * r * r).abs();
            prop_assert!(p(r).abs() <= 1e-12 * s);
            for i in 1..100 {
                prop_assert!(p(r * i as f64 / 100.0) > -1e-12 * s);
            }
        } else {
            for i in 1..1000 {
                prop_assert!(p(0.01 * i as f64) > 0.0);
            }
        }
    }
}

#[test]
fn integrate_matches_volume_form_normalization() {
    let grid = TorusGrid::new(2, 8).unwrap();
    let w = flat(grid).omega().power(2);
    assert!((integrate(&w).unwrap() - C64::new(2.0, 0.0)).norm() < 1e-15);
}
