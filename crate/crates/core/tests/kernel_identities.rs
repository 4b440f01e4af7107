use std::f64::consts::PI;

use proptest::prelude::*;
use spinsol::{KernelCase, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// α from exponentials only, without the library's cot/coth helpers.
fn alpha_oracle(case: &KernelCase, z: C64) -> C64 {
    let i = c(0.0, 1.0);
    match case.kind {
        spinsol::KernelKind::Rational => 1.0 / z,
        spinsol::KernelKind::Trigonometric => {
            let s = PI / case.param;
            let e = (2.0 * i * s * z).exp();
            s * i * (e + 1.0) / (e - 1.0)
        }
        spinsol::KernelKind::Hyperbolic => {
            let s = PI / (2.0 * case.param);
            let e = (2.0 * s * z).exp();
            s * (e + 1.0) / (e - 1.0)
        }
    }
}

fn cases() -> Vec<KernelCase> {
    vec![
        KernelCase::rational(),
        KernelCase::trigonometric(2.0).unwrap(),
        KernelCase::trigonometric(7.5).unwrap(),
        KernelCase::hyperbolic(0.5).unwrap(),
        KernelCase::hyperbolic(1.0).unwrap(),
    ]
}

#[test]
fn hyperbolic_potential_is_alpha_squared_plus_constant() {
    let h = KernelCase::hyperbolic(1.0).unwrap();
    let z = c(0.3, 0.2);
    let a = alpha_oracle(&h, z);
    let want = a * a - (PI / 2.0).powi(2);
    assert!((h.v_pot(z).unwrap() - want).norm() < 1e-12);
}

#[test]
fn potential_derivative_matches_richardson_difference() {
    let h = KernelCase::hyperbolic(1.0).unwrap();
    let z = c(0.7, 0.0);
    let d = |s: f64| (h.v_pot(z + s).unwrap() - h.v_pot(z - s).unwrap()) / (2.0 * s);
    let step = 1e-5;
    let fd = (4.0 * d(step / 2.0) - d(step)) / 3.0;
    assert!((h.v_pot_prime(z).unwrap() - fd).norm() < 1e-8);
}

#[test]
fn addition_identity_rational_triple() {
    let r = KernelCase::rational().identity_residuals(c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)).unwrap();
    assert!(r.addition < 1e-15);
}

#[test]
fn hyperbolic_periodicity_example() {
    let h = KernelCase::hyperbolic(0.5).unwrap();
    let r = h.identity_residuals(c(1.0, 0.1), c(0.0, 0.0), c(-0.4, 0.3)).unwrap();
    assert!(r.periodicity.unwrap() < 1e-13);
}

#[test]
fn parameters_must_be_positive() {
    assert!(KernelCase::trigonometric(0.0).is_err());
    assert!(KernelCase::hyperbolic(-1.0).is_err());
    assert!(KernelCase::hyperbolic(f64::NAN).is_err());
}

fn arg() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y)| c(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn alpha_matches_exponential_oracle(z in arg(), k in 0usize..5) {
        let case = cases()[k];
        prop_assume!(case.pole_distance(z) > 1e-2);
        let got = case.alpha(z).unwrap();
        let want = alpha_oracle(&case, z);
        prop_assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
    }

    #[test]
    fn identities_hold(a in arg(), b in arg(), cc in arg(), k in 0usize..5) {
        let case = cases()[k];
        if let Ok(r) = case.identity_residuals(a, b, cc) {
            prop_assert!(r.max() < 1e-12, "{:?}", r);
        }
    }

    #[test]
    fn alpha_is_odd_and_potential_even(z in arg(), k in 0usize..5) {
        let case = cases()[k];
        prop_assume!(case.pole_distance(z) > 1e-3);
        let s = case.alpha(z).unwrap().norm().max(1.0);
        prop_assert!((case.alpha(-z).unwrap() + case.alpha(z).unwrap()).norm() <= 1e-13 * s);
        let v = case.v_pot(z).unwrap().norm().max(1.0);
        prop_assert!((case.v_pot(-z).unwrap() - case.v_pot(z).unwrap()).norm() <= 1e-13 * v);
    }

    #[test]
    fn jet_is_consistent(z in arg(), k in 0usize..5) {
        let case = cases()[k];
        prop_assume!(case.pole_distance(z) > 1e-2);
        let j = case.alpha_jet(z).unwrap();
        prop_assert_eq!(j[0], case.alpha(z).unwrap());
        prop_assert_eq!(j[1], -case.v_pot(z).unwrap());
        // α″ against a centred difference of α′.
        let h = 1e-4;
        let fd = (case.alpha_prime(z + h).unwrap() - case.alpha_prime(z - h).unwrap()) / (2.0 * h);
        prop_assert!((j[2] - fd).norm() <= 1e-5 * j[2].norm().max(1.0));
    }

    #[test]
    fn trigonometric_alpha_is_periodic(z in arg(), l in 0.5..10.0f64) {
        let case = KernelCase::trigonometric(l).unwrap();
        prop_assume!(case.pole_distance(z) > 1e-2);
        let a = case.alpha(z).unwrap();
        prop_assert!((case.alpha(z + l).unwrap() - a).norm() <= 1e-11 * a.norm().max(1.0));
    }
}
