use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinsol::pde::{self, FieldEvaluator, Mode};
use spinsol::soliton::{check_strip, generate_hermitian, one_soliton, random_bras, solve_initial_data};
use spinsol::{BraVec, Domain, Equation, Error, Family, KernelCase, KetVec, SolitonData, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bra(v: &[C64]) -> BraVec {
    BraVec::from_row(v.to_vec())
}

#[test]
fn trigonometric_pair_with_overlapping_bras_is_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let case = KernelCase::trigonometric(2.0 * PI).unwrap();
    let bras = random_bras(2, 2, &mut rng);
    let data = solve_initial_data(case, Equation::Sbo, &[c(0.4, -0.7), c(2.5, -1.1)], &bras).unwrap();
    let rep = data.certify();
    assert!(rep.passed() && rep.max_residual() < 1e-10, "{:?}", rep);
}

#[test]
fn hand_built_non_interacting_data_is_certified() {
    // Orthogonal bras decouple the particles: v_j = −1/Im a_j, e_j = f_j†/⟨f_j|f_j⟩.
    let f1 = [c(1.0, 0.0), c(0.0, 0.0)];
    let f2 = [c(0.0, 0.0), c(0.0, 2.0)];
    let a = Family::new(
        vec![c(0.0, -1.0), c(1.0, -2.0)],
        vec![c(1.0, 0.0), c(0.5, 0.0)],
        vec![
            KetVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            KetVec::new(vec![c(0.0, 0.0), c(0.0, -0.5)]),
        ],
        vec![bra(&f1), bra(&f2)],
    )
    .unwrap();
    let data = SolitonData {
        case: KernelCase::rational(),
        equation: Equation::Sbo,
        hermitian: true,
        a,
        b: None,
        dim: 2,
        tol: 1e-10,
        conditioning: Default::default(),
    };
    let rep = data.certify();
    assert!(rep.max_residual() < 1e-12, "{:?}", rep);
}

#[test]
fn pole_above_the_axis_violates_the_strip() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut data = generate_hermitian(KernelCase::rational(), Equation::Sbo, 2, 2, &mut rng).unwrap();
    data.a.poles[1].im = 0.1;
    assert!(!data.certify().strip_ok);
    assert!(matches!(
        check_strip(&data.case, data.equation, &data.a, &data.second()),
        Err(Error::StripViolation(_))
    ));
    let bras = random_bras(1, 2, &mut rng);
    assert!(solve_initial_data(KernelCase::rational(), Equation::Sbo, &[c(0.0, 0.1)], &bras).is_err());
}

#[test]
fn diagonal_data_gives_diagonal_fields() {
    let e1 = [c(1.0, 0.0), c(0.0, 0.0)];
    let e2 = [c(0.0, 0.0), c(1.0, 0.0)];
    let data = solve_initial_data(KernelCase::rational(), Equation::Sbo, &[c(-1.0, -0.6), c(1.5, -0.9)], &[bra(&e1), bra(&e2)]).unwrap();
    for t in [0.0, 0.7, 2.0] {
        let fld = data.field_at(t).unwrap();
        for i in 0..40 {
            let u = fld.u(-6.0 + 0.3 * i as f64).unwrap();
            assert!(u.get(0, 1).norm() < 1e-13 && u.get(1, 0).norm() < 1e-13);
        }
    }
}

#[test]
fn sncilw_fields_are_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let data = generate_hermitian(KernelCase::hyperbolic(1.0).unwrap(), Equation::Sncilw, 2, 3, &mut rng).unwrap();
    for t in [0.0, 0.4] {
        for i in 0..10 {
            let (u, v) = data.eval_sncilw(t, -3.0 + 0.61 * i as f64).unwrap();
            assert!(u.hermiticity_defect() < 1e-13 && v.hermiticity_defect() < 1e-13);
        }
    }
}

#[test]
fn scalar_sncilw_soliton_solves_the_scalar_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let data = generate_hermitian(KernelCase::hyperbolic(1.0).unwrap(), Equation::Sncilw, 2, 1, &mut rng).unwrap();
    let ev = FieldEvaluator::from_soliton(&data, 0.3).unwrap();
    let r = pde::sncilw_residual(&ev, Domain::LineTruncated { half_width: 30.0 }, 512, Mode::Analytic).unwrap();
    assert!(r.max() < 1e-8, "{:.2e}", r.max());
}

#[test]
fn json_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let data = generate_hermitian(KernelCase::trigonometric(5.0).unwrap(), Equation::Sbo, 2, 2, &mut rng).unwrap();
    let back = SolitonData::from_json(&data.to_json().unwrap()).unwrap();
    assert_eq!(back, data);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn one_solitons_move_right(x in -2.0..2.0f64, y in -3.0..-0.05f64, l in 1.0..10.0f64) {
        let f = bra(&[c(1.0, 0.0)]);
        prop_assert!(one_soliton(KernelCase::rational(), c(x, y), &f).unwrap().velocity > 0.0);
        prop_assert!(one_soliton(KernelCase::trigonometric(l).unwrap(), c(x, y), &f).unwrap().velocity > 0.0);
    }

    #[test]
    fn closed_form_matches_construction(x in -2.0..2.0f64, y in -1.5..-0.2f64, f in prop::array::uniform4(-1.0..1.0f64), t in 0.0..1.0f64) {
        let f = bra(&[c(f[0], f[1]), c(f[2], f[3])]);
        prop_assume!(f.norm() > 0.1);
        let case = KernelCase::rational();
        let closed = one_soliton(case, c(x, y), &f).unwrap();
        let data = solve_initial_data(case, Equation::Sbo, &[c(x, y)], &[f]).unwrap();
        let fld = data.field_at(t).unwrap();
        for i in 0..100 {
            let xi = -10.0 + 0.2 * i as f64;
            let a = closed.eval(xi, t).unwrap();
            let b = fld.u(xi).unwrap();
            prop_assert!((&a - &b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn gauge_leaves_the_field_unchanged(seed in 0u64..1000, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = generate_hermitian(KernelCase::rational(), Equation::Sbo, n, 2, &mut rng).unwrap();
        let cs: Vec<C64> = (0..n).map(|j| C64::from_polar(0.5 + j as f64, 1.3 * j as f64 + 0.2)).collect();
        let g = data.gauge(&cs);
        for i in 0..32 {
            let x = -4.0 + 0.25 * i as f64;
            let u = data.eval_sbo(0.0, x).unwrap();
            let v = g.eval_sbo(0.0, x).unwrap();
            prop_assert!((&u - &v).norm() < 1e-14 * u.norm().max(1.0));
        }
    }
}

#[test]
fn projectors_stay_idempotent_along_the_flow() {
    let case = KernelCase::trigonometric(7.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = generate_hermitian(case, Equation::Sbo, 3, 3, &mut rng).unwrap();
    for fld in data.evolve(&[0.0, 0.4, 1.0]).unwrap() {
        for p in fld.a.projectors() {
            assert!((&(&p * &p) - &p).norm() < 1e-10);
        }
    }
}

/// With Im a = −δ/2 − O(1) the sncILW U-field has its effective poles at
/// a + iδ/2, and for large δ the data and the field approach the rational
/// sBO soliton with those poles.
#[test]
fn sncilw_u_component_tends_to_rational_sbo() {
    let poles = [C64::new(-0.8, -0.9), C64::new(1.1, -1.3)];
    let bras = vec![
        BraVec::from_ket_components(&[C64::new(1.0, 0.0), C64::new(0.3, 0.4)]),
        BraVec::from_ket_components(&[C64::new(-0.2, 0.1), C64::new(1.0, 0.0)]),
    ];
    let sbo = solve_initial_data(KernelCase::rational(), Equation::Sbo, &poles, &bras).unwrap();
    let deviation = |delta: f64| {
        let shifted: Vec<C64> = poles.iter().map(|a| a - C64::new(0.0, 0.5 * delta)).collect();
        let case = KernelCase::hyperbolic(delta).unwrap();
        let nc = solve_initial_data(case, Equation::Sncilw, &shifted, &bras).unwrap();
        let mut worst: f64 = 0.0;
        for t in [0.0, 0.5] {
            let (fs, fn_) = (sbo.field_at(t).unwrap(), nc.field_at(t).unwrap());
            for k in 0..41 {
                let x = -5.0 + 0.25 * k as f64;
                worst = worst.max((&fs.u(x).unwrap() - &fn_.u(x).unwrap()).norm());
            }
        }
        worst
    };
    // The leading correction is coth's π²z/12δ², about 1.7e-3 on |x| ≤ 5 at δ = 50.
    let (d50, d100, d200) = (deviation(50.0), deviation(100.0), deviation(200.0));
    assert!((d50 / d100 - 4.0).abs() < 0.4 && (d100 / d200 - 4.0).abs() < 0.4, "{d50:e} {d100:e} {d200:e}");
    let d400 = deviation(400.0);
    assert!(d400 < 1e-4, "{d400:e}");
}
