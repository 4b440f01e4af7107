use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinsol::scm::{backlund_residual, certify_proposition_bt, integrate, scm_rhs, IntegrateOptions};
use spinsol::soliton::{generate_general, generate_hermitian};
use spinsol::{BraVec, Equation, Family, KernelCase, KetVec, ScmState, C64};

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn scalar_family(poles: Vec<C64>, vels: Vec<C64>) -> Family {
    let n = poles.len();
    Family::new(
        poles,
        vels,
        vec![KetVec::new(vec![r(1.0)]); n],
        vec![BraVec::from_row(vec![r(1.0)]); n],
    )
    .unwrap()
}

#[test]
fn lone_particle_moves_freely() {
    let fam = scalar_family(vec![C64::new(0.3, -1.0)], vec![r(0.7)]);
    let s = ScmState::new(KernelCase::trigonometric(5.0).unwrap(), 1, fam, None).unwrap();
    let d = scm_rhs(&s).unwrap();
    assert_eq!(d.a.dvels[0], r(0.0));
    let tr = integrate(&s, 2.0, &IntegrateOptions::default()).unwrap();
    assert!((tr.last().a.poles[0] - C64::new(1.7, -1.0)).norm() < 1e-10);
}

#[test]
fn constraints_are_preserved_along_the_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = generate_hermitian(KernelCase::rational(), Equation::Sbo, 2, 2, &mut rng).unwrap();
    let tr = integrate(&data.scm_state(), 1.0, &IntegrateOptions::default()).unwrap();
    assert!(tr.max_drift() < 1e-9, "drift {}", tr.max_drift());
}

#[test]
fn integrator_self_convergence_has_order_at_least_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = generate_hermitian(KernelCase::rational(), Equation::Sbo, 2, 2, &mut rng).unwrap();
    let s = data.scm_state();
    let run = |tol: f64| {
        let opts = IntegrateOptions { rel_tol: tol, abs_tol: tol * 1e-2, ..Default::default() };
        integrate(&s, 1.0, &opts).unwrap()
    };
    let reference = run(1e-13);
    let err = |t: &spinsol::scm::Trajectory| {
        t.last()
            .a
            .poles
            .iter()
            .zip(&reference.last().a.poles)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };
    let coarse = run(1e-6);
    let fine = run(1e-8);
    let (e1, e2) = (err(&coarse), err(&fine));
    let (n1, n2) = (coarse.stats.accepted as f64, fine.stats.accepted as f64);
    assert!(e2 < e1);
    let order = (e1 / e2).ln() / (n2 / n1).ln();
    assert!(order >= 4.0, "observed order {order:.2} (errors {e1:.2e}, {e2:.2e}; steps {n1}, {n2})");
}

#[test]
fn one_soliton_backlund_residual_vanishes() {
    // a = −i, v = −2iα(−2i) = 1 with e = f = 1.
    let fam = scalar_family(vec![C64::new(0.0, -1.0)], vec![r(1.0)]);
    let s = ScmState::hermitian(KernelCase::rational(), 1, fam).unwrap();
    assert!(backlund_residual(&s, C64::default()).unwrap().max() < 1e-15);

    let fam = scalar_family(vec![C64::new(0.0, -1.0)], vec![r(1.1)]);
    let s = ScmState::hermitian(KernelCase::rational(), 1, fam).unwrap();
    let res = backlund_residual(&s, C64::default()).unwrap();
    assert!((res.a[0] - 0.1).abs() < 1e-12, "{:?}", res);
}

#[test]
fn empty_partner_family_leaves_only_the_first_sum() {
    let fam = scalar_family(vec![C64::new(0.0, -1.0)], vec![r(0.3)]);
    let s = ScmState::new(KernelCase::rational(), 1, fam, Some(Family::empty())).unwrap();
    let res = backlund_residual(&s, C64::default()).unwrap();
    assert!((res.a[0] - 0.3).abs() < 1e-15);
    assert!(res.b.is_empty());
}

#[test]
fn certificate_for_a_rational_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let data = generate_general(KernelCase::rational(), Equation::Sbo, 1, 1, 2, &mut rng).unwrap();
    let cert = certify_proposition_bt(&data.scm_state(), 1.0, 1e-7, C64::default(), 11).unwrap();
    assert!(cert.passed(), "bt {:.2e} acc {:.2e}", cert.max_backlund(), cert.max_acceleration());
}

#[test]
fn certificate_for_hermitian_trigonometric_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let data = generate_hermitian(KernelCase::trigonometric(6.0).unwrap(), Equation::Sbo, 2, 2, &mut rng).unwrap();
    let cert = certify_proposition_bt(&data.scm_state(), 1.0, 1e-7, C64::default(), 11).unwrap();
    assert!(cert.passed(), "bt {:.2e} acc {:.2e}", cert.max_backlund(), cert.max_acceleration());
}

#[test]
fn perturbed_data_is_rejected_at_the_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let data = generate_general(KernelCase::rational(), Equation::Sbo, 2, 2, 2, &mut rng).unwrap();

    let mut moved = data.clone();
    moved.a.poles[0] += C64::new(0.05, 0.0);
    let cert = certify_proposition_bt(&moved.scm_state(), 1.0, 1e-7, C64::default(), 11).unwrap();
    assert!(cert.rejected_at_t0 && cert.initial_backlund > 1e-4, "{}", cert.initial_backlund);

    let mut rescaled = data;
    rescaled.a.kets[0] = rescaled.a.kets[0].scaled(C64::new(1.01, 0.0));
    let cert = certify_proposition_bt(&rescaled.scm_state(), 1.0, 1e-7, C64::default(), 11).unwrap();
    assert!(cert.rejected_at_t0 && cert.initial_constraint > 1e-3);
    assert!(!cert.passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With d = 1 the force coefficients are symmetric in (j, k) and V′ is
    /// odd, so the accelerations of one family sum to zero.
    #[test]
    fn scalar_forces_cancel(
        poles in prop::collection::vec((-3.0..3.0f64, -2.0..2.0f64), 2..5),
        spins in prop::collection::vec((0.5..2.0f64, -1.0..1.0f64), 5),
        k in 0usize..3,
    ) {
        let n = poles.len();
        let poles: Vec<C64> = poles.into_iter().map(|(x, y)| C64::new(x, y)).collect();
        let kets: Vec<KetVec> = (0..n).map(|j| KetVec::new(vec![C64::new(spins[j].0, spins[j].1)])).collect();
        let bras: Vec<BraVec> = (0..n).map(|j| BraVec::from_row(vec![1.0 / C64::new(spins[j].0, spins[j].1)])).collect();
        let case = [KernelCase::rational(), KernelCase::trigonometric(4.0).unwrap(), KernelCase::hyperbolic(1.5).unwrap()][k];
        let fam = Family::new(poles, vec![r(0.0); n], kets, bras).unwrap();
        let s = ScmState::new(case, 1, fam, None).unwrap();
        if let Ok(d) = scm_rhs(&s) {
            let total: C64 = d.a.dvels.iter().sum();
            let scale = d.a.dvels.iter().map(|z| z.norm()).fold(1.0, f64::max);
            prop_assert!(total.norm() < 1e-11 * scale);
        }
    }

    #[test]
    fn gauge_preserves_projectors(seed in 0u64..500, c in (0.2..3.0f64, 0.0..std::f64::consts::TAU)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = generate_hermitian(KernelCase::rational(), Equation::Sbo, 1, 3, &mut rng).unwrap();
        let g = data.a.gauge(&[C64::from_polar(c.0, c.1)]);
        let (p, q) = (&data.a.projectors()[0], &g.projectors()[0]);
        prop_assert!((p - q).norm() < 1e-14 * p.norm().max(1.0));
    }
}
