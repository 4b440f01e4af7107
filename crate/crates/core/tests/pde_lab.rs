use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinsol::pde::*;
use spinsol::scm::backlund_residual;
use spinsol::soliton::{generate_general, generate_hermitian, solve_initial_data};
use spinsol::spin::pauli;
use spinsol::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn noncommuting_bump(x: f64) -> SpinMatrix {
    let s = pauli();
    let g = (-x * x).exp();
    let h = (-(x - 0.7).powi(2)).exp();
    let mut m = SpinMatrix::identity(2).scale(c(g, 0.0));
    m.add_scaled(&s[0], c(h, 0.0));
    m.add_scaled(&s[2], c(0.5 * g, 0.0));
    m
}

#[test]
fn sbo_residual_of_a_bump_is_order_one() {
    let dom = Domain::LineTruncated { half_width: 20.0 };
    let u = GridField::from_fn(dom, 1024, 2, |x| Ok(noncommuting_bump(x))).unwrap();
    let ev = FieldEvaluator::from_grid(u, None).unwrap();
    let r = sbo_residual(&ev, dom, 1024, Mode::Sampled).unwrap().sup;
    assert!(r > 0.1 && r < 100.0, "{r}");
}

#[test]
fn constant_fields_solve_every_equation() {
    let k = SpinMatrix::from_real(2, &[0.4, -0.3, -0.3, 1.1]);
    let per = Domain::Periodic { period: 5.0 };
    let u = GridField::new(per, 2, vec![k.clone(); 64]).unwrap();
    let ev = FieldEvaluator::from_grid(u, None).unwrap();
    assert!(sbo_residual(&ev, per, 64, Mode::Sampled).unwrap().sup < 1e-13);

    let line = Domain::LineTruncated { half_width: 30.0 };
    let u = GridField::new(line, 2, vec![k.clone(); 512]).unwrap();
    let pair = FieldEvaluator::from_grid_pair(u.clone(), u.clone(), None, None).unwrap();
    assert!(sncilw_residual_grid(&pair, 0.8).unwrap().max() < 1e-12);
    let ev = FieldEvaluator::from_grid(u, None).unwrap();
    assert!(silw_residual(&ev, 0.8, line, 512).unwrap().sup < 1e-12);
}

#[test]
fn silw_of_a_random_field_is_nonzero() {
    let line = Domain::LineTruncated { half_width: 30.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    use rand::Rng;
    let amp: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..1.5)).collect();
    let u = GridField::from_fn(line, 1024, 2, |x| {
        let g = (-(x * x) / 2.0).exp();
        Ok(SpinMatrix::from_real(2, &[amp[0] * g, amp[1] * g * x, amp[1] * g * x, amp[2] * g - amp[3] * g * x * x]))
    })
    .unwrap();
    let ev = FieldEvaluator::from_grid(u, None).unwrap();
    assert!(silw_residual(&ev, 1.0, line, 1024).unwrap().sup > 1e-2);
}

#[test]
fn silw_at_large_delta_reduces_to_sbo() {
    let case = KernelCase::rational();
    let bras = vec![BraVec::from_ket_components(&[c(1.0, 0.0), c(0.4, -0.3)])];
    let data = solve_initial_data(case, Equation::Sbo, &[c(0.3, -0.9)], &bras).unwrap();
    let ev = FieldEvaluator::from_soliton(&data, 0.2).unwrap();
    let dom = Domain::LineTruncated { half_width: 40.0 };
    let n = 1024;
    let sbo = sbo_residual(&ev, dom, n, Mode::Analytic).unwrap().sup;
    let silw = silw_residual(&ev, 100.0, dom, n).unwrap().sup;
    let drift = drift_term_size(&ev, 100.0, dom, n).unwrap();
    assert!(sbo < 1e-8, "{sbo:e}");
    assert!((silw - (sbo + drift)).abs() < 2e-2, "{silw:e} {drift:e}");
}

#[test]
fn evolver_tracks_a_periodic_one_soliton() {
    let l = 6.0;
    let case = KernelCase::trigonometric(l).unwrap();
    let f = BraVec::from_ket_components(&[c(1.0, 0.0), c(0.5, 0.5)]);
    let sol = one_soliton_field(case, c(1.0, -0.8), &f);
    let dom = Domain::Periodic { period: l };
    let n = 256;
    let u0 = GridField::from_fn(dom, n, 2, |x| sol.eval(x, 0.0)).unwrap();
    let opts = EvolveOptions {
        t_end: 0.2,
        dt: 1e-4,
        ..Default::default()
    };
    let run = evolve_periodic_sbo(&u0, &opts).unwrap();
    let exact = GridField::from_fn(dom, n, 2, |x| sol.eval(x, 0.2)).unwrap();
    let err = run.last().field.sub(&exact).unwrap().sup_norm(0.0);
    assert!(err < 1e-8, "{err:e}");
}

fn one_soliton_field(case: KernelCase, a0: C64, f: &BraVec) -> spinsol::soliton::OneSoliton {
    spinsol::soliton::one_soliton(case, a0, f).unwrap()
}

#[test]
fn evolver_conserves_invariants_of_smooth_hermitian_data() {
    let l = 2.0 * PI;
    let dom = Domain::Periodic { period: l };
    let s = pauli();
    let u0 = GridField::from_fn(dom, 128, 2, |x| {
        let mut m = SpinMatrix::identity(2).scale(c(0.5 + 0.3 * x.cos(), 0.0));
        m.add_scaled(&s[0], c(0.2 * (2.0 * x).sin(), 0.0));
        m.add_scaled(&s[1], c(0.1 * (x + 0.4).cos(), 0.0));
        m.add_scaled(&s[2], c(0.25 * (3.0 * x).cos(), 0.0));
        Ok(m)
    })
    .unwrap();
    let opts = EvolveOptions {
        t_end: 0.1,
        dt: 1e-4,
        monitor_every: 50,
        ..Default::default()
    };
    let run = evolve_periodic_sbo(&u0, &opts).unwrap();
    for d in run.relative_drifts() {
        assert!(d < 1e-6, "{d:e}");
    }
    assert!(run.max_hermiticity_defect() < 1e-10);
}

/// ∫ (u³/3 + u Hu_x/2) for u = c + a cos(kx) on one period: L(c³ + 3ca²/2)/3 − a²kL/4.
fn scalar_hamiltonian(cst: f64, a: f64, l: f64) -> f64 {
    let k = 2.0 * PI / l;
    l * (cst.powi(3) + 1.5 * cst * a * a) / 3.0 - a * a * k * l / 4.0
}

#[test]
fn scalar_hamiltonian_matches_closed_form() {
    let l = 4.0;
    let dom = Domain::Periodic { period: l };
    let u = GridField::from_scalar(dom, 64, |x| c(0.7 + 0.4 * (2.0 * PI * x / l).cos(), 0.0));
    let h = hamiltonian_sbo(&u).unwrap();
    assert!((h.value - scalar_hamiltonian(0.7, 0.4, l)).abs() < 1e-12, "{}", h.value);
    assert!(h.imag.abs() < 1e-14);
    let z = GridField::zeros(dom, 64, 3);
    assert_eq!(hamiltonian_sbo(&z).unwrap().value, 0.0);
}

#[test]
fn charge_spin_of_constant_data_vanishes() {
    let dom = Domain::Periodic { period: 3.0 };
    let m = [0.6, 0.0, 0.8];
    let f = ChargeSpinField {
        domain: dom,
        u: vec![1.3; 64],
        m: vec![m; 64],
        u_t: vec![0.0; 64],
        m_t: vec![[0.0; 3]; 64],
    };
    assert!(charge_spin_residual(&f).unwrap().max() < 1e-13);
}

#[test]
fn charge_spin_agrees_with_matrix_residual_for_two_solitons() {
    let l = 7.0;
    let case = KernelCase::trigonometric(l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = generate_hermitian(case, Equation::Sbo, 2, 2, &mut rng).unwrap();
    let ev = FieldEvaluator::from_soliton(&data, 0.1).unwrap();
    let dom = Domain::Periodic { period: l };
    let (u, ut) = ev.sample(dom, 512).unwrap();
    let f = ChargeSpinField::from_matrix(&u, &ut).unwrap();
    assert!(charge_spin_consistency(&f).unwrap() < 1e-6);
    assert!(charge_spin_residual(&f).unwrap().max() < 1e-6);
}

fn tilted(theta: f64, n: usize, l: f64) -> VectorField {
    let dom = Domain::Periodic { period: l };
    let k = 2.0 * PI / l;
    VectorField {
        domain: dom,
        values: dom
            .nodes(n)
            .iter()
            .map(|x| [theta.sin() * (k * x).cos(), theta.sin() * (k * x).sin(), theta.cos()])
            .collect(),
    }
}

#[test]
fn hwm_residuals() {
    let l = 2.0 * PI;
    let dom = Domain::Periodic { period: l };
    let flat = VectorField {
        domain: dom,
        values: vec![[0.0, 0.6, 0.8]; 64],
    };
    assert!(hwm_residual(&flat, None).unwrap().sup < 1e-14);

    // A tilted helix precesses: m ∧ Hm_x = k sinθ cosθ (sin kx, −cos kx, 0).
    let theta = PI / 4.0;
    let m = tilted(theta, 64, l);
    let r = hwm_residual(&m, None).unwrap().sup;
    assert!((r - 0.5).abs() < 1e-12, "{r}");
    let mt = VectorField {
        domain: dom,
        values: dom.nodes(64).iter().map(|x| [0.5 * x.sin(), -0.5 * x.cos(), 0.0]).collect(),
    };
    assert!(hwm_residual(&m, Some(&mt)).unwrap().sup < 1e-12);

    let bad = VectorField {
        domain: dom,
        values: vec![[0.0, 0.0, 1.1]; 64],
    };
    assert!(hwm_residual(&bad, None).is_err());
}

#[test]
fn hwm_probe_scales_inversely_with_lambda() {
    let case = KernelCase::trigonometric(7.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = generate_hermitian(case, Equation::Sbo, 1, 2, &mut rng).unwrap();
    let p = hwm_limit_probe(&data, &[1.0, 2.0, 4.0, 8.0], 256).unwrap();
    assert!(p.hwm < 1e-10, "{:e}", p.hwm);
    assert!(p.inverse_scaling_ok(), "{:?}", p.scaled());
}

#[test]
fn local_limits() {
    let r = texpand_remainder(0.04, 4096, 12.0).unwrap() / texpand_remainder(0.02, 4096, 12.0).unwrap();
    assert!((r - 8.0).abs() < 0.5, "{r}");

    let dom = Domain::LineTruncated { half_width: 40.0 };
    let (u, ut) = kdv_traveling_wave(dom, 1024, &[1.0, 2.5], &[-5.0, 3.0], 0.4).unwrap();
    let ev = FieldEvaluator::from_grid(u.clone(), Some(ut)).unwrap();
    assert!(matrix_kdv_residual(&ev, dom, 1024).unwrap().sup < 1e-6);

    // u is not an involution
    assert!(hf_residual(&FieldEvaluator::from_grid(u, None).unwrap(), dom, 1024).is_err());
}

#[test]
fn bidirectional_residuals() {
    let l = 6.0;
    let case = KernelCase::trigonometric(l).unwrap();
    let patch = ComplexPatch::period_strip(l, 1.5, 24, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = generate_general(case, Equation::Sbo, 1, 1, 2, &mut rng).unwrap();
    let st = data.scm_state();
    let exact = bidirectional_residual(&st, &patch, TildeSign::OneMinusZero, 1e-4).unwrap();
    assert!(exact.residual < 1e-6, "{:e}", exact.residual);
    assert!(exact.points_used > 200);

    // Breaking the Bäcklund constraints shows up linearly in the residual.
    let bend = |eps: f64| {
        let mut bent = st.clone();
        let b = bent.b.as_mut().unwrap();
        b.kets[0] = b.kets[0].scaled(c(1.0 + eps, 0.0));
        let bt = backlund_residual(&bent, C64::default()).unwrap().max();
        let r = bidirectional_residual(&bent, &patch, TildeSign::OneMinusZero, 1e-4).unwrap().residual;
        (bt, r)
    };
    let (bt2, r2) = bend(1e-2);
    let (bt3, r3) = bend(1e-3);
    assert!(bt2 > 1e-3 && bt2 < 1e-1, "{bt2:e}");
    assert!(r2 > 1e3 * exact.residual, "{r2:e}");
    assert!((bt2 / bt3 - 10.0).abs() < 1.0 && (r2 / r3 - 10.0).abs() < 1.0, "{bt2:e} {bt3:e} {r2:e} {r3:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hamiltonian_oracle(cst in -1.0..1.0f64, a in -1.0..1.0f64, l in 2.0..10.0f64) {
        let dom = Domain::Periodic { period: l };
        let u = GridField::from_scalar(dom, 64, |x| c(cst + a * (2.0 * PI * x / l).cos(), 0.0));
        let h = hamiltonian_sbo(&u).unwrap().value;
        let want = scalar_hamiltonian(cst, a, l);
        prop_assert!((h - want).abs() < 1e-11 * want.abs().max(1.0));
    }

    #[test]
    fn charge_spin_round_trip(q in 0.2..3.0f64, th in 0.0..PI, ph in 0.0..(2.0 * PI), qt in -1.0..1.0f64) {
        let dom = Domain::Periodic { period: 2.0 };
        let m = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        let mt = [-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0];
        let f = ChargeSpinField { domain: dom, u: vec![q; 8], m: vec![m; 8], u_t: vec![qt; 8], m_t: vec![mt; 8] };
        let (u, ut) = f.compose();
        let g = ChargeSpinField::from_matrix(&u, &ut).unwrap();
        for i in 0..8 {
            prop_assert!((g.u[i] - q).abs() < 1e-12 && (g.u_t[i] - qt).abs() < 1e-12);
            for k in 0..3 {
                prop_assert!((g.m[i][k] - m[k]).abs() < 1e-12);
                prop_assert!((g.m_t[i][k] - mt[k]).abs() < 1e-12 / q);
            }
        }
    }

    #[test]
    fn sbo_residual_is_shift_covariant(s in 0usize..64) {
        // A periodic grid field and its cyclic shift have shifted residuals.
        let dom = Domain::Periodic { period: 2.0 * PI };
        let u = GridField::from_fn(dom, 64, 2, |x| Ok(noncommuting_bump(x.sin()))).unwrap();
        let mut shifted = u.values.clone();
        shifted.rotate_left(s);
        let v = GridField::new(dom, 2, shifted).unwrap();
        let r1 = sbo_residual(&FieldEvaluator::from_grid(u, None).unwrap(), dom, 64, Mode::Sampled).unwrap();
        let r2 = sbo_residual(&FieldEvaluator::from_grid(v, None).unwrap(), dom, 64, Mode::Sampled).unwrap();
        for i in 0..64 {
            prop_assert!((&r1.values[(i + s) % 64] - &r2.values[i]).norm() < 1e-11);
        }
    }
}
