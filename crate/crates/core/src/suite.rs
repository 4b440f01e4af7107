//! The acceptance battery: eleven numbered checks with fixed tolerances and
//! runtime limits, shared by `spinsol suite` and the `acceptance` test.
//!
//! Every check draws its random data from a ChaCha8 stream seeded with
//! `seed + id`, so a single check can be rerun in isolation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::pde::{
    self, bidirectional_residual, charge_spin_consistency, charge_spin_residual, evolve_periodic_sbo,
    local_limit_probe, ChargeSpinField, ComplexPatch, EvolveOptions, FieldEvaluator, Mode, TildeSign,
};
use crate::scm::certify_proposition_bt;
use crate::soliton::{generate_general, generate_hermitian, solve_initial_data};
use crate::transforms::{eigenfunction_residual, EigenMethod, EigenProblem, Method};
use crate::{BraVec, Domain, Equation, Error, GridField, KernelCase, KernelKind, Result, SpinMatrix, C64};

pub const DEFAULT_SEED: u64 = 20_240_607;

/// Ids of all checks, in order.
pub const ALL: [u8; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Checks to run; empty means all.
    #[serde(default)]
    pub only: Vec<u8>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: DEFAULT_SEED, only: vec![] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Headline quantity compared against the threshold.
    pub measured: f64,
    /// Human-readable acceptance condition on `measured`.
    pub threshold: String,
    pub runtime_s: f64,
    pub limit_s: f64,
    /// Secondary measurements that also enter the verdict.
    pub details: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<24} measured {:<11} need {:<14} runtime {:>7.2}s (limit {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            format!("{:.3e}", self.measured),
            self.threshold,
            self.runtime_s,
            self.limit_s
        )?;
        if let Some(e) = &self.error {
            write!(f, " error: {e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub results: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.results.iter().map(|r| r.to_string()).collect()
    }
}

/// What a check body hands back before timing is attached.
struct Outcome {
    measured: f64,
    ok: bool,
    details: BTreeMap<String, f64>,
}

impl Outcome {
    fn below(measured: f64, tol: f64) -> Outcome {
        Outcome {
            measured,
            ok: measured < tol,
            details: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Outcome {
        self.details.insert(key.to_string(), value);
        self
    }

    /// A secondary quantity that must also stay below its tolerance.
    fn require(mut self, key: &str, value: f64, tol: f64) -> Outcome {
        self.ok &= value < tol;
        self.details.insert(key.to_string(), value);
        self
    }
}

struct CheckDef {
    name: &'static str,
    threshold: &'static str,
    limit_s: f64,
    body: fn(&mut ChaCha8Rng) -> Result<Outcome>,
}

fn check_def(id: u8) -> CheckDef {
    let (name, threshold, limit_s, body): (_, _, _, fn(&mut ChaCha8Rng) -> Result<Outcome>) = match id {
        1 => ("kernel identities", "< 1e-12", 5.0, identities),
        2 => ("backlund certificate", "< 1e-6", 120.0, backlund_certificate),
        3 => ("constraint solver", "< 1e-10", 10.0, constraint_solver),
        4 => ("sbo residual", "< 1e-8", 60.0, sbo_solitons),
        5 => ("sncilw residual", "< 1e-6", 120.0, sncilw_solitons),
        6 => ("eigenfunctions", "< 1e-6", 30.0, eigenfunctions),
        7 => ("spectral evolver", "< 1e-6", 120.0, evolver),
        8 => ("reductions", "< 1e-6", 60.0, reductions),
        9 => ("local limits", "|r - 8| < 0.5", 120.0, local_limits),
        10 => ("bidirectional sbo", "< 1e-6", 60.0, bidirectional),
        11 => ("chirality and gauge", "> 0", 10.0, chirality_gauge),
        _ => unreachable!("criterion ids run from 1 to 11"),
    };
    CheckDef { name, threshold, limit_s, body }
}

/// Runs one check. Errors are reported as failures.
pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionResult> {
    if !ALL.contains(&id) {
        return Err(Error::Precondition(format!("no criterion {id}")));
    }
    let s = check_def(id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(id as u64));
    let t0 = Instant::now();
    let out = (s.body)(&mut rng);
    let runtime_s = t0.elapsed().as_secs_f64();
    let mut r = CriterionResult {
        id,
        name: s.name.to_string(),
        passed: false,
        measured: f64::NAN,
        threshold: s.threshold.to_string(),
        runtime_s,
        limit_s: s.limit_s,
        details: BTreeMap::new(),
        error: None,
    };
    match out {
        Ok(o) => {
            r.passed = o.ok && o.measured.is_finite() && runtime_s < s.limit_s;
            r.measured = o.measured;
            r.details = o.details;
        }
        Err(e) => r.error = Some(format!("{}: {e}", e.kind())),
    }
    log::info!("{r}");
    Ok(r)
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let ids: Vec<u8> = if cfg.only.is_empty() { ALL.to_vec() } else { cfg.only.clone() };
    let results = ids
        .iter()
        .map(|&id| run_criterion(id, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { seed: cfg.seed, results })
}

fn three_cases() -> [KernelCase; 3] {
    [
        KernelCase::rational(),
        KernelCase::trigonometric(2.0 * PI).expect("valid period"),
        KernelCase::hyperbolic(1.0).expect("valid delta"),
    ]
}

fn uniform_c(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

fn identities(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut skipped = 0usize;
    for case in three_cases() {
        let mut done = 0;
        while done < 1000 {
            let (a, b, c) = (uniform_c(rng, 3.0), uniform_c(rng, 3.0), uniform_c(rng, 3.0));
            match case.identity_residuals(a, b, c) {
                Ok(r) => {
                    worst = worst.max(r.max());
                    done += 1;
                }
                Err(Error::PoleProximity { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Outcome::below(worst, 1e-12).with("samples_near_pole_redrawn", skipped as f64))
}

fn backlund_certificate(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut redraws = 0usize;
    let mut configs = 0usize;
    let mut largest: f64 = 0.0;
    for case in three_cases() {
        for (n, m) in [(1, 1), (2, 2), (2, 1), (1, 0)] {
            for d in 1..=3 {
                let mut attempt = 0;
                let cert = loop {
                    let data = generate_general(case, Equation::Sbo, n, m, d, rng)?;
                    match certify_proposition_bt(&data.scm_state(), 1.0, 1e-6, C64::default(), 11) {
                        Ok(c) => break c,
                        // Poles meeting inside [0, 1] end the flow; that is a
                        // property of the draw, not of the certificate.
                        Err(Error::Collision { .. } | Error::StepUnderflow { .. }) if attempt < 5 => {
                            attempt += 1;
                            redraws += 1;
                        }
                        Err(e) => return Err(e),
                    }
                };
                if cert.rejected_at_t0 {
                    worst = f64::INFINITY;
                }
                worst = worst.max(cert.max_backlund()).max(cert.max_acceleration());
                largest = cert.acceleration_scale.iter().fold(largest, |a, &b| a.max(b));
                configs += 1;
            }
        }
    }
    Ok(Outcome::below(worst, 1e-6)
        .with("configurations", configs as f64)
        .with("largest_acceleration", largest)
        .with("redraws", redraws as f64))
}

fn lower_pole(rng: &mut ChaCha8Rng, re: (f64, f64), im: (f64, f64)) -> C64 {
    C64::new(rng.gen_range(re.0..re.1), rng.gen_range(im.0..im.1))
}

fn random_bra(rng: &mut ChaCha8Rng, d: usize) -> BraVec {
    let v: Vec<C64> = (0..d).map(|_| uniform_c(rng, 1.0)).collect();
    let s = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    BraVec::from_row(v.into_iter().map(|z| z / s).collect())
}

fn constraint_solver(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let l = 7.0;
    let cases = [
        (KernelCase::rational(), Equation::Sbo),
        (KernelCase::trigonometric(l)?, Equation::Sbo),
        (KernelCase::hyperbolic(1.0)?, Equation::Sncilw),
    ];
    let mut worst: f64 = 0.0;
    let mut strip_failures = 0usize;
    for (case, eq) in cases {
        for n in 1..=3 {
            for d in 1..=3 {
                let rep = generate_hermitian(case, eq, n, d, rng)?.certify();
                worst = worst.max(rep.max_residual());
                strip_failures += (!rep.strip_ok) as usize;
            }
        }
    }
    let mut v_err: f64 = 0.0;
    for _ in 0..20 {
        for d in 1..=3 {
            let f = random_bra(rng, d);
            let a = lower_pole(rng, (-2.0, 2.0), (-1.5, -0.3));
            let data = solve_initial_data(KernelCase::rational(), Equation::Sbo, &[a], &[f.clone()])?;
            let want = -1.0 / a.im;
            v_err = v_err.max((data.a.vels[0] - want).norm() / want.abs().max(1.0));

            let a = lower_pole(rng, (0.0, l), (-1.2, -0.3));
            let data = solve_initial_data(KernelCase::trigonometric(l)?, Equation::Sbo, &[a], &[f])?;
            let k = 2.0 * PI / l;
            let want = -k / (k * a.im).tanh();
            v_err = v_err.max((data.a.vels[0] - want).norm() / want.abs().max(1.0));
        }
    }
    Ok(Outcome::below(worst, 1e-10)
        .require("one_soliton_velocity_error", v_err, 1e-12)
        .require("strip_failures", strip_failures as f64, 0.5))
}

fn sbo_solitons(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let l = 7.0;
    let mut analytic: f64 = 0.0;
    let mut agreement: f64 = 0.0;
    for case in [KernelCase::rational(), KernelCase::trigonometric(l)?] {
        let dom = match case.kind {
            KernelKind::Trigonometric => Domain::Periodic { period: l },
            _ => Domain::LineTruncated { half_width: 20.0 },
        };
        for n in 1..=3 {
            let data = generate_hermitian(case, Equation::Sbo, n, 2, rng)?;
            for t in [0.0, 0.5, 1.0] {
                let ev = FieldEvaluator::from_soliton(&data, t)?;
                let a = pde::sbo_residual(&ev, dom, 512, Mode::Analytic)?;
                let s = pde::sbo_residual(&ev, dom, 512, Mode::Sampled)?;
                analytic = analytic.max(a.sup);
                for (x, y) in a.values.iter().zip(&s.values) {
                    agreement = agreement.max((x - y).norm());
                }
            }
        }
    }
    Ok(Outcome::below(analytic, 1e-8).require("sampled_vs_analytic", agreement, 1e-5))
}

fn sncilw_solitons(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let case = KernelCase::hyperbolic(1.0)?;
    let dom = Domain::LineTruncated { half_width: 50.0 };
    let mut out = Vec::new();
    for n in 1..=2 {
        out.push((format!("hermitian_n{n}"), generate_hermitian(case, Equation::Sncilw, n, 2, rng)?));
    }
    out.push(("general_n1_m1".into(), generate_general(case, Equation::Sncilw, 1, 1, 2, rng)?));
    let mut worst: f64 = 0.0;
    let mut o = Outcome::below(0.0, 1.0);
    for (label, data) in out {
        let ev = FieldEvaluator::from_soliton(&data, 0.0)?;
        let r = pde::sncilw_residual(&ev, dom, 8192, Mode::Sampled)?.max();
        worst = worst.max(r);
        o = o.with(&label, r);
    }
    o.measured = worst;
    o.ok = worst < 1e-6;
    Ok(o)
}

fn eigenfunctions(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let n = 4096;
    let l = 6.0;
    let rational = KernelCase::rational();
    let trig = KernelCase::trigonometric(l)?;
    let lo = lower_pole(rng, (-1.0, 1.0), (-1.2, -0.5));
    let hi = lower_pole(rng, (-1.0, 1.0), (-1.2, -0.5)).conj();
    let tlo = lower_pole(rng, (0.0, l), (-1.2, -0.5));
    let clo = lower_pole(rng, (-1.0, 1.0), (-1.3, -0.7));
    let chi = lower_pole(rng, (-1.0, 1.0), (-1.3, -0.7)).conj();
    let grid = EigenMethod::Grid(Method::Quadrature);
    // Rational kernels decay algebraically, so the function oracle is used
    // on the line instead of a truncated grid.
    let checks = [
        ("hilbert_rational_lower", EigenProblem::Hilbert { case: rational, sign: 1.0 }, lo, 20.0, EigenMethod::Function),
        ("hilbert_rational_upper", EigenProblem::Hilbert { case: rational, sign: -1.0 }, hi, 20.0, EigenMethod::Function),
        ("hilbert_trig_lower", EigenProblem::Hilbert { case: trig, sign: 1.0 }, tlo, 0.0, EigenMethod::Grid(Method::Spectral)),
        ("hilbert_trig_upper", EigenProblem::Hilbert { case: trig, sign: -1.0 }, tlo.conj(), 0.0, EigenMethod::Grid(Method::Spectral)),
        ("calt_lower", EigenProblem::CalT { delta: 1.0, upper: false }, clo, 50.0, grid),
        ("calt_upper", EigenProblem::CalT { delta: 1.0, upper: true }, chi, 50.0, grid),
    ];
    let mut o = Outcome::below(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for (label, problem, a, w, method) in checks {
        let r = eigenfunction_residual(problem, a, n, w, method)?;
        worst = worst.max(r);
        o = o.with(label, r);
    }
    o.measured = worst;
    o.ok = worst < 1e-6;
    Ok(o)
}

fn evolver(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let l = 7.0;
    let n = 512;
    let case = KernelCase::trigonometric(l)?;
    let data = generate_hermitian(case, Equation::Sbo, 1, 2, rng)?;
    let dom = Domain::Periodic { period: l };
    let u0 = GridField::from_fn(dom, n, 2, |x| data.eval_sbo(0.0, x))?;
    let opts = EvolveOptions {
        t_end: 0.5,
        dt: 1e-4,
        snapshot_times: vec![0.1],
        ..Default::default()
    };
    let run = evolve_periodic_sbo(&u0, &opts)?;
    let fld = data.field_at(0.5)?;
    let exact = GridField::from_fn(dom, n, 2, |x| fld.u(x))?;
    let err = run.last().field.sub(&exact)?.sup_norm(0.0);
    let [dq, dq2, dh] = run.relative_drifts();
    let early = run
        .snapshots
        .iter()
        .filter(|s| s.t <= 0.1 + 1e-12)
        .flat_map(|s| s.field.values.iter().map(|m| m.hermiticity_defect()))
        .chain(run.invariants.iter().filter(|s| s.t <= 0.1 + 1e-12).map(|s| s.hermiticity))
        .fold(0.0, f64::max);
    Ok(Outcome::below(err, 1e-6)
        .require("drift_trace", dq, 1e-6)
        .require("drift_trace_sq", dq2, 1e-6)
        .require("drift_hamiltonian", dh, 1e-6)
        .require("hermiticity_to_t0.1", early, 1e-10))
}

/// u_t + 2uu_x + Hu_xx for real periodic samples, with its own FFT and the
/// combined multiplier -i sgn(k) k² for Hu_xx.
pub fn scalar_bo_residual(period: f64, u: &[f64], u_t: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hat: Vec<C64> = u.iter().map(|&x| C64::new(x, 0.0)).collect();
    fwd.process(&mut hat);
    let mut ux = hat.clone();
    let mut huxx = hat;
    for j in 0..n {
        let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let k = 2.0 * PI * m / period;
        if n % 2 == 0 && j == n / 2 {
            ux[j] = C64::default();
            huxx[j] = C64::default();
            continue;
        }
        ux[j] *= C64::new(0.0, k);
        huxx[j] *= C64::new(0.0, -k.signum() * k * k);
    }
    inv.process(&mut ux);
    inv.process(&mut huxx);
    let s = 1.0 / n as f64;
    (0..n)
        .map(|i| u_t[i] + 2.0 * u[i] * ux[i].re * s + huxx[i].re * s)
        .collect()
}

/// Real periodic field with a few random Fourier modes.
fn random_periodic(rng: &mut ChaCha8Rng, period: f64, n: usize) -> Vec<f64> {
    let modes: Vec<(f64, f64, f64)> = (1..=4)
        .map(|k| (k as f64, rng.gen_range(-0.5..0.5), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let c = rng.gen_range(-0.5..0.5);
    Domain::Periodic { period }
        .nodes(n)
        .into_iter()
        .map(|x| c + modes.iter().map(|(k, a, p)| a * (2.0 * PI * k * x / period + p).cos()).sum::<f64>())
        .collect()
}

fn diagonal_field(dom: Domain, cols: &[Vec<f64>]) -> Result<GridField> {
    let d = cols.len();
    let n = cols[0].len();
    let values = (0..n)
        .map(|i| {
            let mut m = SpinMatrix::zeros(d);
            for (k, c) in cols.iter().enumerate() {
                m.set(k, k, C64::new(c[i], 0.0));
            }
            m
        })
        .collect();
    GridField::new(dom, d, values)
}

fn reductions(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let l = 2.0 * PI;
    let n = 256;
    let dom = Domain::Periodic { period: l };

    let u = random_periodic(rng, l, n);
    let ut = random_periodic(rng, l, n);
    let ev = FieldEvaluator::from_grid(diagonal_field(dom, &[u.clone()])?, Some(diagonal_field(dom, &[ut.clone()])?))?;
    let r = pde::sbo_residual(&ev, dom, n, Mode::Sampled)?;
    let scalar = scalar_bo_residual(l, &u, &ut);
    // The random fields are not solutions, so the residuals are O(10) and the
    // gaps are measured relative to their size.
    let scale = |s: &[f64]| s.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    let scalar_gap = r
        .values
        .iter()
        .zip(&scalar)
        .map(|(m, s)| (m.get(0, 0) - s).norm())
        .fold(0.0, f64::max)
        / scale(&scalar);

    let us: Vec<Vec<f64>> = (0..3).map(|_| random_periodic(rng, l, n)).collect();
    let uts: Vec<Vec<f64>> = (0..3).map(|_| random_periodic(rng, l, n)).collect();
    let ev = FieldEvaluator::from_grid(diagonal_field(dom, &us)?, Some(diagonal_field(dom, &uts)?))?;
    let r = pde::sbo_residual(&ev, dom, n, Mode::Sampled)?;
    let off = r.max_off_diagonal();
    let mut diag_gap: f64 = 0.0;
    for k in 0..3 {
        let s = scalar_bo_residual(l, &us[k], &uts[k]);
        for (m, sv) in r.values.iter().zip(&s) {
            diag_gap = diag_gap.max((m.get(k, k) - sv).norm() / scale(&s));
        }
    }

    let lt = 7.0;
    let case = KernelCase::trigonometric(lt)?;
    let tdom = Domain::Periodic { period: lt };
    let mut consistency: f64 = 0.0;
    let mut charge_spin: f64 = 0.0;
    for nsol in 1..=2 {
        let data = generate_hermitian(case, Equation::Sbo, nsol, 2, rng)?;
        let ev = FieldEvaluator::from_soliton(&data, 0.2)?;
        let (u, ut) = ev.sample(tdom, 512)?;
        let f = ChargeSpinField::from_matrix(&u, &ut)?;
        consistency = consistency.max(charge_spin_consistency(&f)?);
        charge_spin = charge_spin.max(charge_spin_residual(&f)?.max());
    }

    let data = generate_hermitian(case, Equation::Sbo, 1, 1, rng)?;
    let ev = FieldEvaluator::from_soliton(&data, 0.0)?;
    let (u, ut) = ev.sample(tdom, 512)?;
    let theta = rng.gen_range(0.0..PI);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let m = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
    let f = ChargeSpinField {
        domain: tdom,
        u: u.values.iter().map(|v| v.get(0, 0).re).collect(),
        m: vec![m; 512],
        u_t: ut.values.iter().map(|v| v.get(0, 0).re).collect(),
        m_t: vec![[0.0; 3]; 512],
    };
    let bo = charge_spin_residual(&f)?;

    Ok(Outcome::below(consistency, 1e-6)
        .require("scalar_bo_gap", scalar_gap, 1e-12)
        .require("diagonal_off_diagonal", off, 1e-12)
        .require("diagonal_vs_scalar_bo", diag_gap, 1e-12)
        .require("charge_spin_residual", charge_spin, 1e-6)
        .require("constant_spin_charge", bo.sup_charge, 1e-6)
        .require("constant_spin_spin", bo.sup_spin, 1e-6))
}

fn local_limits(_rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let p = local_limit_probe(&[0.04, 0.02, 0.01], 4096, 12.0)?;
    let r = *p.texpand_ratios().last().expect("three deltas give two ratios");
    let mut o = Outcome {
        measured: r,
        ok: (r - 8.0).abs() < 0.5 && p.linear_scaling_ok(),
        details: BTreeMap::new(),
    };
    for (i, v) in p.kdv_ratios().into_iter().enumerate() {
        o = o.with(&format!("kdv_ratio_{i}"), v);
    }
    for (i, v) in p.hf_ratios().into_iter().enumerate() {
        o = o.with(&format!("hf_ratio_{i}"), v);
    }
    Ok(o.with("linear_scaling_ok", p.linear_scaling_ok() as u8 as f64))
}

fn bidirectional(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let l = 6.0;
    let case = KernelCase::trigonometric(l)?;
    let data = generate_general(case, Equation::Sbo, 1, 1, 2, rng)?;
    let cert = data.certify().max_residual();
    let st = data.scm_state();
    let patch = ComplexPatch::period_strip(l, 1.5, 24, 12);
    let r = bidirectional_residual(&st, &patch, TildeSign::OneMinusZero, 1e-4)?;
    let printed = bidirectional_residual(&st, &patch, TildeSign::ZeroMinusOne, 1e-4)?;
    Ok(Outcome::below(r.residual, 1e-6)
        .require("pair_certificate", cert, 1e-10)
        .with("points_used", r.points_used as f64)
        .with("opposite_sign_residual", printed.residual))
}

/// Position of the maximum of tr U near the grid maximum, refined by golden
/// section search.
fn peak(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, n: usize) -> Result<f64> {
    let h = (hi - lo) / n as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..n {
        let x = lo + h * i as f64;
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    while b - a > 1e-10 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c)? > f(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

fn chirality_gauge(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let l = 7.0;
    let tau = 0.05;
    let mut min_v = f64::INFINITY;
    let mut count = 0usize;
    for case in [KernelCase::rational(), KernelCase::trigonometric(l)?] {
        let (lo, hi) = match case.kind {
            KernelKind::Trigonometric => (0.0, l),
            _ => (-10.0, 10.0),
        };
        for d in 1..=3 {
            for _ in 0..5 {
                let data = generate_hermitian(case, Equation::Sbo, 1, d, rng)?;
                let f0 = data.field_at(0.0)?;
                let f1 = data.field_at(tau)?;
                let x0 = peak(|x| Ok(f0.u(x)?.trace().re), lo, hi, 400)?;
                let x1 = peak(|x| Ok(f1.u(x)?.trace().re), lo, hi, 400)?;
                let mut dx = x1 - x0;
                if case.kind == KernelKind::Trigonometric {
                    dx -= l * (dx / l).round();
                }
                min_v = min_v.min(dx / tau);
                count += 1;
            }
        }
    }

    let mut gauge: f64 = 0.0;
    for case in [KernelCase::rational(), KernelCase::trigonometric(l)?] {
        for n in 1..=3 {
            let data = generate_hermitian(case, Equation::Sbo, n, 2, rng)?;
            let c: Vec<C64> = (0..n)
                .map(|_| C64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0 * PI)))
                .collect();
            let g = data.gauge(&c);
            for i in 0..64 {
                let x = -3.0 + 6.0 * i as f64 / 63.0;
                let u = data.eval_sbo(0.0, x)?;
                let v = g.eval_sbo(0.0, x)?;
                gauge = gauge.max((&u - &v).norm() / u.norm().max(1.0));
            }
        }
    }
    Ok(Outcome {
        measured: min_v,
        ok: min_v > 0.0,
        details: BTreeMap::new(),
    }
    .with("solitons_tracked", count as f64)
    .require("gauge_defect", gauge, 1e-14))
}
