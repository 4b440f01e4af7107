use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spinsol::io::{write_grid_csv, write_json, write_table_csv};
use spinsol::pde::{
    evolve_periodic_sbo, sbo_residual, sncilw_residual, EvolveOptions, FieldEvaluator, Mode,
};
use spinsol::soliton::{generate_general, generate_hermitian, solve_general_initial_data, solve_initial_data, CertReport};
use spinsol::suite::{run_suite, SuiteConfig};
use spinsol::{Equation, Error, GridField, KernelKind, SolitonData, C64};

use crate::config::{self, InitialField, RunConfig};

/// One pass/fail line of a report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, measured: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            measured,
            threshold,
            passed: measured.is_finite() && measured < threshold,
        }
    }
}

/// What a command produced: files written (relative to the output
/// directory) and whether every check passed.
pub struct Outcome {
    pub files: Vec<String>,
    pub passed: bool,
}

fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn csv_file(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct ConstructReport<'a> {
    command: &'static str,
    passed: bool,
    certification: &'a CertReport,
    classes: BTreeMap<&'static str, f64>,
    poles: Vec<[f64; 2]>,
    velocities: Vec<[f64; 2]>,
    /// −2iα(a − ā) for hermitian one-soliton data in cases I and II.
    one_soliton_velocity: Option<f64>,
    condition_block: f64,
    condition_velocity: f64,
    conditioning_flagged: bool,
}

pub fn build_soliton(cfg: &RunConfig, seed: u64) -> spinsol::Result<SolitonData> {
    let case = cfg.case.build()?;
    let mut data = match (&cfg.poles, cfg.m) {
        (Some(poles), None) => {
            let poles: Vec<C64> = poles.iter().map(config::complex).collect();
            let bras = cfg
                .bras
                .as_ref()
                .ok_or_else(|| Error::Precondition("explicit poles need explicit bras".into()))?;
            solve_initial_data(case, cfg.equation, &poles, &config::bras(bras))?
        }
        (Some(poles), Some(_)) => {
            let a: Vec<C64> = poles.iter().map(config::complex).collect();
            let b: Vec<C64> = cfg.b_poles.iter().flatten().map(config::complex).collect();
            let (Some(f), Some(g)) = (&cfg.bras, &cfg.kets) else {
                return Err(Error::Precondition("general data needs bras and kets".into()));
            };
            solve_general_initial_data(case, cfg.equation, &a, &b, &config::bras(f), &config::kets(g))?
        }
        (None, m) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match m {
                None => generate_hermitian(case, cfg.equation, cfg.n, cfg.d, &mut rng)?,
                Some(m) => generate_general(case, cfg.equation, cfg.n, m, cfg.d, &mut rng)?,
            }
        }
    };
    data.tol = cfg.tol;
    let cert = data.certify();
    if !cert.passed() {
        let (class, residual) = if cert.strip_ok {
            cert.classes()
                .into_iter()
                .filter(|(c, _)| *c != "strip_margin")
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("four residual classes")
        } else {
            ("strip_margin", cert.strip_margin)
        };
        return Err(Error::ConstructionFailed {
            class: class.to_string(),
            residual,
            tol: cfg.tol,
        });
    }
    Ok(data)
}

pub fn construct(cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<Outcome> {
    let data = build_soliton(cfg, seed)?;
    let cert = data.certify();
    let one = if data.hermitian && data.a.len() == 1 && data.case.kind != KernelKind::Hyperbolic {
        let a = data.a.poles[0];
        Some((C64::new(0.0, -2.0) * data.case.alpha(a - a.conj())?).re)
    } else {
        None
    };
    let mut files = vec![];
    let soliton = format!("{}.soliton.json", cfg.label);
    std::fs::write(out.join(&soliton), data.to_json()?)?;
    files.push(soliton);
    let report = ConstructReport {
        command: "construct",
        passed: cert.passed(),
        certification: &cert,
        classes: cert.classes().into_iter().collect(),
        poles: data.a.poles.iter().copied().map(pair).collect(),
        velocities: data.a.vels.iter().copied().map(pair).collect(),
        one_soliton_velocity: one,
        condition_block: data.conditioning.block,
        condition_velocity: data.conditioning.velocity,
        conditioning_flagged: data.conditioning.flagged,
    };
    let name = format!("{}.report.json", cfg.label);
    write_json(&out.join(&name), &report)?;
    files.push(name);
    Ok(Outcome {
        files,
        passed: cert.passed(),
    })
}

fn load_soliton(cfg: &RunConfig) -> anyhow::Result<SolitonData> {
    let Some(path) = &cfg.input else {
        bail!(Error::Precondition("this command needs `input`, a .soliton.json file".into()));
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SolitonData::from_json(&text)?)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    command: &'static str,
    passed: bool,
    checks: &'a [Check],
}

/// Certificate of the stored data, then residuals at each configured time:
/// analytic and sampled for sBO, sampled for sncILW.
pub fn verify(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let data = load_soliton(cfg)?;
    let grid = cfg.grid.unwrap_or_else(|| config::default_grid(&data.case, data.equation));
    let tol = cfg.check_tol;
    let cert = data.certify();
    let mut checks = vec![Check::below("certificate", cert.max_residual(), data.tol)];
    checks.push(Check {
        name: "strip_margin".into(),
        measured: cert.strip_margin,
        threshold: 0.0,
        passed: cert.strip_ok,
    });
    let mut rows = vec![];
    for &t in &cfg.times {
        let ev = FieldEvaluator::from_soliton(&data, t)?;
        match data.equation {
            Equation::Sbo => {
                let a = sbo_residual(&ev, grid.domain, grid.n_points, Mode::Analytic)?;
                let s = sbo_residual(&ev, grid.domain, grid.n_points, Mode::Sampled)?;
                let gap = a
                    .values
                    .iter()
                    .zip(&s.values)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                checks.push(Check::below(format!("sbo_analytic_t{t}"), a.sup, tol));
                checks.push(Check::below(format!("sbo_sampled_vs_analytic_t{t}"), gap, 10.0 * tol));
                for ((x, ra), rs) in a.xs.iter().zip(&a.values).zip(&s.values) {
                    rows.push(vec![t, *x, ra.norm(), rs.norm()]);
                }
            }
            Equation::Sncilw => {
                let r = sncilw_residual(&ev, grid.domain, grid.n_points, Mode::Sampled)?;
                checks.push(Check::below(format!("sncilw_sampled_t{t}"), r.max(), tol));
                for ((x, ru), rv) in r.u.xs.iter().zip(&r.u.values).zip(&r.v.values) {
                    rows.push(vec![t, *x, ru.norm(), rv.norm()]);
                }
            }
        }
        if data.hermitian && data.equation == Equation::Sbo {
            let (u, _) = ev.sample(grid.domain, grid.n_points)?;
            let h = u.values.iter().map(|m| m.hermiticity_defect()).fold(0.0, f64::max);
            checks.push(Check::below(format!("hermiticity_t{t}"), h, 1e-12));
        }
    }
    let passed = all_passed(&checks);
    let name = format!("{}.report.json", cfg.label);
    write_json(&out.join(&name), &CheckReport {
        command: "verify",
        passed,
        checks: &checks,
    })?;
    let csv = format!("{}.residual.csv", cfg.label);
    let header: &[&str] = match data.equation {
        Equation::Sbo => &["t", "x", "analytic", "sampled"],
        Equation::Sncilw => &["t", "x", "u", "v"],
    };
    write_table_csv(csv_file(&out.join(&csv))?, header, &rows)?;
    Ok(Outcome {
        files: vec![name, csv],
        passed,
    })
}

/// Spectral evolution of periodic sBO data with invariant monitoring.
pub fn evolve(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let tol = cfg.check_tol;
    let (initial, exact_source) = match cfg.initial {
        InitialField::Soliton => {
            let data = load_soliton(cfg)?;
            if data.case.kind != KernelKind::Trigonometric || data.equation != Equation::Sbo {
                bail!(Error::Precondition("evolution needs periodic sBO data".into()));
            }
            let grid = cfg.grid.unwrap_or_else(|| config::default_grid(&data.case, data.equation));
            let u0 = GridField::from_fn(grid.domain, grid.n_points, data.dim, |x| data.eval_sbo(0.0, x))?;
            (u0, Some(data))
        }
        InitialField::Zero => {
            let case = cfg.case.build()?;
            let grid = cfg.grid.unwrap_or_else(|| config::default_grid(&case, Equation::Sbo));
            (GridField::zeros(grid.domain, grid.n_points, cfg.d), None)
        }
    };
    let opts = EvolveOptions {
        t_end: cfg.t_end,
        dt: cfg.dt,
        ..Default::default()
    };
    let run = evolve_periodic_sbo(&initial, &opts)?;
    let [dq, dq2, dh] = run.relative_drifts();
    let mut checks = vec![
        Check::below("drift_trace", dq, tol),
        Check::below("drift_trace_sq", dq2, tol),
        Check::below("drift_hamiltonian", dh, tol),
    ];
    if run.hermitian_initial {
        checks.push(Check::below("hermiticity", run.max_hermiticity_defect(), 1e-10));
    }
    if let Some(data) = &exact_source {
        let fld = data.field_at(cfg.t_end)?;
        let exact = GridField::from_fn(initial.domain, initial.n(), data.dim, |x| fld.u(x))?;
        let err = run.last().field.sub(&exact)?.sup_norm(0.0);
        checks.push(Check::below("error_vs_exact", err, tol));
    }
    let passed = all_passed(&checks);
    let mut files = vec![];
    let name = format!("{}.report.json", cfg.label);
    write_json(&out.join(&name), &CheckReport {
        command: "evolve",
        passed,
        checks: &checks,
    })?;
    files.push(name);
    let inv = format!("{}.invariants.csv", cfg.label);
    let rows: Vec<Vec<f64>> = run
        .invariants
        .iter()
        .map(|s| vec![s.t, s.trace, s.trace_sq, s.hamiltonian, s.hamiltonian_imag, s.hermiticity, s.tail])
        .collect();
    write_table_csv(
        csv_file(&out.join(&inv))?,
        &["t", "trace", "trace_sq", "hamiltonian", "hamiltonian_imag", "hermiticity", "tail"],
        &rows,
    )?;
    files.push(inv);
    let fin = format!("{}.final.csv", cfg.label);
    write_grid_csv(csv_file(&out.join(&fin))?, &run.last().field)?;
    files.push(fin);
    Ok(Outcome { files, passed })
}

pub fn suite(cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<Outcome> {
    let report = run_suite(&SuiteConfig {
        seed,
        only: cfg.only.clone(),
    })?;
    for line in report.lines() {
        println!("{line}");
    }
    let name = format!("{}.report.json", cfg.label);
    write_json(&out.join(&name), &report)?;
    Ok(Outcome {
        files: vec![name],
        passed: report.all_passed(),
    })
}

pub fn output_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("spinsol-out"))
}
