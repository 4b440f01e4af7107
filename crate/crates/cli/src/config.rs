//! Run configuration. Configs are JSON; every field has a default so that
//! `{}` is a valid (rational, N = 1, d = 2) run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinsol::{BraVec, Domain, Equation, KernelCase, KetVec, C64};

/// Kernel case with its length parameter in the units of x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaseSpec {
    Rational,
    Trigonometric { period: f64 },
    Hyperbolic { delta: f64 },
}

impl CaseSpec {
    pub fn build(&self) -> spinsol::Result<KernelCase> {
        match *self {
            CaseSpec::Rational => Ok(KernelCase::rational()),
            CaseSpec::Trigonometric { period } => KernelCase::trigonometric(period),
            CaseSpec::Hyperbolic { delta } => KernelCase::hyperbolic(delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub domain: Domain,
    pub n_points: usize,
}

/// What `evolve` starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialField {
    /// The soliton stored at `input`, sampled at t = 0.
    Soliton,
    /// U ≡ 0 of size d.
    Zero,
}

/// A complex number as [re, im].
pub type Complex = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Informational; the verb on the command line decides what runs.
    pub command: Option<String>,
    pub case: CaseSpec,
    pub equation: Equation,
    /// Number of a-poles.
    pub n: usize,
    /// Number of b-poles; absent for hermitian (mirrored) data.
    pub m: Option<usize>,
    pub d: usize,
    /// Explicit a-poles. When absent, poles and bras are drawn from `seed`.
    pub poles: Option<Vec<Complex>>,
    /// Explicit bras ⟨f_j|, one row of d entries per pole.
    pub bras: Option<Vec<Vec<Complex>>>,
    /// Explicit b-poles (general data).
    pub b_poles: Option<Vec<Complex>>,
    /// Explicit kets |g_j⟩ (general data).
    pub kets: Option<Vec<Vec<Complex>>>,
    pub seed: Option<u64>,
    /// Evaluation / evolution grid; a case-dependent default is used when
    /// absent.
    pub grid: Option<GridSpec>,
    /// Times at which `verify` evaluates residuals.
    pub times: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    /// Certification tolerance for constructed data.
    pub tol: f64,
    /// Tolerance for `verify` and `evolve` checks.
    pub check_tol: f64,
    /// Soliton file read by `verify` and `evolve`.
    pub input: Option<PathBuf>,
    pub initial: InitialField,
    /// Acceptance checks run by `suite`; empty means all.
    pub only: Vec<u8>,
    /// Stem of the output files.
    pub label: String,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            case: CaseSpec::Rational,
            equation: Equation::Sbo,
            n: 1,
            m: None,
            d: 2,
            poles: None,
            bras: None,
            b_poles: None,
            kets: None,
            seed: None,
            grid: None,
            times: vec![0.0, 0.5],
            t_end: 0.1,
            dt: 1e-4,
            tol: 1e-10,
            check_tol: 1e-6,
            input: None,
            initial: InitialField::Soliton,
            only: vec![],
            label: "run".into(),
            out: None,
            threads: None,
        }
    }
}

pub fn complex(c: &Complex) -> C64 {
    C64::new(c[0], c[1])
}

pub fn bras(rows: &[Vec<Complex>]) -> Vec<BraVec> {
    rows.iter().map(|r| BraVec::from_row(r.iter().map(complex).collect())).collect()
}

pub fn kets(rows: &[Vec<Complex>]) -> Vec<KetVec> {
    rows.iter().map(|r| KetVec::new(r.iter().map(complex).collect())).collect()
}

/// Grid used when the config gives none: one period on the circle, [−20, 20)
/// for the rational case and the δ-scaled window for the hyperbolic case.
pub fn default_grid(case: &KernelCase, equation: Equation) -> GridSpec {
    match (case.period(), case.delta()) {
        (Some(period), _) => GridSpec {
            domain: Domain::Periodic { period },
            n_points: 512,
        },
        (None, Some(delta)) => GridSpec {
            domain: Domain::line_for_delta(delta),
            n_points: if equation == Equation::Sncilw { 8192 } else { 4096 },
        },
        _ => GridSpec {
            domain: Domain::LineTruncated { half_width: 20.0 },
            n_points: 512,
        },
    }
}
