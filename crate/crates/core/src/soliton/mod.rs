//! Soliton initial data from the Bäcklund constraints at t = 0, its
//! certification, and evaluation of the pole-ansatz fields.

mod construct;
mod field;

pub use construct::{
    generate_general, generate_hermitian, random_bras, sample_poles, solve_general_initial_data,
    solve_initial_data, PoleBand,
};
pub use field::{central_difference, one_soliton, OneSoliton, PoleField};

use serde::{Deserialize, Serialize};

use crate::kernel::{KernelCase, KernelKind};
use crate::scm::{self, family_backlund_residual, Family, IntegrateOptions, ScmState};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Sbo,
    Sncilw,
}

impl Equation {
    /// Pole shift entering the cross-family α arguments of the constraints.
    pub fn shift(&self, case: &KernelCase) -> C64 {
        match self {
            Equation::Sbo => C64::default(),
            Equation::Sncilw => C64::new(0.0, case.delta().unwrap_or(0.0)),
        }
    }
}

/// Condition estimates of the construction's linear solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub block: f64,
    pub velocity: f64,
    /// Either estimate above 1e12.
    pub flagged: bool,
}

pub const COND_FLAG: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonData {
    pub case: KernelCase,
    pub equation: Equation,
    pub hermitian: bool,
    /// Poles a_{j,0}, velocities v_j, kets e_{j,0}, bras f_{j,0}.
    pub a: Family,
    /// Poles b_{j,0}, velocities w_j, kets g_{j,0}, bras h_{j,0}; absent in
    /// the hermitian case.
    pub b: Option<Family>,
    pub dim: usize,
    /// Certification tolerance.
    pub tol: f64,
    #[serde(default)]
    pub conditioning: Conditioning,
}

/// Max residual per constraint class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub normalization_a: f64,
    pub normalization_b: f64,
    pub backlund_a: f64,
    pub backlund_b: f64,
    /// Smallest signed distance of a pole to the edge of its allowed band
    /// (negative when violated).
    pub strip_margin: f64,
    pub strip_ok: bool,
    pub tol: f64,
}

impl CertReport {
    pub fn max_residual(&self) -> f64 {
        self.normalization_a
            .max(self.normalization_b)
            .max(self.backlund_a)
            .max(self.backlund_b)
    }

    pub fn passed(&self) -> bool {
        self.strip_ok && self.max_residual() < self.tol
    }

    pub fn classes(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("normalization_a", self.normalization_a),
            ("normalization_b", self.normalization_b),
            ("backlund_a", self.backlund_a),
            ("backlund_b", self.backlund_b),
            ("strip_margin", self.strip_margin),
        ]
    }
}

impl SolitonData {
    pub fn shift(&self) -> C64 {
        self.equation.shift(&self.case)
    }

    /// The b-family, mirrored from the a-family when hermitian.
    pub fn second(&self) -> Family {
        if self.hermitian {
            self.a.hermitian_mirror()
        } else {
            self.b.clone().unwrap_or_else(Family::empty)
        }
    }

    pub fn scm_state(&self) -> ScmState {
        ScmState {
            case: self.case,
            time: 0.0,
            dim: self.dim,
            a: self.a.clone(),
            b: if self.hermitian { None } else { self.b.clone() },
            mirror: self.hermitian,
        }
    }

    pub fn certify(&self) -> CertReport {
        certify_families(&self.case, self.equation, &self.a, &self.second(), self.shift(), self.tol)
    }

    /// Replaces (e_j, f_j) by (c_j e_j, f_j/c_j); in general mode the
    /// b-family is left alone.
    pub fn gauge(&self, c: &[C64]) -> SolitonData {
        let mut out = self.clone();
        out.a = self.a.gauge(c);
        out
    }

    /// Transports the data to the requested times along the sCM flow.
    pub fn evolve(&self, times: &[f64]) -> Result<Vec<PoleField>> {
        let mut out = Vec::with_capacity(times.len());
        let state = self.scm_state();
        for &t in times {
            let s = if t == 0.0 {
                state.clone()
            } else {
                let opts = IntegrateOptions {
                    rel_tol: 1e-13,
                    abs_tol: 1e-15,
                    ..Default::default()
                };
                scm::integrate(&state, t, &opts)?.last().clone()
            };
            out.push(PoleField::from_state(self.equation, &s)?);
        }
        Ok(out)
    }

    pub fn field_at(&self, t: f64) -> Result<PoleField> {
        Ok(self.evolve(&[t])?.remove(0))
    }

    /// U(x, t) of the sBO ansatz.
    pub fn eval_sbo(&self, t: f64, x: f64) -> Result<crate::SpinMatrix> {
        if self.equation != Equation::Sbo {
            return Err(Error::Precondition("data was built for sncILW".into()));
        }
        self.field_at(t)?.u(x)
    }

    /// (U, V)(x, t) of the sncILW ansatz.
    pub fn eval_sncilw(&self, t: f64, x: f64) -> Result<(crate::SpinMatrix, crate::SpinMatrix)> {
        if self.equation != Equation::Sncilw {
            return Err(Error::Precondition("data was built for sBO".into()));
        }
        let f = self.field_at(t)?;
        Ok((f.u(x)?, f.v(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: SolitonData = serde_json::from_str(s)?;
        d.case.validate()?;
        Ok(d)
    }
}

/// Signed distance of the poles to the edges of their allowed bands. For sBO
/// the a-poles live in the lower half plane and the b-poles in the upper; for
/// sncILW the bands are −3δ/2 < Im a < −δ/2 and δ/2 < Im b < 3δ/2.
pub fn strip_margin(case: &KernelCase, eq: Equation, a: &Family, b: &Family) -> f64 {
    let mut margin = f64::INFINITY;
    match eq {
        Equation::Sbo => {
            for z in &a.poles {
                margin = margin.min(-z.im);
            }
            for z in &b.poles {
                margin = margin.min(z.im);
            }
        }
        Equation::Sncilw => {
            let d = case.delta().unwrap_or(f64::NAN);
            for z in &a.poles {
                margin = margin.min((-z.im - 0.5 * d).min(1.5 * d + z.im));
            }
            for z in &b.poles {
                margin = margin.min((z.im - 0.5 * d).min(1.5 * d - z.im));
            }
        }
    }
    margin
}

pub fn check_strip(case: &KernelCase, eq: Equation, a: &Family, b: &Family) -> Result<()> {
    if eq == Equation::Sncilw && case.kind != KernelKind::Hyperbolic {
        return Err(Error::Precondition("sncILW requires the hyperbolic case".into()));
    }
    let m = strip_margin(case, eq, a, b);
    if m > 0.0 {
        Ok(())
    } else {
        Err(Error::StripViolation(format!(
            "pole outside its {} band (margin {m:.3e})",
            match eq {
                Equation::Sbo => "half-plane",
                Equation::Sncilw => "strip",
            }
        )))
    }
}

pub(crate) fn certify_families(
    case: &KernelCase,
    eq: Equation,
    a: &Family,
    b: &Family,
    shift: C64,
    tol: f64,
) -> CertReport {
    let bt = family_backlund_residual(case, a, b, shift).unwrap_or(scm::BacklundResidual {
        a: vec![f64::INFINITY],
        b: vec![f64::INFINITY],
    });
    let margin = strip_margin(case, eq, a, b);
    CertReport {
        normalization_a: a.normalization_defect(),
        normalization_b: b.normalization_defect(),
        backlund_a: bt.a.iter().copied().fold(0.0, f64::max),
        backlund_b: bt.b.iter().copied().fold(0.0, f64::max),
        strip_margin: margin,
        strip_ok: margin > 0.0,
        tol,
    }
}
