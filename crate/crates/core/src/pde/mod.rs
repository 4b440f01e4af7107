//! Residuals of the sBO, sncILW and sILW equations and of their local and
//! semiclassical relatives, a periodic spectral evolver for sBO, Hamiltonian
//! monitors and limit probes.
//!
//! Residual norms are the sup over evaluation points of the Frobenius norm of
//! the pointwise residual matrix. On truncated line grids the outer 10% at
//! each end are skipped.

mod bidirectional;
mod charge_spin;
mod evolve;
mod local;

pub use bidirectional::{bidirectional_residual, BidirectionalReport, ComplexPatch, TildeSign};
pub use charge_spin::{
    charge_spin_consistency, charge_spin_residual, hwm_limit_probe, hwm_residual, ChargeSpinField, ChargeSpinResidual,
    HwmProbe, VectorField, VectorResidual,
};
pub use evolve::{
    evolve_periodic_sbo, hamiltonian_sbo, hamiltonian_sncilw, EvolutionRun, EvolveOptions, Hamiltonian,
    InvariantSample, Snapshot,
};
pub use local::{
    hf_residual, kdv_traveling_wave, local_limit_probe, matrix_kdv_residual, texpand_remainder, LimitBranch,
    LocalLimitProbe,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::KernelKind;
use crate::quad::QuadOptions;
use crate::soliton::{central_difference, Equation, PoleField, SolitonData};
use crate::spin::SpinMatrix;
use crate::transforms::{apply, apply_fn, calt_apply, hilbert, Domain, GridField, Method, Operator};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Fraction of a truncated grid skipped at each end.
pub const BOUNDARY_SKIP: f64 = 0.1;

/// Step of the centred time difference along sCM trajectories.
pub const TIME_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Nonlocal terms from the eigenfunction property of the pole ansatz.
    Analytic,
    /// Nonlocal terms from the transforms applied to sampled derivatives.
    Sampled,
}

/// How U_t of a soliton field is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeDerivative {
    /// Five-point centred difference over the sCM trajectory (the
    /// Richardson combination of two second-order differences).
    Trajectory { step: f64 },
    /// U_t assembled from the sCM right-hand side.
    ClosedForm,
}

impl Default for TimeDerivative {
    fn default() -> Self {
        TimeDerivative::Trajectory { step: TIME_STEP }
    }
}

/// A field whose residual can be evaluated: either a soliton (pole ansatz
/// along an sCM trajectory) or sampled data on a grid.
#[derive(Clone, Debug)]
pub enum FieldEvaluator {
    Soliton(SolitonSource),
    Grid(GridSource),
}

#[derive(Clone, Debug)]
pub struct SolitonSource {
    pub field: PoleField,
    neighbours: Option<Box<[PoleField; 4]>>,
    step: f64,
}

/// Sampled fields. A missing time derivative is taken as zero.
#[derive(Clone, Debug)]
pub struct GridSource {
    pub u: GridField,
    pub v: Option<GridField>,
    pub u_t: Option<GridField>,
    pub v_t: Option<GridField>,
}

impl FieldEvaluator {
    /// Soliton field at time t, with U_t from the trajectory.
    pub fn from_soliton(data: &SolitonData, t: f64) -> Result<Self> {
        Self::from_pole_field(data.field_at(t)?, TimeDerivative::default())
    }

    pub fn from_pole_field(field: PoleField, td: TimeDerivative) -> Result<Self> {
        let (neighbours, step) = match td {
            TimeDerivative::Trajectory { step } => (Some(Box::new(field.neighbours(step)?)), step),
            TimeDerivative::ClosedForm => (None, 0.0),
        };
        Ok(FieldEvaluator::Soliton(SolitonSource { field, neighbours, step }))
    }

    pub fn from_grid(u: GridField, u_t: Option<GridField>) -> Result<Self> {
        if let Some(ut) = &u_t {
            u.check_same_grid(ut)?;
        }
        Ok(FieldEvaluator::Grid(GridSource { u, v: None, u_t, v_t: None }))
    }

    pub fn from_grid_pair(u: GridField, v: GridField, u_t: Option<GridField>, v_t: Option<GridField>) -> Result<Self> {
        u.check_same_grid(&v)?;
        for g in u_t.iter().chain(v_t.iter()) {
            u.check_same_grid(g)?;
        }
        Ok(FieldEvaluator::Grid(GridSource {
            u,
            v: Some(v),
            u_t,
            v_t,
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldEvaluator::Soliton(s) => s.field.dim(),
            FieldEvaluator::Grid(g) => g.u.dim,
        }
    }

    /// Samples U and U_t at the nodes of a grid.
    pub fn sample(&self, domain: Domain, n: usize) -> Result<(GridField, GridField)> {
        match self {
            FieldEvaluator::Soliton(s) => {
                let d = s.field.dim();
                let xs = domain.nodes(n);
                let u = xs.par_iter().map(|&x| s.u_dx(x, 0)).collect::<Result<Vec<_>>>()?;
                let ut = xs.par_iter().map(|&x| s.u_t(x)).collect::<Result<Vec<_>>>()?;
                Ok((GridField::new(domain, d, u)?, GridField::new(domain, d, ut)?))
            }
            FieldEvaluator::Grid(g) => {
                if g.u.domain != domain || g.u.n() != n {
                    return Err(Error::GridMismatch("sampling a grid field on a different grid".into()));
                }
                Ok((g.u.clone(), g.u_t_or_zero()))
            }
        }
    }
}

impl SolitonSource {
    pub fn u_dx(&self, x: f64, k: usize) -> Result<SpinMatrix> {
        self.field.u_dx(x, k)
    }

    pub fn v_dx(&self, x: f64, k: usize) -> Result<SpinMatrix> {
        self.field.v_dx(x, k)
    }

    pub fn u_t(&self, x: f64) -> Result<SpinMatrix> {
        match &self.neighbours {
            Some(nb) => {
                let v = [nb[0].u(x)?, nb[1].u(x)?, nb[2].u(x)?, nb[3].u(x)?];
                Ok(central_difference([&v[0], &v[1], &v[2], &v[3]], self.step))
            }
            None => self.field.u_t(x),
        }
    }

    pub fn v_t(&self, x: f64) -> Result<SpinMatrix> {
        match &self.neighbours {
            Some(nb) => {
                let v = [nb[0].v(x)?, nb[1].v(x)?, nb[2].v(x)?, nb[3].v(x)?];
                Ok(central_difference([&v[0], &v[1], &v[2], &v[3]], self.step))
            }
            None => self.field.v_t(x),
        }
    }
}

impl GridSource {
    fn u_t_or_zero(&self) -> GridField {
        self.u_t
            .clone()
            .unwrap_or_else(|| GridField::zeros(self.u.domain, self.u.n(), self.u.dim))
    }

    fn v_t_or_zero(&self) -> GridField {
        self.v_t
            .clone()
            .unwrap_or_else(|| GridField::zeros(self.u.domain, self.u.n(), self.u.dim))
    }
}

/// Pointwise residual at the evaluation points and its sup-norm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Residual {
    pub xs: Vec<f64>,
    pub values: Vec<SpinMatrix>,
    pub sup: f64,
}

impl Residual {
    fn new(xs: Vec<f64>, values: Vec<SpinMatrix>) -> Residual {
        let sup = values.iter().map(|m| m.norm()).fold(0.0, f64::max);
        Residual { xs, values, sup }
    }

    /// Largest off-diagonal entry.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in &self.values {
            for i in 0..m.dim {
                for j in 0..m.dim {
                    if i != j {
                        worst = worst.max(m.get(i, j).norm());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairResidual {
    pub u: Residual,
    pub v: Residual,
}

impl PairResidual {
    pub fn max(&self) -> f64 {
        self.u.sup.max(self.v.sup)
    }
}

/// Index range of the evaluation points of an n-point grid.
pub(crate) fn interior_range(domain: &Domain, n: usize) -> std::ops::Range<usize> {
    if domain.is_periodic() {
        0..n
    } else {
        let k = (BOUNDARY_SKIP * n as f64).round() as usize;
        k..n - k
    }
}

pub(crate) fn interior_nodes(domain: &Domain, n: usize) -> Vec<f64> {
    domain.nodes(n)[interior_range(domain, n)].to_vec()
}

fn restrict<T: Clone>(domain: &Domain, v: &[T]) -> Vec<T> {
    v[interior_range(domain, v.len())].to_vec()
}

/// U_t + {U,U_x} + HU_xx + i[U, HU_x].
pub(crate) fn sbo_density(u: &SpinMatrix, ut: &SpinMatrix, ux: &SpinMatrix, hux: &SpinMatrix, huxx: &SpinMatrix) -> SpinMatrix {
    let mut r = ut.clone();
    r += &(&(u * ux) + &(ux * u));
    r += huxx;
    r += &(&(u * hux) - &(hux * u)).scale(I);
    r
}

/// Nonlocal term K∂ₓᵏU of a soliton field, chosen by case:
/// the periodic Hilbert transform spectrally on the circle, the adaptive
/// function oracle on the line for rational fields (whose algebraic decay
/// would leave a truncation error on any finite grid), and grid quadrature
/// for hyperbolic fields.
fn soliton_transform(
    src: &SolitonSource,
    op: Operator,
    k: usize,
    domain: &Domain,
    n: usize,
) -> Result<Vec<SpinMatrix>> {
    let f = |x: f64| src.u_dx(x, k);
    let case = src.field.case();
    match (case.kind, domain) {
        (KernelKind::Trigonometric, Domain::Periodic { .. }) => {
            if op != Operator::Hilbert {
                return Err(Error::Precondition("T and T̃ act on the line".into()));
            }
            let g = GridField::from_fn(*domain, n, src.field.dim(), f)?;
            Ok(apply(op, &g, Method::Spectral)?.values)
        }
        (KernelKind::Rational, Domain::LineTruncated { .. }) => {
            let opts = QuadOptions::default();
            let d = src.field.dim();
            interior_nodes(domain, n)
                .par_iter()
                .map(|&x| apply_fn(op, None, f, x, d, &opts))
                .collect()
        }
        (KernelKind::Hyperbolic, Domain::LineTruncated { .. }) => {
            let g = GridField::from_fn(*domain, n, src.field.dim(), f)?;
            Ok(restrict(domain, &apply(op, &g, Method::Quadrature)?.values))
        }
        _ => Err(Error::Precondition(format!(
            "{} field on a {} grid",
            case.label(),
            if domain.is_periodic() { "periodic" } else { "line" }
        ))),
    }
}

fn check_soliton_grid(src: &SolitonSource, domain: &Domain) -> Result<()> {
    let periodic_case = src.field.case().kind == KernelKind::Trigonometric;
    match domain {
        Domain::Periodic { period } => {
            let l = src.field.case().period();
            if !periodic_case || l.map_or(true, |l| (l - period).abs() > 1e-12 * l) {
                return Err(Error::GridMismatch("periodic grid must match the trigonometric period".into()));
            }
        }
        Domain::LineTruncated { .. } if periodic_case => {
            return Err(Error::GridMismatch("trigonometric fields live on the circle".into()));
        }
        _ => {}
    }
    Ok(())
}

/// Residual of the sBO equation
/// U_t + {U,U_x} + HU_xx + i[U, HU_x] = 0.
///
/// Analytic mode needs a soliton evaluator and uses HU_x = −Σ Pα′(x − a) −
/// Σ Qα′(x − b). Sampled mode applies an independent Hilbert transform.
pub fn sbo_residual(ev: &FieldEvaluator, domain: Domain, n: usize, mode: Mode) -> Result<Residual> {
    match ev {
        FieldEvaluator::Soliton(src) => {
            if src.field.equation != Equation::Sbo {
                return Err(Error::Precondition("sBO residual of an sncILW field".into()));
            }
            check_soliton_grid(src, &domain)?;
            let xs = interior_nodes(&domain, n);
            let (hux, huxx) = match mode {
                Mode::Analytic => {
                    let h1 = xs.par_iter().map(|&x| src.field.hilbert_u_dx(x, 1)).collect::<Result<Vec<_>>>()?;
                    let h2 = xs.par_iter().map(|&x| src.field.hilbert_u_dx(x, 2)).collect::<Result<Vec<_>>>()?;
                    (h1, h2)
                }
                Mode::Sampled => (
                    soliton_transform(src, Operator::Hilbert, 1, &domain, n)?,
                    soliton_transform(src, Operator::Hilbert, 2, &domain, n)?,
                ),
            };
            let values = xs
                .par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let u = src.u_dx(x, 0)?;
                    let ux = src.u_dx(x, 1)?;
                    let ut = src.u_t(x)?;
                    Ok(sbo_density(&u, &ut, &ux, &hux[i], &huxx[i]))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Residual::new(xs, values))
        }
        FieldEvaluator::Grid(g) => {
            if mode == Mode::Analytic {
                return Err(Error::Precondition("analytic mode needs a soliton evaluator".into()));
            }
            check_grid(&g.u, domain, n)?;
            let ux = g.u.derivative();
            let uxx = ux.derivative();
            let hux = hilbert(&ux)?;
            let huxx = hilbert(&uxx)?;
            let ut = g.u_t_or_zero();
            let values: Vec<SpinMatrix> = (0..n)
                .map(|i| sbo_density(&g.u.values[i], &ut.values[i], &ux.values[i], &hux.values[i], &huxx.values[i]))
                .collect();
            Ok(Residual::new(restrict(&domain, &g.u.nodes()), restrict(&domain, &values)))
        }
    }
}

fn check_grid(u: &GridField, domain: Domain, n: usize) -> Result<()> {
    if u.domain != domain || u.n() != n {
        return Err(Error::GridMismatch(format!(
            "field sampled on {:?} with {} points, residual requested on {:?} with {n}",
            u.domain,
            u.n(),
            domain
        )));
    }
    Ok(())
}

/// The two sncILW densities given pointwise values. With
/// (G₁, G₂) = 𝒯(U_x, V_x) and (G₁′, G₂′) = 𝒯(U_xx, V_xx):
/// U_t + {U,U_x} + G₁′ + i[U, G₁] and V_t − {V,V_x} + G₂′ − i[V, G₂].
#[allow(clippy::too_many_arguments)]
fn sncilw_density(
    u: &SpinMatrix,
    v: &SpinMatrix,
    ut: &SpinMatrix,
    vt: &SpinMatrix,
    ux: &SpinMatrix,
    vx: &SpinMatrix,
    g1: &SpinMatrix,
    g2: &SpinMatrix,
    g1x: &SpinMatrix,
    g2x: &SpinMatrix,
) -> (SpinMatrix, SpinMatrix) {
    let mut ru = ut.clone();
    ru += &(&(u * ux) + &(ux * u));
    ru += g1x;
    ru += &(&(u * g1) - &(g1 * u)).scale(I);
    let mut rv = vt.clone();
    rv -= &(&(v * vx) + &(vx * v));
    rv += g2x;
    rv -= &(&(v * g2) - &(g2 * v)).scale(I);
    (ru, rv)
}

/// Residuals of the sncILW equations
/// U_t + {U,U_x} + TU_xx + T̃V_xx + i[U, TU_x + T̃V_x] = 0,
/// V_t − {V,V_x} − TV_xx − T̃U_xx + i[V, TV_x + T̃U_x] = 0.
///
/// Analytic mode uses the 𝒯-eigenfunction property of the ansatz; sampled
/// mode applies grid quadrature for T and T̃ on the line.
pub fn sncilw_residual(ev: &FieldEvaluator, domain: Domain, n: usize, mode: Mode) -> Result<PairResidual> {
    let delta = match ev {
        FieldEvaluator::Soliton(src) => src
            .field
            .case()
            .delta()
            .ok_or_else(|| Error::Precondition("sncILW needs the hyperbolic case".into()))?,
        FieldEvaluator::Grid(_) => {
            return Err(Error::Precondition(
                "grid sncILW residual needs δ; use sncilw_residual_grid".into(),
            ))
        }
    };
    let FieldEvaluator::Soliton(src) = ev else { unreachable!() };
    if src.field.equation != Equation::Sncilw {
        return Err(Error::Precondition("sncILW residual of an sBO field".into()));
    }
    if domain.is_periodic() {
        return Err(Error::GridMismatch("sncILW fields live on the line".into()));
    }
    let xs = interior_nodes(&domain, n);
    let (g1, g2, g1x, g2x) = match mode {
        Mode::Analytic => {
            let a1 = xs.par_iter().map(|&x| src.field.calt_dx(x, 1)).collect::<Result<Vec<_>>>()?;
            let a2 = xs.par_iter().map(|&x| src.field.calt_dx(x, 2)).collect::<Result<Vec<_>>>()?;
            let (g1, g2): (Vec<_>, Vec<_>) = a1.into_iter().unzip();
            let (g1x, g2x): (Vec<_>, Vec<_>) = a2.into_iter().unzip();
            (g1, g2, g1x, g2x)
        }
        Mode::Sampled => {
            let d = src.field.dim();
            let sample = |k: usize| -> Result<(GridField, GridField)> {
                Ok((
                    GridField::from_fn(domain, n, d, |x| src.u_dx(x, k))?,
                    GridField::from_fn(domain, n, d, |x| src.v_dx(x, k))?,
                ))
            };
            let (ux, vx) = sample(1)?;
            let (uxx, vxx) = sample(2)?;
            let (g1, g2) = calt_apply(&ux, &vx, delta, Method::Quadrature)?;
            let (g1x, g2x) = calt_apply(&uxx, &vxx, delta, Method::Quadrature)?;
            (
                restrict(&domain, &g1.values),
                restrict(&domain, &g2.values),
                restrict(&domain, &g1x.values),
                restrict(&domain, &g2x.values),
            )
        }
    };
    let pairs = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = src.u_dx(x, 0)?;
            let v = src.v_dx(x, 0)?;
            let ux = src.u_dx(x, 1)?;
            let vx = src.v_dx(x, 1)?;
            let ut = src.u_t(x)?;
            let vt = src.v_t(x)?;
            Ok(sncilw_density(&u, &v, &ut, &vt, &ux, &vx, &g1[i], &g2[i], &g1x[i], &g2x[i]))
        })
        .collect::<Result<Vec<_>>>()?;
    let (ru, rv): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(PairResidual {
        u: Residual::new(xs.clone(), ru),
        v: Residual::new(xs, rv),
    })
}

/// Sampled sncILW residual of grid data (derivatives spectral, 𝒯 by
/// quadrature).
pub fn sncilw_residual_grid(ev: &FieldEvaluator, delta: f64) -> Result<PairResidual> {
    let FieldEvaluator::Grid(g) = ev else {
        return Err(Error::Precondition("expected a grid evaluator".into()));
    };
    let v = g
        .v
        .as_ref()
        .ok_or_else(|| Error::Precondition("sncILW needs the pair (U, V)".into()))?;
    if g.u.domain.is_periodic() {
        return Err(Error::GridMismatch("sncILW fields live on the line".into()));
    }
    let ux = g.u.derivative();
    let vx = v.derivative();
    let uxx = ux.derivative();
    let vxx = vx.derivative();
    let (g1, g2) = calt_apply(&ux, &vx, delta, Method::Quadrature)?;
    let (g1x, g2x) = calt_apply(&uxx, &vxx, delta, Method::Quadrature)?;
    let ut = g.u_t_or_zero();
    let vt = g.v_t_or_zero();
    let n = g.u.n();
    let (ru, rv): (Vec<_>, Vec<_>) = (0..n)
        .map(|i| {
            sncilw_density(
                &g.u.values[i],
                &v.values[i],
                &ut.values[i],
                &vt.values[i],
                &ux.values[i],
                &vx.values[i],
                &g1.values[i],
                &g2.values[i],
                &g1x.values[i],
                &g2x.values[i],
            )
        })
        .unzip();
    let dom = g.u.domain;
    let xs = restrict(&dom, &g.u.nodes());
    Ok(PairResidual {
        u: Residual::new(xs.clone(), restrict(&dom, &ru)),
        v: Residual::new(xs, restrict(&dom, &rv)),
    })
}

/// U_t + {U,U_x} + U_x/δ + TU_xx + i[U, TU_x].
fn silw_density(u: &SpinMatrix, ut: &SpinMatrix, ux: &SpinMatrix, tux: &SpinMatrix, tuxx: &SpinMatrix, delta: f64) -> SpinMatrix {
    let mut r = ut.clone();
    r += &(&(u * ux) + &(ux * u));
    r += &(ux * (1.0 / delta));
    r += tuxx;
    r += &(&(u * tux) - &(tux * u)).scale(I);
    r
}

/// Residual of the sILW equation
/// U_t + {U,U_x} + U_x/δ + TU_xx + i[U, TU_x] = 0 on the line.
pub fn silw_residual(ev: &FieldEvaluator, delta: f64, domain: Domain, n: usize) -> Result<Residual> {
    if !(delta > 0.0) {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    if domain.is_periodic() {
        return Err(Error::GridMismatch("sILW is posed on the line".into()));
    }
    let op = Operator::T { delta };
    match ev {
        FieldEvaluator::Soliton(src) => {
            if src.field.equation != Equation::Sbo {
                return Err(Error::Precondition("sILW residual expects a single-field (sBO-type) ansatz".into()));
            }
            check_soliton_grid(src, &domain)?;
            let xs = interior_nodes(&domain, n);
            let tux = soliton_transform(src, op, 1, &domain, n)?;
            let tuxx = soliton_transform(src, op, 2, &domain, n)?;
            let values = xs
                .par_iter()
                .enumerate()
                .map(|(i, &x)| {
                    let u = src.u_dx(x, 0)?;
                    let ux = src.u_dx(x, 1)?;
                    let ut = src.u_t(x)?;
                    Ok(silw_density(&u, &ut, &ux, &tux[i], &tuxx[i], delta))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Residual::new(xs, values))
        }
        FieldEvaluator::Grid(g) => {
            check_grid(&g.u, domain, n)?;
            let ux = g.u.derivative();
            let uxx = ux.derivative();
            let tux = apply(op, &ux, Method::Quadrature)?;
            let tuxx = apply(op, &uxx, Method::Quadrature)?;
            let ut = g.u_t_or_zero();
            let values: Vec<SpinMatrix> = (0..n)
                .map(|i| silw_density(&g.u.values[i], &ut.values[i], &ux.values[i], &tux.values[i], &tuxx.values[i], delta))
                .collect();
            Ok(Residual::new(restrict(&domain, &g.u.nodes()), restrict(&domain, &values)))
        }
    }
}

/// Largest of |U_x|/δ over the evaluation points, the size of the term by
/// which sILW differs from sBO at leading order.
pub fn drift_term_size(ev: &FieldEvaluator, delta: f64, domain: Domain, n: usize) -> Result<f64> {
    let xs = interior_nodes(&domain, n);
    let vals = match ev {
        FieldEvaluator::Soliton(src) => xs.iter().map(|&x| src.u_dx(x, 1)).collect::<Result<Vec<_>>>()?,
        FieldEvaluator::Grid(g) => restrict(&domain, &g.u.derivative().values),
    };
    Ok(vals.iter().map(|m| m.norm()).fold(0.0, f64::max) / delta)
}
