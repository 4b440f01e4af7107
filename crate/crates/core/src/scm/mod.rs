//! The spin Calogero-Moser (Gibbons–Hermsen) system on complexified phase
//! space, its Bäcklund constraints, integration and a numerical check that the
//! first-order Bäcklund flow implies the second-order equations.

mod certify;
mod integrate;

pub use certify::{backlund_flow_step, certify_proposition_bt, PropCertificate};
pub use integrate::{integrate, IntegrateOptions, Trajectory};

use serde::{Deserialize, Serialize};

use crate::kernel::KernelCase;
use crate::spin::{pair, BraVec, KetVec, SpinMatrix};
use crate::{Error, Result, C64};

pub const COLLISION_GUARD: f64 = 1e-9;

const I2: C64 = C64::new(0.0, 2.0);

/// Poles, velocities and spin pairs of one particle family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub poles: Vec<C64>,
    pub vels: Vec<C64>,
    pub kets: Vec<KetVec>,
    pub bras: Vec<BraVec>,
}

impl Family {
    pub fn new(poles: Vec<C64>, vels: Vec<C64>, kets: Vec<KetVec>, bras: Vec<BraVec>) -> Result<Self> {
        let n = poles.len();
        for len in [vels.len(), kets.len(), bras.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if let Some(d) = kets.first().map(|k| k.dim()) {
            for k in &kets {
                if k.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: k.dim() });
                }
            }
            for b in &bras {
                if b.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: b.dim() });
                }
            }
        }
        Ok(Family { poles, vels, kets, bras })
    }

    pub fn empty() -> Self {
        Family {
            poles: vec![],
            vels: vec![],
            kets: vec![],
            bras: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// The family (a*, |f⟩, ⟨e|) with conjugated velocities.
    pub fn hermitian_mirror(&self) -> Family {
        Family {
            poles: self.poles.iter().map(|z| z.conj()).collect(),
            vels: self.vels.iter().map(|z| z.conj()).collect(),
            kets: self.bras.iter().map(|f| f.dual()).collect(),
            bras: self.kets.iter().map(|e| e.dual()).collect(),
        }
    }

    /// Residue matrices |e_j⟩⟨f_j|.
    pub fn projectors(&self) -> Vec<SpinMatrix> {
        self.kets
            .iter()
            .zip(&self.bras)
            .map(|(e, f)| {
                let mut m = SpinMatrix::zeros(e.dim());
                m.add_outer_scaled(e, f, C64::new(1.0, 0.0));
                m
            })
            .collect()
    }

    /// max_j |⟨f_j|e_j⟩ − 1|.
    pub fn normalization_defect(&self) -> f64 {
        self.kets
            .iter()
            .zip(&self.bras)
            .map(|(e, f)| (pair(f, e) - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// Rescales kets so that ⟨f_j|e_j⟩ = 1.
    pub fn renormalize(&mut self) {
        for (e, f) in self.kets.iter_mut().zip(&self.bras) {
            let p = pair(f, e);
            if p.norm() > 0.0 {
                *e = e.scaled(p.inv());
            }
        }
    }

    /// Replaces (e_j, f_j) by (c_j e_j, f_j / c_j).
    pub fn gauge(&self, c: &[C64]) -> Family {
        let mut out = self.clone();
        for (j, cj) in c.iter().enumerate() {
            out.kets[j] = out.kets[j].scaled(*cj);
            out.bras[j] = out.bras[j].scaled(cj.inv());
        }
        out
    }
}

/// A phase-space point of one sCM system, optionally paired with a second
/// system for the Bäcklund transformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmState {
    pub case: KernelCase,
    pub time: f64,
    pub dim: usize,
    pub a: Family,
    pub b: Option<Family>,
    /// When set, the second family is the hermitian mirror of the first and
    /// `b` must be `None`.
    #[serde(default)]
    pub mirror: bool,
}

impl ScmState {
    pub fn new(case: KernelCase, dim: usize, a: Family, b: Option<Family>) -> Result<Self> {
        let s = ScmState {
            case,
            time: 0.0,
            dim,
            a,
            b,
            mirror: false,
        };
        s.validate_shapes()?;
        Ok(s)
    }

    pub fn hermitian(case: KernelCase, dim: usize, a: Family) -> Result<Self> {
        let mut s = Self::new(case, dim, a, None)?;
        s.mirror = true;
        Ok(s)
    }

    pub fn validate_shapes(&self) -> Result<()> {
        for fam in std::iter::once(&self.a).chain(self.b.iter()) {
            for k in &fam.kets {
                if k.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: k.dim() });
                }
            }
            for f in &fam.bras {
                if f.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: f.dim() });
                }
            }
        }
        if self.mirror && self.b.is_some() {
            return Err(Error::Precondition("mirror flag set with explicit b-family".into()));
        }
        Ok(())
    }

    /// The second family, explicit or mirrored.
    pub fn second(&self) -> Option<Family> {
        if self.mirror {
            Some(self.a.hermitian_mirror())
        } else {
            self.b.clone()
        }
    }

    pub fn constraint_drift(&self) -> f64 {
        let mut d = self.a.normalization_defect();
        if let Some(b) = &self.b {
            d = d.max(b.normalization_defect());
        }
        d
    }

    /// Smallest pole separation within each family, with the indices.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for fam in std::iter::once(&self.a).chain(self.b.iter()) {
            for j in 0..fam.len() {
                for k in (j + 1)..fam.len() {
                    let dist = self.case.pole_distance(fam.poles[j] - fam.poles[k]);
                    if best.map_or(true, |b| dist < b.2) {
                        best = Some((j, k, dist));
                    }
                }
            }
        }
        best
    }

    fn check_collisions(&self) -> Result<()> {
        if let Some((i, j, distance)) = self.closest_pair() {
            if distance < COLLISION_GUARD {
                return Err(Error::Collision { i, j, distance });
            }
        }
        Ok(())
    }
}

/// Time derivative of one family.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyDerivative {
    pub dpoles: Vec<C64>,
    pub dvels: Vec<C64>,
    pub dkets: Vec<KetVec>,
    pub dbras: Vec<BraVec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScmDerivative {
    pub a: FamilyDerivative,
    pub b: Option<FamilyDerivative>,
}

/// Right-hand side of the second-order sCM equations for every family.
pub fn scm_rhs(state: &ScmState) -> Result<ScmDerivative> {
    state.check_collisions()?;
    Ok(ScmDerivative {
        a: family_rhs(&state.case, &state.a)?,
        b: state.b.as_ref().map(|b| family_rhs(&state.case, b)).transpose()?,
    })
}

/// ä_j, ė_j and ḟ_j for one family.
pub fn family_rhs(case: &KernelCase, fam: &Family) -> Result<FamilyDerivative> {
    let n = fam.len();
    let mut dvels = vec![C64::default(); n];
    let (dkets, dbras) = spin_rhs(case, fam, Some(&mut dvels))?;
    Ok(FamilyDerivative {
        dpoles: fam.vels.clone(),
        dvels,
        dkets,
        dbras,
    })
}

/// ė_j = 2i Σ_k e_k⟨f_k|e_j⟩V, ḟ_j = −2i Σ_k ⟨f_j|e_k⟩⟨f_k|V, and optionally the
/// accelerations ä_j = −4 Σ_k ⟨f_j|e_k⟩⟨f_k|e_j⟩V′.
pub(crate) fn spin_rhs(
    case: &KernelCase,
    fam: &Family,
    mut acc: Option<&mut Vec<C64>>,
) -> Result<(Vec<KetVec>, Vec<BraVec>)> {
    let n = fam.len();
    let d = fam.kets.first().map_or(0, |k| k.dim());
    let mut dk = vec![KetVec::zeros(d); n];
    let mut db = vec![BraVec::from_row(vec![C64::default(); d]); n];
    for j in 0..n {
        for k in 0..n {
            if k == j {
                continue;
            }
            let z = fam.poles[j] - fam.poles[k];
            let v = case.v_pot(z)?;
            let fkej = pair(&fam.bras[k], &fam.kets[j]);
            let fjek = pair(&fam.bras[j], &fam.kets[k]);
            let ce = I2 * fkej * v;
            let cf = -I2 * fjek * v;
            for mu in 0..d {
                dk[j].data[mu] += ce * fam.kets[k].data[mu];
                db[j].row[mu] += cf * fam.bras[k].row[mu];
            }
            if let Some(acc) = acc.as_deref_mut() {
                let vp = case.v_pot_prime(z)?;
                acc[j] += -4.0 * fjek * fkej * vp;
            }
        }
    }
    Ok((dk, db))
}

/// Right-hand sides of the two Bäcklund equations: the bra
/// 2iΣ_{k≠j}⟨f_j|e_k⟩⟨f_k|α(a_j−a_k) − 2iΣ_k⟨f_j|g_k⟩⟨h_k|α(a_j−b_k+s) for each
/// a-particle and the ket −2iΣ_{k≠j}|g_k⟩⟨h_k|g_j⟩α(b_j−b_k) +
/// 2iΣ_k|e_k⟩⟨f_k|g_j⟩α(b_j−a_k+s) for each b-particle. The shift s is 0 for
/// the plain transformation and iδ for the non-chiral ILW variant.
pub fn backlund_rhs(
    case: &KernelCase,
    a: &Family,
    b: &Family,
    shift: C64,
) -> Result<(Vec<BraVec>, Vec<KetVec>)> {
    let n = a.len();
    let m = b.len();
    let d = a.kets.first().or(b.kets.first()).map_or(0, |k| k.dim());
    let mut ra = vec![BraVec::from_row(vec![C64::default(); d]); n];
    let mut rb = vec![KetVec::zeros(d); m];
    for j in 0..n {
        for k in 0..n {
            if k == j {
                continue;
            }
            let c = I2 * pair(&a.bras[j], &a.kets[k]) * case.alpha(a.poles[j] - a.poles[k])?;
            for mu in 0..d {
                ra[j].row[mu] += c * a.bras[k].row[mu];
            }
        }
        for k in 0..m {
            let c = -I2 * pair(&a.bras[j], &b.kets[k]) * case.alpha(a.poles[j] - b.poles[k] + shift)?;
            for mu in 0..d {
                ra[j].row[mu] += c * b.bras[k].row[mu];
            }
        }
    }
    for j in 0..m {
        for k in 0..m {
            if k == j {
                continue;
            }
            let c = -I2 * pair(&b.bras[k], &b.kets[j]) * case.alpha(b.poles[j] - b.poles[k])?;
            for mu in 0..d {
                rb[j].data[mu] += c * b.kets[k].data[mu];
            }
        }
        for k in 0..n {
            let c = I2 * pair(&a.bras[k], &b.kets[j]) * case.alpha(b.poles[j] - a.poles[k] + shift)?;
            for mu in 0..d {
                rb[j].data[mu] += c * a.kets[k].data[mu];
            }
        }
    }
    Ok((ra, rb))
}

/// Per-particle norms of the Bäcklund defects.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BacklundResidual {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl BacklundResidual {
    pub fn max(&self) -> f64 {
        self.a.iter().chain(&self.b).copied().fold(0.0, f64::max)
    }
}

/// |ȧ_j⟨f_j| − RHS| and |ḃ_j|g_j⟩ − RHS| for every particle. Uses the mirror
/// family when the state is hermitian-reduced.
pub fn backlund_residual(state: &ScmState, shift: C64) -> Result<BacklundResidual> {
    let b = state
        .second()
        .ok_or_else(|| Error::Precondition("Bäcklund residual needs a second family".into()))?;
    family_backlund_residual(&state.case, &state.a, &b, shift)
}

pub fn family_backlund_residual(
    case: &KernelCase,
    a: &Family,
    b: &Family,
    shift: C64,
) -> Result<BacklundResidual> {
    let (ra, rb) = backlund_rhs(case, a, b, shift)?;
    let res_a = (0..a.len())
        .map(|j| {
            a.bras[j]
                .row
                .iter()
                .zip(&ra[j].row)
                .map(|(f, r)| (a.vels[j] * f - r).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let res_b = (0..b.len())
        .map(|j| {
            b.kets[j]
                .data
                .iter()
                .zip(&rb[j].data)
                .map(|(g, r)| (b.vels[j] * g - r).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(BacklundResidual { a: res_a, b: res_b })
}

// Flattening used by the integrator: per family poles, velocities, kets, bras.
pub(crate) fn pack_family(fam: &Family, with_vels: bool, out: &mut Vec<C64>) {
    out.extend_from_slice(&fam.poles);
    if with_vels {
        out.extend_from_slice(&fam.vels);
    }
    for k in &fam.kets {
        out.extend_from_slice(&k.data);
    }
    for f in &fam.bras {
        out.extend_from_slice(&f.row);
    }
}

pub(crate) fn unpack_family(y: &[C64], n: usize, d: usize, with_vels: bool, offset: &mut usize) -> Family {
    let mut take = |len: usize| {
        let s = &y[*offset..*offset + len];
        *offset += len;
        s.to_vec()
    };
    let poles = take(n);
    let vels = if with_vels { take(n) } else { vec![C64::default(); n] };
    let kets = (0..n).map(|_| KetVec::new(take(d))).collect();
    let bras = (0..n).map(|_| BraVec::from_row(take(d))).collect();
    Family { poles, vels, kets, bras }
}

pub(crate) fn pack_state(state: &ScmState) -> Vec<C64> {
    let mut y = Vec::new();
    pack_family(&state.a, true, &mut y);
    if let Some(b) = &state.b {
        pack_family(b, true, &mut y);
    }
    y
}

pub(crate) fn unpack_state(template: &ScmState, t: f64, y: &[C64]) -> ScmState {
    let d = template.dim;
    let mut off = 0;
    let a = unpack_family(y, template.a.len(), d, true, &mut off);
    let b = template
        .b
        .as_ref()
        .map(|b| unpack_family(y, b.len(), d, true, &mut off));
    ScmState {
        case: template.case,
        time: t,
        dim: d,
        a,
        b,
        mirror: template.mirror,
    }
}

pub(crate) fn pack_derivative(der: &ScmDerivative, out: &mut [C64]) {
    let mut off = 0;
    let mut put = |s: &[C64]| {
        out[off..off + s.len()].copy_from_slice(s);
        off += s.len();
    };
    for fd in std::iter::once(&der.a).chain(der.b.iter()) {
        put(&fd.dpoles);
        put(&fd.dvels);
        for k in &fd.dkets {
            put(&k.data);
        }
        for f in &fd.dbras {
            put(&f.row);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn single_particle_has_no_forces() {
        let fam = Family::new(
            vec![C64::new(0.3, -1.0)],
            vec![r(1.0)],
            vec![KetVec::new(vec![r(1.0), r(0.0)])],
            vec![BraVec::from_row(vec![r(1.0), r(0.5)])],
        )
        .unwrap();
        let s = ScmState::new(KernelCase::rational(), 2, fam, None).unwrap();
        let der = scm_rhs(&s).unwrap();
        assert_eq!(der.a.dvels[0], C64::default());
        assert!(der.a.dkets[0].norm() == 0.0 && der.a.dbras[0].norm() == 0.0);
    }

    #[test]
    fn two_particle_acceleration_sign() {
        let fam = Family::new(
            vec![r(0.0), r(1.0)],
            vec![r(0.0), r(0.0)],
            vec![KetVec::new(vec![r(1.0)]), KetVec::new(vec![r(1.0)])],
            vec![BraVec::from_row(vec![r(1.0)]), BraVec::from_row(vec![r(1.0)])],
        )
        .unwrap();
        let s = ScmState::new(KernelCase::rational(), 1, fam, None).unwrap();
        let der = scm_rhs(&s).unwrap();
        // ä_1 = −4 V′(−1) = −8, ä_2 = −4 V′(1) = 8
        assert!((der.a.dvels[0] - r(-8.0)).norm() < 1e-14);
        assert!((der.a.dvels[1] - r(8.0)).norm() < 1e-14);
    }

    #[test]
    fn collision_is_reported() {
        let fam = Family::new(
            vec![r(0.0), r(1e-11)],
            vec![r(0.0); 2],
            vec![KetVec::new(vec![r(1.0)]); 2],
            vec![BraVec::from_row(vec![r(1.0)]); 2],
        )
        .unwrap();
        let s = ScmState::new(KernelCase::rational(), 1, fam, None).unwrap();
        assert!(matches!(scm_rhs(&s), Err(Error::Collision { .. })));
    }
}
