//! The 2×2 hermitian sBO equation as a charge density u coupled to a spin
//! density m, and the half-wave maps limit.

use serde::{Deserialize, Serialize};

use super::{interior_range, sbo_residual, FieldEvaluator, Mode};
use crate::kernel::KernelKind;
use crate::soliton::{Equation, SolitonData};
use crate::spin::{pauli, pauli_compose, SpinMatrix};
use crate::transforms::{fft, hilbert, Domain, GridField};
use crate::{Error, Result, C64};

/// Samples of an R³-valued field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub domain: Domain,
    pub values: Vec<[f64; 3]>,
}

impl VectorField {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    fn from_components(domain: Domain, c: [Vec<f64>; 3]) -> VectorField {
        let values = (0..c[0].len()).map(|i| [c[0][i], c[1][i], c[2][i]]).collect();
        VectorField { domain, values }
    }

    /// Largest | |m| − 1 |.
    pub fn unit_defect(&self) -> f64 {
        self.values.iter().map(|v| (norm(v) - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn deriv(domain: &Domain, f: &[f64]) -> Vec<f64> {
    let c: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft::derivative(&c, domain.length()).iter().map(|z| z.re).collect()
}

fn hilbert_real(domain: &Domain, f: &[f64]) -> Result<Vec<f64>> {
    let g = GridField {
        domain: *domain,
        dim: 1,
        values: f.iter().map(|&x| SpinMatrix::scalar(1, C64::new(x, 0.0))).collect(),
    };
    Ok(hilbert(&g)?.values.iter().map(|m| m.get(0, 0).re).collect())
}

/// u, m and their time derivatives on a grid, with U = (u/2)(I + m·σ).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChargeSpinField {
    pub domain: Domain,
    pub u: Vec<f64>,
    pub m: Vec<[f64; 3]>,
    pub u_t: Vec<f64>,
    pub m_t: Vec<[f64; 3]>,
}

/// Relative size below which |u| counts as vanishing.
const CHARGE_FLOOR: f64 = 1e-8;

impl ChargeSpinField {
    /// Decomposes a hermitian 2×2 field and its time derivative:
    /// u = tr U, m = tr(σU)/u, u_t = tr U_t, m_t = (tr(σU_t) − m u_t)/u.
    pub fn from_matrix(u: &GridField, u_t: &GridField) -> Result<ChargeSpinField> {
        u.check_same_grid(u_t)?;
        if u.dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: u.dim });
        }
        let scale = u.max_abs().max(1e-300);
        let s = pauli();
        let mut out = ChargeSpinField {
            domain: u.domain,
            u: vec![],
            m: vec![],
            u_t: vec![],
            m_t: vec![],
        };
        for (a, at) in u.values.iter().zip(&u_t.values) {
            let q = a.trace().re;
            if q.abs() < CHARGE_FLOOR * scale {
                return Err(Error::ChargeDegenerate { trace: q });
            }
            let qt = at.trace().re;
            let mut m = [0.0; 3];
            let mut mt = [0.0; 3];
            for k in 0..3 {
                m[k] = (&s[k] * a).trace().re / q;
                mt[k] = ((&s[k] * at).trace().re - m[k] * qt) / q;
            }
            out.u.push(q);
            out.m.push(m);
            out.u_t.push(qt);
            out.m_t.push(mt);
        }
        Ok(out)
    }

    /// U = (u/2)(I + m·σ) and U_t = (u_t I + (u_t m + u m_t)·σ)/2.
    pub fn compose(&self) -> (GridField, GridField) {
        let s = pauli();
        let u: Vec<SpinMatrix> = self.u.iter().zip(&self.m).map(|(&q, m)| pauli_compose(q, *m)).collect();
        let ut: Vec<SpinMatrix> = (0..self.u.len())
            .map(|i| {
                let mut a = SpinMatrix::scalar(2, C64::new(0.5 * self.u_t[i], 0.0));
                for k in 0..3 {
                    let c = 0.5 * (self.u_t[i] * self.m[i][k] + self.u[i] * self.m_t[i][k]);
                    a.add_scaled(&s[k], C64::new(c, 0.0));
                }
                a
            })
            .collect();
        (
            GridField { domain: self.domain, dim: 2, values: u },
            GridField { domain: self.domain, dim: 2, values: ut },
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChargeSpinResidual {
    pub xs: Vec<f64>,
    pub charge: Vec<f64>,
    pub spin: Vec<[f64; 3]>,
    pub sup_charge: f64,
    pub sup_spin: f64,
}

impl ChargeSpinResidual {
    pub fn max(&self) -> f64 {
        self.sup_charge.max(self.sup_spin)
    }
}

/// Residuals of the charge/spin system
///
/// ```text
/// u_t + (1 + m²) u u_x + (m·m_x) u² + H u_xx = 0
/// m_t + u_x m (1 − m²) + u [m_x − m (m·m_x)]
///     + (1/u)[H(u m)_xx − m H u_xx] − m ∧ H(u m)_x = 0
/// ```
///
/// with spectral x-derivatives and H from the transforms module.
pub fn charge_spin_residual(f: &ChargeSpinField) -> Result<ChargeSpinResidual> {
    let dom = f.domain;
    let n = f.u.len();
    let scale = f.u.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if let Some(q) = f.u.iter().find(|q| q.abs() < CHARGE_FLOOR * scale.max(1e-300)) {
        return Err(Error::ChargeDegenerate { trace: *q });
    }
    let ux = deriv(&dom, &f.u);
    let uxx = deriv(&dom, &ux);
    let h_uxx = hilbert_real(&dom, &uxx)?;
    let mut mx = [vec![], vec![], vec![]];
    let mut h_um_x = [vec![], vec![], vec![]];
    let mut h_um_xx = [vec![], vec![], vec![]];
    for k in 0..3 {
        let mk: Vec<f64> = f.m.iter().map(|v| v[k]).collect();
        mx[k] = deriv(&dom, &mk);
        let um: Vec<f64> = f.u.iter().zip(&mk).map(|(a, b)| a * b).collect();
        let um_x = deriv(&dom, &um);
        let um_xx = deriv(&dom, &um_x);
        h_um_x[k] = hilbert_real(&dom, &um_x)?;
        h_um_xx[k] = hilbert_real(&dom, &um_xx)?;
    }
    let nodes = dom.nodes(n);
    let mut out = ChargeSpinResidual {
        xs: vec![],
        charge: vec![],
        spin: vec![],
        sup_charge: 0.0,
        sup_spin: 0.0,
    };
    for i in interior_range(&dom, n) {
        let q = f.u[i];
        let m = f.m[i];
        let m_x = [mx[0][i], mx[1][i], mx[2][i]];
        let m2 = dot(&m, &m);
        let mmx = dot(&m, &m_x);
        let rc = f.u_t[i] + (1.0 + m2) * q * ux[i] + mmx * q * q + h_uxx[i];
        let w = cross(&m, &[h_um_x[0][i], h_um_x[1][i], h_um_x[2][i]]);
        let mut rs = [0.0; 3];
        for k in 0..3 {
            rs[k] = f.m_t[i][k] + ux[i] * m[k] * (1.0 - m2) + q * (m_x[k] - m[k] * mmx)
                + (h_um_xx[k][i] - m[k] * h_uxx[i]) / q
                - w[k];
        }
        out.xs.push(nodes[i]);
        out.sup_charge = out.sup_charge.max(rc.abs());
        out.sup_spin = out.sup_spin.max(norm(&rs));
        out.charge.push(rc);
        out.spin.push(rs);
    }
    Ok(out)
}

/// Largest difference between the charge/spin residuals and those predicted
/// by decomposing the sBO residual R of the composed matrix field:
/// tr R for the charge line and (tr(σR) − m tr R)/u for the spin line.
pub fn charge_spin_consistency(f: &ChargeSpinField) -> Result<f64> {
    let direct = charge_spin_residual(f)?;
    let (u, ut) = f.compose();
    let n = u.n();
    let ev = FieldEvaluator::from_grid(u, Some(ut))?;
    let r = sbo_residual(&ev, f.domain, n, Mode::Sampled)?;
    let s = pauli();
    let offset = interior_range(&f.domain, n).start;
    let mut worst: f64 = 0.0;
    for (j, rm) in r.values.iter().enumerate() {
        let i = offset + j;
        let ri = rm.trace().re;
        worst = worst.max((ri - direct.charge[j]).abs());
        for k in 0..3 {
            let pred = ((&s[k] * rm).trace().re - f.m[i][k] * ri) / f.u[i];
            worst = worst.max((pred - direct.spin[j][k]).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorResidual {
    pub xs: Vec<f64>,
    pub values: Vec<[f64; 3]>,
    pub sup: f64,
}

/// Residual of the half-wave maps equation m_t = m ∧ H m_x for a unit
/// field (|m| = 1 to 1e-8). A missing m_t is taken as zero.
pub fn hwm_residual(m: &VectorField, m_t: Option<&VectorField>) -> Result<VectorResidual> {
    let defect = m.unit_defect();
    if defect > 1e-8 {
        return Err(Error::ConstraintViolation(format!("|m| ≠ 1 (defect {defect:.2e})")));
    }
    if let Some(mt) = m_t {
        if mt.domain != m.domain || mt.n() != m.n() {
            return Err(Error::GridMismatch("m and m_t on different grids".into()));
        }
    }
    let rhs = hwm_rhs(m)?;
    let dom = m.domain;
    let nodes = dom.nodes(m.n());
    let mut out = VectorResidual {
        xs: vec![],
        values: vec![],
        sup: 0.0,
    };
    for i in interior_range(&dom, m.n()) {
        let mt = m_t.map_or([0.0; 3], |f| f.values[i]);
        let r = [mt[0] - rhs[i][0], mt[1] - rhs[i][1], mt[2] - rhs[i][2]];
        out.sup = out.sup.max(norm(&r));
        out.xs.push(nodes[i]);
        out.values.push(r);
    }
    Ok(out)
}

/// m ∧ H m_x.
fn hwm_rhs(m: &VectorField) -> Result<Vec<[f64; 3]>> {
    let dom = m.domain;
    let mut hmx = [vec![], vec![], vec![]];
    for k in 0..3 {
        hmx[k] = hilbert_real(&dom, &deriv(&dom, &m.component(k)))?;
    }
    Ok(m.values
        .iter()
        .enumerate()
        .map(|(i, v)| cross(v, &[hmx[0][i], hmx[1][i], hmx[2][i]]))
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HwmProbe {
    pub lambdas: Vec<f64>,
    /// sup-norm of the scaled sBO residual
    /// U_t + ½{U,U_x} + (1/2λ)HU_xx + (i/2)[U,HU_x] for a unit test field
    /// moving by the HWM flow.
    pub residual: Vec<f64>,
    /// HWM residual of the test field (zero up to rounding by construction).
    pub hwm: f64,
}

impl HwmProbe {
    /// λ·residual for each λ; constant when the non-HWM part scales ∝ 1/λ.
    pub fn scaled(&self) -> Vec<f64> {
        self.lambdas.iter().zip(&self.residual).map(|(l, r)| l * r).collect()
    }

    pub fn inverse_scaling_ok(&self) -> bool {
        self.residual.windows(2).zip(self.lambdas.windows(2)).all(|(r, l)| {
            let got = r[0] / r[1];
            let want = l[1] / l[0];
            got > 0.5 * want && got < 2.0 * want
        })
    }
}

/// Builds a unit spin field from a 2×2 hermitian soliton at t = 0,
/// m = normalize(e₃ + ε w) where w is the traceless Pauli part of U and
/// ε = 0.5/sup|w|, lets it move by the HWM flow (m_t = m ∧ Hm_x) and reports
/// the residual of the λ-scaled sBO equation for U = m·σ at each λ.
pub fn hwm_limit_probe(data: &SolitonData, lambdas: &[f64], n: usize) -> Result<HwmProbe> {
    if data.dim != 2 || !data.hermitian || data.equation != Equation::Sbo {
        return Err(Error::Precondition("probe needs 2×2 hermitian sBO data".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Precondition("λ must be positive".into()));
    }
    let domain = match data.case.kind {
        KernelKind::Trigonometric => Domain::Periodic {
            period: data.case.period().expect("period"),
        },
        KernelKind::Rational => Domain::LineTruncated { half_width: 200.0 },
        KernelKind::Hyperbolic => return Err(Error::Precondition("probe needs case I or II".into())),
    };
    let field = data.field_at(0.0)?;
    let s = pauli();
    let w: Vec<[f64; 3]> = domain
        .nodes(n)
        .iter()
        .map(|&x| {
            let u = field.u(x)?;
            Ok([
                0.5 * (&s[0] * &u).trace().re,
                0.5 * (&s[1] * &u).trace().re,
                0.5 * (&s[2] * &u).trace().re,
            ])
        })
        .collect::<Result<_>>()?;
    let wmax = w.iter().map(norm).fold(0.0, f64::max);
    let eps = if wmax > 0.0 { 0.5 / wmax } else { 0.0 };
    let m = VectorField {
        domain,
        values: w
            .iter()
            .map(|v| {
                let p = [eps * v[0], eps * v[1], 1.0 + eps * v[2]];
                let r = norm(&p);
                [p[0] / r, p[1] / r, p[2] / r]
            })
            .collect(),
    };
    let mt = VectorField::from_components(domain, {
        let rhs = hwm_rhs(&m)?;
        [
            rhs.iter().map(|v| v[0]).collect(),
            rhs.iter().map(|v| v[1]).collect(),
            rhs.iter().map(|v| v[2]).collect(),
        ]
    });
    let hwm = hwm_residual(&m, Some(&mt))?.sup;

    let to_matrix = |vals: &[[f64; 3]]| -> GridField {
        let values = vals
            .iter()
            .map(|v| {
                let mut a = SpinMatrix::zeros(2);
                for k in 0..3 {
                    a.add_scaled(&s[k], C64::new(v[k], 0.0));
                }
                a
            })
            .collect();
        GridField { domain, dim: 2, values }
    };
    let u = to_matrix(&m.values);
    let ut = to_matrix(&mt.values);
    let ux = u.derivative();
    let uxx = ux.derivative();
    let hux = hilbert(&ux)?;
    let huxx = hilbert(&uxx)?;
    let i = C64::new(0.0, 1.0);
    let mut residual = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let mut worst: f64 = 0.0;
        for j in interior_range(&domain, n) {
            let (a, b) = (&u.values[j], &ux.values[j]);
            let mut r = ut.values[j].clone();
            r += &(&(&(a * b) + &(b * a)) * 0.5);
            r += &(&huxx.values[j] * (0.5 / lam));
            r += &(&(a * &hux.values[j]) - &(&hux.values[j] * a)).scale(i * 0.5);
            worst = worst.max(r.norm());
        }
        residual.push(worst);
    }
    Ok(HwmProbe {
        lambdas: lambdas.to_vec(),
        residual,
        hwm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_charge_and_spin_have_zero_residual() {
        let dom = Domain::Periodic { period: 5.0 };
        let n = 32;
        let f = ChargeSpinField {
            domain: dom,
            u: vec![1.3; n],
            m: vec![[0.6, 0.0, 0.8]; n],
            u_t: vec![0.0; n],
            m_t: vec![[0.0; 3]; n],
        };
        let r = charge_spin_residual(&f).unwrap();
        assert!(r.max() < 1e-13);
    }

    #[test]
    fn vanishing_charge_is_rejected() {
        let dom = Domain::Periodic { period: 5.0 };
        let mut f = ChargeSpinField {
            domain: dom,
            u: vec![1.0; 16],
            m: vec![[0.0, 0.0, 1.0]; 16],
            u_t: vec![0.0; 16],
            m_t: vec![[0.0; 3]; 16],
        };
        f.u[3] = 0.0;
        assert!(matches!(charge_spin_residual(&f), Err(Error::ChargeDegenerate { .. })));
    }

    #[test]
    fn constant_unit_spin_solves_hwm() {
        let dom = Domain::Periodic { period: 4.0 };
        let m = VectorField {
            domain: dom,
            values: vec![[0.0, 0.6, 0.8]; 32],
        };
        assert!(hwm_residual(&m, None).unwrap().sup < 1e-14);
    }
}
