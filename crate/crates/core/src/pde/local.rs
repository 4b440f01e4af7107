//! Local equations reached from sILW as δ ↓ 0: matrix KdV and the
//! generalised Heisenberg ferromagnet, with probes of the two scalings.

use serde::{Deserialize, Serialize};

use super::{interior_range, restrict, FieldEvaluator, Residual};
use crate::spin::{pauli, SpinMatrix};
use crate::transforms::{apply, Domain, GridField, Method, Operator};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

fn grid_source(ev: &FieldEvaluator, domain: Domain, n: usize) -> Result<(GridField, GridField)> {
    match ev {
        FieldEvaluator::Grid(_) => ev.sample(domain, n),
        FieldEvaluator::Soliton(_) => Err(Error::Precondition(
            "local residuals need third derivatives; sample the field onto a grid first".into(),
        )),
    }
}

/// Residual of the matrix KdV equation U_t + {U,U_x} + U_xxx = 0 with
/// spectral x-derivatives.
pub fn matrix_kdv_residual(ev: &FieldEvaluator, domain: Domain, n: usize) -> Result<Residual> {
    let (u, ut) = grid_source(ev, domain, n)?;
    let ux = u.derivative();
    let uxxx = ux.derivative().derivative();
    let values: Vec<SpinMatrix> = (0..n)
        .map(|i| {
            let (a, b) = (&u.values[i], &ux.values[i]);
            let mut r = ut.values[i].clone();
            r += &(&(a * b) + &(b * a));
            r += &uxxx.values[i];
            r
        })
        .collect();
    Ok(Residual::new(restrict(&domain, &u.nodes()), restrict(&domain, &values)))
}

/// Largest ‖U² − I‖ over the grid.
fn involution_defect(u: &GridField) -> f64 {
    let id = SpinMatrix::identity(u.dim);
    u.values.iter().map(|m| (&(m * m) - &id).norm()).fold(0.0, f64::max)
}

/// Residual of U_t + i[U, U_xx] = 0; the field must satisfy U² = I to 1e-8.
pub fn hf_residual(ev: &FieldEvaluator, domain: Domain, n: usize) -> Result<Residual> {
    let (u, ut) = grid_source(ev, domain, n)?;
    let defect = involution_defect(&u);
    if defect > 1e-8 {
        return Err(Error::ConstraintViolation(format!("U² ≠ I (defect {defect:.2e})")));
    }
    let uxx = u.derivative().derivative();
    let values: Vec<SpinMatrix> = (0..n)
        .map(|i| {
            let (a, b) = (&u.values[i], &uxx.values[i]);
            let mut r = ut.values[i].clone();
            r += &(&(a * b) - &(b * a)).scale(I);
            r
        })
        .collect();
    Ok(Residual::new(restrict(&domain, &u.nodes()), restrict(&domain, &values)))
}

/// Diagonal matrix of scalar KdV travelling waves
/// u_k = (3c_k/2) sech²(√c_k/2 (x − x_k − c_k t)), which solve
/// u_t + 2uu_x + u_xxx = 0, together with their exact time derivative.
pub fn kdv_traveling_wave(domain: Domain, n: usize, speeds: &[f64], offsets: &[f64], t: f64) -> Result<(GridField, GridField)> {
    if speeds.len() != offsets.len() || speeds.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: speeds.len(),
            got: offsets.len(),
        });
    }
    if speeds.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::Precondition("wave speeds must be positive".into()));
    }
    let d = speeds.len();
    let wave = |x: f64, k: usize| -> (f64, f64) {
        let c = speeds[k];
        let kappa = 0.5 * c.sqrt();
        let xi = kappa * (x - offsets[k] - c * t);
        let s = 1.0 / xi.cosh();
        let u = 1.5 * c * s * s;
        // u_t = −c u_x
        let ux = -2.0 * kappa * u * xi.tanh();
        (u, -c * ux)
    };
    let mut u = Vec::with_capacity(n);
    let mut ut = Vec::with_capacity(n);
    for x in domain.nodes(n) {
        let mut a = SpinMatrix::zeros(d);
        let mut b = SpinMatrix::zeros(d);
        for k in 0..d {
            let (v, vt) = wave(x, k);
            a.set(k, k, C64::new(v, 0.0));
            b.set(k, k, C64::new(vt, 0.0));
        }
        u.push(a);
        ut.push(b);
    }
    Ok((GridField::new(domain, d, u)?, GridField::new(domain, d, ut)?))
}

fn gaussian(x: f64) -> (f64, f64, f64) {
    let g = (-x * x).exp();
    (g, -2.0 * x * g, (4.0 * x * x - 2.0) * g)
}

/// sup |T f_x + f/δ − (δ/3) f_xx| for the unit Gaussian f = exp(−x²), with T
/// applied spectrally on [−W, W). The expansion predicts O(δ³).
pub fn texpand_remainder(delta: f64, n: usize, half_width: f64) -> Result<f64> {
    let dom = Domain::LineTruncated { half_width };
    let fx = GridField::from_scalar(dom, n, |x| C64::new(gaussian(x).1, 0.0));
    let tfx = apply(Operator::T { delta }, &fx, Method::Spectral)?;
    let nodes = dom.nodes(n);
    let mut worst: f64 = 0.0;
    for i in interior_range(&dom, n) {
        let (f, _, fxx) = gaussian(nodes[i]);
        let r = tfx.values[i].get(0, 0) + f / delta - delta / 3.0 * fxx;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitBranch {
    /// U → (δ/3)U(x, δt/3): sILW tends to matrix KdV.
    Kdv,
    /// U → U(x, t/3)/δ: sILW tends to the HF equation under U² = I.
    HeisenbergFerromagnet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalLimitProbe {
    pub deltas: Vec<f64>,
    pub texpand: Vec<f64>,
    pub kdv_deviation: Vec<f64>,
    pub hf_deviation: Vec<f64>,
    pub n: usize,
    pub half_width: f64,
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[0] / w[1]).collect()
}

impl LocalLimitProbe {
    /// Successive ratios of the Texpand remainder (≈ (δ_k/δ_{k+1})³).
    pub fn texpand_ratios(&self) -> Vec<f64> {
        ratios(&self.texpand)
    }

    pub fn kdv_ratios(&self) -> Vec<f64> {
        ratios(&self.kdv_deviation)
    }

    pub fn hf_ratios(&self) -> Vec<f64> {
        ratios(&self.hf_deviation)
    }

    /// Deviations scale ∝ δ: each successive ratio lies within a factor 2 of
    /// δ_k/δ_{k+1}.
    pub fn linear_scaling_ok(&self) -> bool {
        let expected = ratios(&self.deltas);
        [self.kdv_ratios(), self.hf_ratios()].iter().all(|rs| {
            rs.iter()
                .zip(&expected)
                .all(|(r, e)| *r > 0.5 * e && *r < 2.0 * e)
        })
    }
}

/// Hermitian test field for the KdV branch: a non-commuting combination of
/// Gaussians, so that the O(δ) correction (δ/3) i[U, U_xx] does not vanish.
fn kdv_test_field(dom: Domain, n: usize) -> GridField {
    let s = pauli();
    let values = dom
        .nodes(n)
        .into_iter()
        .map(|x| {
            let g1 = (-(x - 0.3) * (x - 0.3)).exp();
            let g2 = 0.7 * (-0.5 * (x + 0.4) * (x + 0.4)).exp();
            let g0 = 0.5 * (-0.8 * x * x).exp();
            let mut m = SpinMatrix::scalar(2, C64::new(g0, 0.0));
            m.add_scaled(&s[2], C64::new(g1, 0.0));
            m.add_scaled(&s[0], C64::new(g2, 0.0));
            m
        })
        .collect();
    GridField { domain: dom, dim: 2, values }
}

/// U = m·σ with m = (sin θ cos φ, sin θ sin φ, cos θ), θ = (π/2)(1 + tanh x)
/// and φ = sech x / 2. U² = I, U(±∞) = ∓σ₃, and U_x decays. Returns U and
/// the exact U_x.
fn hf_test_field(dom: Domain, n: usize) -> (GridField, GridField) {
    let s = pauli();
    let mut u = Vec::with_capacity(n);
    let mut ux = Vec::with_capacity(n);
    for x in dom.nodes(n) {
        let sech = 1.0 / x.cosh();
        let th = 0.5 * std::f64::consts::PI * (1.0 + x.tanh());
        let th_x = 0.5 * std::f64::consts::PI * sech * sech;
        let ph = 0.5 * sech;
        let ph_x = -0.5 * sech * x.tanh();
        let (st, ct, sp, cp) = (th.sin(), th.cos(), ph.sin(), ph.cos());
        let m = [st * cp, st * sp, ct];
        let m_th = [ct * cp, ct * sp, -st];
        let m_ph = [-st * sp, st * cp, 0.0];
        let mut a = SpinMatrix::zeros(2);
        let mut b = SpinMatrix::zeros(2);
        for k in 0..3 {
            a.add_scaled(&s[k], C64::new(m[k], 0.0));
            b.add_scaled(&s[k], C64::new(th_x * m_th[k] + ph_x * m_ph[k], 0.0));
        }
        u.push(a);
        ux.push(b);
    }
    (
        GridField { domain: dom, dim: 2, values: u },
        GridField { domain: dom, dim: 2, values: ux },
    )
}

fn anti(a: &SpinMatrix, b: &SpinMatrix) -> SpinMatrix {
    &(a * b) + &(b * a)
}

fn comm(a: &SpinMatrix, b: &SpinMatrix) -> SpinMatrix {
    &(a * b) - &(b * a)
}

/// Deviation of the scaled sILW equation from its local limit for a fixed
/// test field (the U_t terms cancel). T is applied spectrally, which keeps
/// the 1/δ² cancellations exact per Fourier mode.
fn branch_deviation(branch: LimitBranch, delta: f64, n: usize, half_width: f64) -> Result<f64> {
    let dom = Domain::LineTruncated { half_width };
    let t = Operator::T { delta };
    let (u, ux) = match branch {
        LimitBranch::Kdv => {
            let u = kdv_test_field(dom, n);
            let ux = u.derivative();
            (u, ux)
        }
        LimitBranch::HeisenbergFerromagnet => hf_test_field(dom, n),
    };
    let uxx = ux.derivative();
    let uxxx = uxx.derivative();
    let tux = apply(t, &ux, Method::Spectral)?;
    let tuxx = apply(t, &uxx, Method::Spectral)?;
    let mut worst: f64 = 0.0;
    for i in interior_range(&dom, n) {
        let (a, a1) = (&u.values[i], &ux.values[i]);
        let dev = match branch {
            LimitBranch::Kdv => {
                // {U,U_x} + 3U_x/δ² + (3/δ)TU_xx + i[U,TU_x] − ({U,U_x} + U_xxx)
                let mut scaled = anti(a, a1);
                scaled += &(a1 * (3.0 / (delta * delta)));
                scaled += &(&tuxx.values[i] * (3.0 / delta));
                scaled += &comm(a, &tux.values[i]).scale(I);
                let mut limit = anti(a, a1);
                limit += &uxxx.values[i];
                &scaled - &limit
            }
            LimitBranch::HeisenbergFerromagnet => {
                // (3/δ){U,U_x} + (3/δ)U_x + 3TU_xx + (3/δ)i[U,TU_x] − i[U,U_xx]
                let mut scaled = &anti(a, a1) * (3.0 / delta);
                scaled += &(a1 * (3.0 / delta));
                scaled += &(&tuxx.values[i] * 3.0);
                scaled += &comm(a, &tux.values[i]).scale(C64::new(0.0, 3.0 / delta));
                let limit = comm(a, &uxx.values[i]).scale(I);
                &scaled - &limit
            }
        };
        worst = worst.max(dev.norm());
    }
    Ok(worst)
}

/// Texpand remainder and the deviations of both scaled sILW equations from
/// their limits across a list of δ values.
pub fn local_limit_probe(deltas: &[f64], n: usize, half_width: f64) -> Result<LocalLimitProbe> {
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    let mut probe = LocalLimitProbe {
        deltas: deltas.to_vec(),
        texpand: vec![],
        kdv_deviation: vec![],
        hf_deviation: vec![],
        n,
        half_width,
    };
    for &d in deltas {
        probe.texpand.push(texpand_remainder(d, n, half_width)?);
        probe.kdv_deviation.push(branch_deviation(LimitBranch::Kdv, d, n, half_width)?);
        probe
            .hf_deviation
            .push(branch_deviation(LimitBranch::HeisenbergFerromagnet, d, n, half_width)?);
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::grid_quadrature;

    #[test]
    fn kdv_wave_solves_scalar_kdv() {
        let dom = Domain::LineTruncated { half_width: 30.0 };
        let (u, ut) = kdv_traveling_wave(dom, 1024, &[1.0], &[0.0], 0.2).unwrap();
        let ev = FieldEvaluator::from_grid(u, Some(ut)).unwrap();
        let r = matrix_kdv_residual(&ev, dom, 1024).unwrap();
        assert!(r.sup < 1e-8, "{:e}", r.sup);
    }

    #[test]
    fn hf_field_is_an_involution() {
        let (u, _) = hf_test_field(Domain::LineTruncated { half_width: 20.0 }, 256);
        assert!(involution_defect(&u) < 1e-14);
    }

    // Spectral Texpand path against direct grid quadrature of the coth kernel.
    #[test]
    fn texpand_spectral_matches_quadrature() {
        let delta = 0.05;
        let dom = Domain::LineTruncated { half_width: 8.0 };
        let n = 4096;
        let fx = GridField::from_scalar(dom, n, |x| C64::new(gaussian(x).1, 0.0));
        let a = apply(Operator::T { delta }, &fx, Method::Spectral).unwrap();
        let b = grid_quadrature(Operator::T { delta }, &fx).unwrap();
        let diff = a.sub(&b).unwrap().sup_norm(0.1);
        assert!(diff < 1e-9, "{diff:e}");
    }
}
