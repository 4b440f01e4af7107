use serde::{Deserialize, Serialize};

use super::{backlund_rhs, family_backlund_residual, family_rhs, spin_rhs, Family, ScmState};
use crate::kernel::KernelCase;
use crate::ode::{self, OdeOptions};
use crate::spin::pair;
use crate::{Error, Result, C64};

/// Outcome of evolving a Bäcklund pair by the first-order flow and comparing
/// the resulting accelerations with the second-order equations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropCertificate {
    pub times: Vec<f64>,
    /// Full vector Bäcklund residual at each sample.
    pub backlund: Vec<f64>,
    /// max_j |ä_j(finite difference) − ä_j(sCM)| over both families, per
    /// sample, divided by max(1, max_j |ä_j|).
    pub acceleration: Vec<f64>,
    /// max_j |ä_j| per sample.
    pub acceleration_scale: Vec<f64>,
    pub constraint_drift: Vec<f64>,
    pub initial_backlund: f64,
    pub initial_constraint: f64,
    pub tol: f64,
    /// Set when the initial data already violates the constraints.
    pub rejected_at_t0: bool,
}

impl PropCertificate {
    pub fn max_backlund(&self) -> f64 {
        self.backlund.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_acceleration(&self) -> f64 {
        self.acceleration.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        !self.rejected_at_t0 && self.max_backlund() < self.tol && self.max_acceleration() < self.tol
    }
}

struct Layout {
    n: usize,
    m: usize,
    d: usize,
}

impl Layout {
    fn len(&self) -> usize {
        (self.n + self.m) * (1 + 2 * self.d)
    }

    fn pack(&self, a: &Family, b: &Family) -> Vec<C64> {
        let mut y = Vec::with_capacity(self.len());
        super::pack_family(a, false, &mut y);
        super::pack_family(b, false, &mut y);
        y
    }

    fn unpack(&self, y: &[C64]) -> (Family, Family) {
        let mut off = 0;
        let a = super::unpack_family(y, self.n, self.d, false, &mut off);
        let b = super::unpack_family(y, self.m, self.d, false, &mut off);
        (a, b)
    }
}

/// Velocities implied by the Bäcklund equations: ȧ_j = BTa_j|e_j⟩ and
/// ḃ_j = ⟨h_j|BTb_j, relying on ⟨f_j|e_j⟩ = ⟨h_j|g_j⟩ = 1.
fn backlund_velocities(case: &KernelCase, a: &mut Family, b: &mut Family, shift: C64) -> Result<()> {
    let (ra, rb) = backlund_rhs(case, a, b, shift)?;
    for j in 0..a.len() {
        a.vels[j] = pair(&ra[j], &a.kets[j]);
    }
    for j in 0..b.len() {
        b.vels[j] = pair(&b.bras[j], &rb[j]);
    }
    Ok(())
}

fn first_order_rhs(case: &KernelCase, lay: &Layout, y: &[C64], dy: &mut [C64], shift: C64) -> Result<(Family, Family)> {
    let (mut a, mut b) = lay.unpack(y);
    backlund_velocities(case, &mut a, &mut b, shift)?;
    let (dka, dba) = spin_rhs(case, &a, None)?;
    let (dkb, dbb) = spin_rhs(case, &b, None)?;
    let da = Family {
        poles: a.vels.clone(),
        vels: vec![],
        kets: dka,
        bras: dba,
    };
    let db = Family {
        poles: b.vels.clone(),
        vels: vec![],
        kets: dkb,
        bras: dbb,
    };
    let packed = lay.pack(&da, &db);
    dy.copy_from_slice(&packed);
    Ok((a, b))
}

fn velocity_vector(case: &KernelCase, lay: &Layout, y: &[C64], shift: C64) -> Result<Vec<C64>> {
    let (mut a, mut b) = lay.unpack(y);
    backlund_velocities(case, &mut a, &mut b, shift)?;
    Ok(a.vels.into_iter().chain(b.vels).collect())
}

/// Derivative of the velocity map along `dir`. The map is holomorphic in the
/// packed state, so the derivative is the Cauchy integral over a circle of
/// the given radius, evaluated by the trapezoidal rule. This converges
/// geometrically and divides rounding noise by the radius rather than by a
/// small finite-difference step.
fn directional_derivative(
    case: &KernelCase,
    lay: &Layout,
    y: &[C64],
    dir: &[C64],
    radius: f64,
    shift: C64,
) -> Result<Vec<C64>> {
    const POINTS: usize = 16;
    let mut acc: Vec<C64> = vec![];
    for k in 0..POINTS {
        let w = C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / POINTS as f64);
        let yk: Vec<C64> = y.iter().zip(dir).map(|(yi, di)| yi + di * w).collect();
        let v = velocity_vector(case, lay, &yk, shift)?;
        if acc.is_empty() {
            acc = vec![C64::default(); v.len()];
        }
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += vi / w;
        }
    }
    Ok(acc.into_iter().map(|a| a / POINTS as f64).collect())
}

/// Numerical certificate that the first-order Bäcklund flow implies the
/// second-order sCM equations for both families.
///
/// Spins follow the sCM spin equations, poles follow the velocities paired
/// out of the Bäcklund equations. At each of `n_samples` times the full
/// vector Bäcklund residual is recorded, and the acceleration is obtained by
/// differentiating the velocity map along the flow (a contour integral in
/// state space) and compared with the sCM force.
///
/// A hermitian-reduced state is certified with its mirror family made
/// explicit.
pub fn certify_proposition_bt(
    state: &ScmState,
    t_end: f64,
    tol: f64,
    shift: C64,
    n_samples: usize,
) -> Result<PropCertificate> {
    let case = state.case;
    let b0 = state
        .second()
        .ok_or_else(|| Error::Precondition("certificate needs a second family".into()))?;
    let lay = Layout {
        n: state.a.len(),
        m: b0.len(),
        d: state.dim,
    };
    let mut a0 = state.a.clone();
    let mut b0 = b0;
    a0.vels.resize(lay.n, C64::default());
    b0.vels.resize(lay.m, C64::default());

    let initial_constraint = a0.normalization_defect().max(b0.normalization_defect());
    backlund_velocities(&case, &mut a0, &mut b0, shift)?;
    let initial_backlund = family_backlund_residual(&case, &a0, &b0, shift)?.max();
    let n_samples = n_samples.max(2);
    let times: Vec<f64> = (0..n_samples)
        .map(|k| state.time + (t_end - state.time) * k as f64 / (n_samples - 1) as f64)
        .collect();
    let mut cert = PropCertificate {
        times: times.clone(),
        backlund: vec![],
        acceleration: vec![],
        acceleration_scale: vec![],
        constraint_drift: vec![],
        initial_backlund,
        initial_constraint,
        tol,
        rejected_at_t0: initial_constraint > tol || initial_backlund > tol,
    };
    if cert.rejected_at_t0 {
        return Ok(cert);
    }

    let y0 = lay.pack(&a0, &b0);
    let opts = OdeOptions::tol(1e-12, 1e-14);
    let sol = ode::integrate(
        |_t, y, dy| first_order_rhs(&case, &lay, y, dy, shift).map(|_| ()),
        state.time,
        &y0,
        t_end,
        &times,
        &opts,
        |_, _| Ok(false),
    )?;

    let mut dy = vec![C64::default(); lay.len()];
    for (_, y) in &sol.samples {
        let (a, b) = first_order_rhs(&case, &lay, y, &mut dy, shift)?;
        cert.backlund.push(family_backlund_residual(&case, &a, &b, shift)?.max());
        cert.constraint_drift
            .push(a.normalization_defect().max(b.normalization_defect()));

        let scale = dy.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let radius = 1e-2 / scale;
        let fd = directional_derivative(&case, &lay, y, &dy, radius, shift)?;

        let acc_a = family_rhs(&case, &a)?.dvels;
        let acc_b = family_rhs(&case, &b)?.dvels;
        let dev = acc_a
            .iter()
            .chain(&acc_b)
            .zip(&fd)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let size = acc_a.iter().chain(&acc_b).map(|z| z.norm()).fold(0.0, f64::max);
        cert.acceleration.push(dev / size.max(1.0));
        cert.acceleration_scale.push(size);
    }
    Ok(cert)
}

/// Transports a Bäcklund pair by `dt` along the first-order flow in a single
/// explicit step, so that centred differences are free of step-control
/// noise. Velocities of the result are filled in from the constraints.
pub fn backlund_flow_step(case: &KernelCase, a: &Family, b: &Family, shift: C64, dt: f64) -> Result<(Family, Family)> {
    let lay = Layout {
        n: a.len(),
        m: b.len(),
        d: a.kets.first().or(b.kets.first()).map_or(0, |k| k.dim()),
    };
    let y0 = lay.pack(a, b);
    let (mut a1, mut b1) = if dt == 0.0 {
        (a.clone(), b.clone())
    } else {
        let opts = OdeOptions {
            rtol: 1e-6,
            atol: 1e-8,
            h_init: Some(dt.abs()),
            ..OdeOptions::default()
        };
        let sol = ode::integrate(
            |_t, y, dy| first_order_rhs(case, &lay, y, dy, shift).map(|_| ()),
            0.0,
            &y0,
            dt,
            &[],
            &opts,
            |_, _| Ok(false),
        )?;
        lay.unpack(&sol.y_final)
    };
    a1.vels.resize(a1.len(), C64::default());
    b1.vels.resize(b1.len(), C64::default());
    backlund_velocities(case, &mut a1, &mut b1, shift)?;
    Ok((a1, b1))
}
