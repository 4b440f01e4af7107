//! Integrating-factor RK4 for the periodic sBO equation, and Hamiltonians.

use serde::{Deserialize, Serialize};

use crate::spin::SpinMatrix;
use crate::transforms::{apply, fft, hilbert, Domain, GridField, Method, Operator};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Times at which the field is stored (t_end is always stored).
    pub snapshot_times: Vec<f64>,
    /// 2/3-rule dealiasing of the quadratic terms.
    pub dealias: bool,
    /// Largest admissible fraction of spectral energy in the top third of
    /// the resolved band.
    pub tail_limit: f64,
    /// Invariants are recorded every this many steps.
    pub monitor_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            t_end: 0.1,
            dt: 1e-4,
            snapshot_times: vec![],
            dealias: true,
            tail_limit: 1e-6,
            monitor_every: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: GridField,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InvariantSample {
    pub t: f64,
    /// ∫ tr U dx (real part)
    pub trace: f64,
    /// ∫ tr U² dx (real part)
    pub trace_sq: f64,
    pub hamiltonian: f64,
    pub hamiltonian_imag: f64,
    /// max ‖U − U†‖ over the grid
    pub hermiticity: f64,
    /// Spectral tail fraction.
    pub tail: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub domain: Domain,
    pub n: usize,
    pub dim: usize,
    pub dt: f64,
    pub dealias: bool,
    pub steps: usize,
    pub hermitian_initial: bool,
    pub snapshots: Vec<Snapshot>,
    pub invariants: Vec<InvariantSample>,
}

impl EvolutionRun {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("run has a final snapshot")
    }

    /// max_t |Q(t) − Q(0)| / max(|Q(0)|, floor) for Q = ∫tr U, ∫tr U², H.
    pub fn relative_drifts(&self) -> [f64; 3] {
        let first = self.invariants[0];
        let rel = |f: fn(&InvariantSample) -> f64| {
            let q0 = f(&first);
            let scale = q0.abs().max(1e-12);
            self.invariants.iter().map(|s| (f(s) - q0).abs() / scale).fold(0.0, f64::max)
        };
        [rel(|s| s.trace), rel(|s| s.trace_sq), rel(|s| s.hamiltonian)]
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.invariants.iter().map(|s| s.hermiticity).fold(0.0, f64::max)
    }
}

struct Spectral {
    n: usize,
    d: usize,
    k: Vec<f64>,
    mask: Vec<f64>,
    tail_band: Vec<bool>,
}

impl Spectral {
    fn new(n: usize, d: usize, len: f64, dealias: bool) -> Spectral {
        let k = fft::wavenumbers(n, len);
        let cutoff = if dealias { n as f64 / 3.0 } else { n as f64 / 2.0 };
        let index = |i: usize| if i <= n / 2 { i as f64 } else { n as f64 - i as f64 };
        let nyq = |i: usize| n % 2 == 0 && i == n / 2;
        let mask = (0..n)
            .map(|i| if index(i) < cutoff && !nyq(i) { 1.0 } else { 0.0 })
            .collect();
        let tail_band = (0..n).map(|i| index(i) >= 2.0 * cutoff / 3.0).collect();
        Spectral {
            n,
            d,
            k,
            mask,
            tail_band,
        }
    }

    fn to_physical(&self, hat: &[Vec<C64>], mult: impl Fn(f64) -> C64) -> Vec<SpinMatrix> {
        let arrays: Vec<Vec<C64>> = hat
            .iter()
            .map(|h| {
                let mut b: Vec<C64> = h.iter().zip(&self.k).map(|(z, &k)| z * mult(k)).collect();
                fft::ifft(&mut b);
                b
            })
            .collect();
        (0..self.n)
            .map(|i| SpinMatrix {
                dim: self.d,
                data: arrays.iter().map(|a| a[i]).collect(),
            })
            .collect()
    }

    fn to_spectral(&self, vals: &[SpinMatrix]) -> Vec<Vec<C64>> {
        (0..self.d * self.d)
            .map(|e| {
                let mut b: Vec<C64> = vals.iter().map(|m| m.data[e]).collect();
                fft::fft(&mut b);
                b
            })
            .collect()
    }

    /// Fourier transform of −{U,U_x} − i[U, HU_x], masked.
    fn nonlinear(&self, hat: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let u = self.to_physical(hat, |_| C64::new(1.0, 0.0));
        let ux = self.to_physical(hat, |k| C64::new(0.0, k));
        // H∂ₓ has multiplier (i sgn k)(ik) = −|k|
        let hux = self.to_physical(hat, |k| C64::new(-k.abs(), 0.0));
        let out: Vec<SpinMatrix> = (0..self.n)
            .map(|i| {
                let (a, b, c) = (&u[i], &ux[i], &hux[i]);
                let mut r = &(a * b) + &(b * a);
                r += &(&(a * c) - &(c * a)).scale(I);
                r.scale(C64::new(-1.0, 0.0))
            })
            .collect();
        let mut spec = self.to_spectral(&out);
        for s in spec.iter_mut() {
            for (z, m) in s.iter_mut().zip(&self.mask) {
                *z *= m;
            }
        }
        spec
    }

    fn tail_fraction(&self, hat: &[Vec<C64>]) -> f64 {
        let mut total = 0.0;
        let mut tail = 0.0;
        for h in hat {
            for (z, &t) in h.iter().zip(&self.tail_band) {
                let e = z.norm_sqr();
                total += e;
                if t {
                    tail += e;
                }
            }
        }
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }
}

fn axpy(y: &[Vec<C64>], x: &[Vec<C64>], c: f64) -> Vec<Vec<C64>> {
    y.iter()
        .zip(x)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q * c).collect())
        .collect()
}

fn scale_by(x: &[Vec<C64>], e: &[C64]) -> Vec<Vec<C64>> {
    x.iter().map(|a| a.iter().zip(e).map(|(p, q)| p * q).collect()).collect()
}

/// Evolves U_t = −{U,U_x} − HU_xx − i[U,HU_x] on a periodic grid.
///
/// In Fourier space the linear part −H∂ₓₓ is the multiplier i sgn(k) k²,
/// integrated exactly; the nonlinear terms are stepped with classical RK4 in
/// the interaction picture. The field is stored at the requested times and
/// ∫tr U, ∫tr U² and H_sBO are recorded every `monitor_every` steps.
pub fn evolve_periodic_sbo(initial: &GridField, opts: &EvolveOptions) -> Result<EvolutionRun> {
    let Domain::Periodic { period } = initial.domain else {
        return Err(Error::Precondition("the evolver needs a periodic grid".into()));
    };
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) {
        return Err(Error::Precondition("dt must be positive and t_end non-negative".into()));
    }
    let n = initial.n();
    let d = initial.dim;
    let sp = Spectral::new(n, d, period, opts.dealias);
    let hermitian_initial = initial.values.iter().all(|m| m.is_hermitian(1e-12));
    let lin: Vec<C64> = sp.k.iter().map(|&k| C64::new(0.0, k.signum() * k * k)).collect();

    let mut hat = sp.to_spectral(&initial.values);
    for s in hat.iter_mut() {
        for (z, m) in s.iter_mut().zip(&sp.mask) {
            *z *= m;
        }
    }

    let mut run = EvolutionRun {
        domain: initial.domain,
        n,
        dim: d,
        dt: opts.dt,
        dealias: opts.dealias,
        steps: 0,
        hermitian_initial,
        snapshots: vec![],
        invariants: vec![],
    };
    let field_of = |hat: &[Vec<C64>]| GridField {
        domain: initial.domain,
        dim: d,
        values: sp.to_physical(hat, |_| C64::new(1.0, 0.0)),
    };
    let monitor = |hat: &[Vec<C64>], t: f64| -> Result<InvariantSample> {
        let f = field_of(hat);
        let tail = sp.tail_fraction(hat);
        let h = hamiltonian_sbo(&f)?;
        let (trace, trace_sq) = trace_moments(&f);
        Ok(InvariantSample {
            t,
            trace,
            trace_sq,
            hamiltonian: h.value,
            hamiltonian_imag: h.imag,
            hermiticity: f.values.iter().map(|m| m.hermiticity_defect()).fold(0.0, f64::max),
            tail,
        })
    };

    let mut targets: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && t < opts.t_end)
        .collect();
    targets.push(opts.t_end);
    targets.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    targets.dedup();

    let mut t = 0.0;
    run.invariants.push(monitor(&hat, t)?);
    let mut since_monitor = 0;
    for &target in &targets {
        let remaining = target - t;
        let steps = if remaining > 0.0 {
            (remaining / opts.dt - 1e-9).ceil().max(1.0) as usize
        } else {
            0
        };
        if steps > 0 {
            let h = remaining / steps as f64;
            let e_half: Vec<C64> = lin.iter().map(|l| (l * (0.5 * h)).exp()).collect();
            let e_full: Vec<C64> = lin.iter().map(|l| (l * h).exp()).collect();
            for s in 0..steps {
                let k1 = sp.nonlinear(&hat);
                let a = scale_by(&axpy(&hat, &k1, 0.5 * h), &e_half);
                let k2 = sp.nonlinear(&a);
                let b = axpy(&scale_by(&hat, &e_half), &k2, 0.5 * h);
                let k3 = sp.nonlinear(&b);
                let c = axpy(&scale_by(&hat, &e_full), &scale_by(&k3, &e_half), h);
                let k4 = sp.nonlinear(&c);
                // E² u + h/6 (E² k1 + 2E (k2 + k3) + k4)
                let mut next = scale_by(&hat, &e_full);
                next = axpy(&next, &scale_by(&k1, &e_full), h / 6.0);
                next = axpy(&next, &scale_by(&k2, &e_half), h / 3.0);
                next = axpy(&next, &scale_by(&k3, &e_half), h / 3.0);
                next = axpy(&next, &k4, h / 6.0);
                hat = next;
                run.steps += 1;
                since_monitor += 1;
                t = if s + 1 == steps { target } else { t + h };
                if since_monitor >= opts.monitor_every.max(1) {
                    since_monitor = 0;
                    let sample = monitor(&hat, t)?;
                    if sample.tail > opts.tail_limit || !sample.trace_sq.is_finite() {
                        return Err(Error::ResolutionFailure { t, tail: sample.tail });
                    }
                    run.invariants.push(sample);
                }
            }
        }
        let sample = monitor(&hat, t)?;
        if sample.tail > opts.tail_limit || !sample.trace_sq.is_finite() {
            return Err(Error::ResolutionFailure { t, tail: sample.tail });
        }
        if run.invariants.last().map_or(true, |s| s.t != t) {
            run.invariants.push(sample);
        }
        run.snapshots.push(Snapshot { t, field: field_of(&hat) });
    }
    Ok(run)
}

/// (∫ tr U, ∫ tr U²) by the trapezoid rule.
fn trace_moments(f: &GridField) -> (f64, f64) {
    let h = f.spacing();
    let mut a = 0.0;
    let mut b = 0.0;
    for m in &f.values {
        a += m.trace().re;
        b += (m * m).trace().re;
    }
    (a * h, b * h)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub value: f64,
    /// Imaginary part of the integral; rounding-level for hermitian input.
    pub imag: f64,
}

/// H_sBO = ∫ tr(U³/3 + U HU_x/2) dx, with U_x spectral and H spectral on the
/// circle or by quadrature on the line.
pub fn hamiltonian_sbo(field: &GridField) -> Result<Hamiltonian> {
    field.warn_decay();
    let ux = field.derivative();
    let hux = hilbert(&ux)?;
    let h = field.spacing();
    let mut acc = C64::default();
    for (u, hu) in field.values.iter().zip(&hux.values) {
        let u2 = u * u;
        acc += (&u2 * u).trace() / 3.0 + (u * hu).trace() * 0.5;
    }
    acc *= h;
    if acc.im.abs() > 1e-10 * acc.re.abs().max(1.0) {
        log::debug!("H_sBO has imaginary part {:.2e}", acc.im);
    }
    Ok(Hamiltonian {
        value: acc.re,
        imag: acc.im,
    })
}

/// H_sncILW = ∫ tr(U³/3 + V³/3 + U TU_x/2 + V TV_x/2 + V T̃U_x/2 + U T̃V_x/2) dx
/// on the line, with T and T̃ by grid quadrature.
pub fn hamiltonian_sncilw(u: &GridField, v: &GridField, delta: f64) -> Result<Hamiltonian> {
    u.check_same_grid(v)?;
    if u.domain.is_periodic() {
        return Err(Error::Precondition("H_sncILW is evaluated on the line".into()));
    }
    u.warn_decay();
    v.warn_decay();
    let ux = u.derivative();
    let vx = v.derivative();
    let tux = apply(Operator::T { delta }, &ux, Method::Quadrature)?;
    let tvx = apply(Operator::T { delta }, &vx, Method::Quadrature)?;
    let sux = apply(Operator::TTilde { delta }, &ux, Method::Quadrature)?;
    let svx = apply(Operator::TTilde { delta }, &vx, Method::Quadrature)?;
    let h = u.spacing();
    let mut acc = C64::default();
    for i in 0..u.n() {
        let (a, b) = (&u.values[i], &v.values[i]);
        acc += (&(a * a) * a).trace() / 3.0 + (&(b * b) * b).trace() / 3.0;
        acc += ((a * &tux.values[i]).trace()
            + (b * &tvx.values[i]).trace()
            + (b * &sux.values[i]).trace()
            + (a * &svx.values[i]).trace())
            * 0.5;
    }
    acc *= h;
    Ok(Hamiltonian {
        value: acc.re,
        imag: acc.im,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stays_zero() {
        let dom = Domain::Periodic { period: 5.0 };
        let u = GridField::zeros(dom, 32, 2);
        let run = evolve_periodic_sbo(
            &u,
            &EvolveOptions {
                t_end: 0.01,
                dt: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(run.last().field.max_abs(), 0.0);
        assert_eq!(run.steps, 10);
    }

    #[test]
    fn constant_stays_constant() {
        let dom = Domain::Periodic { period: 5.0 };
        let c = SpinMatrix::from_real(2, &[1.0, 0.2, 0.2, -0.5]);
        let u = GridField::new(dom, 2, vec![c.clone(); 32]).unwrap();
        let run = evolve_periodic_sbo(
            &u,
            &EvolveOptions {
                t_end: 0.02,
                dt: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        for m in &run.last().field.values {
            assert!((m - &c).norm() < 1e-13);
        }
    }

    #[test]
    fn scalar_hamiltonian_matches_bo_density() {
        // u = cos x on [0, 2π): Hu_x = −|k| û → −cos x, so
        // H = ∫ cos³/3 − cos²/2 = −π/2.
        let dom = Domain::Periodic {
            period: 2.0 * std::f64::consts::PI,
        };
        let u = GridField::from_scalar(dom, 64, |x| C64::new(x.cos(), 0.0));
        let h = hamiltonian_sbo(&u).unwrap();
        assert!((h.value + 0.5 * std::f64::consts::PI).abs() < 1e-12);
    }
}
