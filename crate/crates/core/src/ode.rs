//! Dormand–Prince 5(4) with PI step control and the continuous extension of
//! Hairer–Nørsett–Wanner, on complex state vectors.

use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Relative step floor; steps below `h_min * max(1, |t|)` abort.
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    /// (t, y) at every requested sample time, in request order.
    pub samples: Vec<(f64, Vec<C64>)>,
    pub t_final: f64,
    pub y_final: Vec<C64>,
    pub stats: OdeStats,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates y′ = f(t, y) from `t0` to `t_end` (either direction), recording
/// the dense-output solution at `sample_times` (which must lie between `t0`
/// and `t_end`, in the direction of integration).
///
/// `after_step` runs on each accepted step with the new state; it may modify
/// the state (returning `true` in that case) or abort with an error.
pub fn integrate<F, G>(
    mut rhs: F,
    t0: f64,
    y0: &[C64],
    t_end: f64,
    sample_times: &[f64],
    opts: &OdeOptions,
    mut after_step: G,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    G: FnMut(f64, &mut [C64]) -> Result<bool>,
{
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    for &s in sample_times {
        if (s - t0) * dir < -1e-14 * (1.0 + t0.abs()) || (t_end - s) * dir < -1e-14 * (1.0 + t_end.abs()) {
            return Err(Error::Precondition(format!(
                "sample time {s} outside [{t0}, {t_end}]"
            )));
        }
    }
    let mut order: Vec<usize> = (0..sample_times.len()).collect();
    order.sort_by(|&a, &b| {
        (dir * sample_times[a])
            .partial_cmp(&(dir * sample_times[b]))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut samples: Vec<Option<Vec<C64>>> = vec![None; sample_times.len()];
    let mut next_sample = 0;

    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![C64::default(); n];
    rhs(t, &y, &mut k1)?;
    stats.evaluations += 1;

    while next_sample < order.len() && (sample_times[order[next_sample]] - t0).abs() <= 1e-14 * (1.0 + t0.abs()) {
        samples[order[next_sample]] = Some(y.clone());
        next_sample += 1;
    }

    let span = (t_end - t0).abs();
    if span == 0.0 {
        return finish(samples, sample_times, t, y, stats);
    }

    let mut h = match opts.h_init {
        Some(h) => h.abs(),
        None => initial_step(&mut rhs, t, &y, &k1, dir, opts, &mut stats)?,
    }
    .min(span)
    .min(opts.h_max);

    let mut k2 = vec![C64::default(); n];
    let mut k3 = vec![C64::default(); n];
    let mut k4 = vec![C64::default(); n];
    let mut k5 = vec![C64::default(); n];
    let mut k6 = vec![C64::default(); n];
    let mut k7 = vec![C64::default(); n];
    let mut ytmp = vec![C64::default(); n];
    let mut ynew = vec![C64::default(); n];
    let mut err_old: f64 = 1e-4;
    let beta = 0.04;
    let expo1 = 0.2 - 0.75 * beta;
    let safe = 0.9;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Precondition(format!(
                "step budget of {} exhausted at t={t}",
                opts.max_steps
            )));
        }
        let remaining = (t_end - t) * dir;
        if remaining <= 1e-15 * (1.0 + t_end.abs()) {
            break;
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < opts.h_min * t.abs().max(1.0) {
            return Err(Error::StepUnderflow {
                t,
                h,
                i: 0,
                j: 0,
                distance: f64::NAN,
            });
        }
        let hs = h * dir;

        for i in 0..n {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &ytmp, &mut k6)?;
        for i in 0..n {
            ynew[i] = y[i]
                + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + hs, &ynew, &mut k7)?;
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            // dense output coefficients
            let t_new = t + hs;
            while next_sample < order.len() {
                let ts = sample_times[order[next_sample]];
                if (ts - t_new) * dir > 1e-14 * (1.0 + t_new.abs()) && !last {
                    break;
                }
                let theta = ((ts - t) / hs).clamp(0.0, 1.0);
                let th1 = 1.0 - theta;
                let mut ys = vec![C64::default(); n];
                for i in 0..n {
                    let r2 = ynew[i] - y[i];
                    let r3 = hs * k1[i] - r2;
                    let r4 = r2 - hs * k7[i] - r3;
                    let r5 = hs
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    ys[i] = y[i] + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
                }
                samples[order[next_sample]] = Some(ys);
                next_sample += 1;
            }
            stats.accepted += 1;
            t = if last { t_end } else { t_new };
            std::mem::swap(&mut y, &mut ynew);
            if after_step(t, &mut y)? {
                rhs(t, &y, &mut k1)?;
                stats.evaluations += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            if last {
                break;
            }
            let mut fac = fac11 / err_old.powf(beta);
            fac = (fac / safe).clamp(1.0 / 10.0, 1.0 / 0.2);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_old = err.max(1e-4);
            last_rejected = false;
            h = h_new.min(opts.h_max);
        } else {
            stats.rejected += 1;
            h /= (fac11 / safe).min(1.0 / 0.2);
            last_rejected = true;
        }
    }
    finish(samples, sample_times, t, y, stats)
}

fn finish(
    samples: Vec<Option<Vec<C64>>>,
    sample_times: &[f64],
    t: f64,
    y: Vec<C64>,
    stats: OdeStats,
) -> Result<OdeSolution> {
    let samples = samples
        .into_iter()
        .zip(sample_times)
        .map(|(s, &ts)| s.map(|v| (ts, v)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Precondition("sample time not reached".into()))?;
    Ok(OdeSolution {
        samples,
        t_final: t,
        y_final: y,
        stats,
    })
}

fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[C64],
    f0: &[C64],
    dir: f64,
    opts: &OdeOptions,
    stats: &mut OdeStats,
) -> Result<f64>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len().max(1) as f64;
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let dnf = (f0.iter().zip(&sc).map(|(f, s)| (f.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let dny = (y.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(opts.h_max);
    let y1: Vec<C64> = y.iter().zip(f0).map(|(v, f)| v + h * dir * f).collect();
    let mut f1 = vec![C64::default(); y.len()];
    rhs(t + h * dir, &y1, &mut f1)?;
    stats.evaluations += 1;
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b).norm() / s).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(opts.h_max))
}
