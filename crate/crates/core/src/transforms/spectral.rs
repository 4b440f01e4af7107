use std::f64::consts::PI;

use super::{fft, Domain, GridField, Operator};
use crate::{Error, Result, C64};

/// coth x − 1/x
fn coth_minus_inv(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x * (1.0 / 3.0 - x2 * (1.0 / 45.0 - x2 * 2.0 / 945.0))
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// 1/sinh x − 1/x
fn csch_minus_inv(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x * (-1.0 / 6.0 + x2 * (7.0 / 360.0 - x2 * 31.0 / 15120.0))
    } else if x.abs() > 700.0 {
        -1.0 / x
    } else {
        1.0 / x.sinh() - 1.0 / x
    }
}

/// Fourier multiplier of the operator on the line, as a function of the
/// angular wavenumber. Singular at k = 0 for T and T̃.
pub fn multiplier(op: Operator, k: f64) -> C64 {
    match op {
        Operator::Hilbert => C64::new(0.0, k.signum() * (k != 0.0) as u8 as f64),
        Operator::T { delta } => C64::new(0.0, 1.0 / (k * delta).tanh()),
        Operator::TTilde { delta } => C64::new(0.0, 1.0 / (k * delta).sinh()),
    }
}

/// Multiplier of the kernel with its (1/2δ) sgn s tail removed, which is
/// smooth through k = 0.
fn remainder_multiplier(op: Operator, k: f64) -> C64 {
    match op {
        Operator::T { delta } => C64::new(0.0, coth_minus_inv(k * delta)),
        Operator::TTilde { delta } => C64::new(0.0, csch_minus_inv(k * delta)),
        Operator::Hilbert => unreachable!(),
    }
}

fn zero_pad(f: &[C64], factor: usize) -> Vec<C64> {
    let mut out = vec![C64::default(); f.len() * factor];
    out[..f.len()].copy_from_slice(f);
    out
}

/// ∫_{x₀}^{x_i} f at the grid nodes, for samples that vanish at both ends.
fn cumulative(f: &[C64], len: f64) -> Vec<C64> {
    let n = f.len();
    let mean = f.iter().sum::<C64>() / n as f64;
    let g = fft::apply_multiplier(f, len, |k, nyq| {
        if k == 0.0 || nyq {
            C64::default()
        } else {
            C64::new(0.0, -1.0 / k)
        }
    });
    let h = len / n as f64;
    (0..n).map(|i| mean * (i as f64 * h) + g[i] - g[0]).collect()
}

fn line_hilbert(f: &[C64], len: f64) -> Vec<C64> {
    let n = f.len();
    let h = len / n as f64;
    let pad = 2;
    let lp = len * pad as f64;
    let padded = zero_pad(f, pad);
    let per = fft::apply_multiplier(&padded, lp, |k, nyq| {
        if nyq {
            C64::default()
        } else {
            multiplier(Operator::Hilbert, k)
        }
    });
    // Line kernel minus the periodic one, smooth for |s| < lp/2:
    // c(s) = 1/(π s) − (1/lp) cot(π s/lp).
    let c = |s: f64| {
        if s == 0.0 {
            0.0
        } else {
            1.0 / (PI * s) - (PI * s / lp).tan().recip() / lp
        }
    };
    // correction_i = h Σ_j c(x_j − x_i) f_j as a circular convolution of
    // length 2n with c(−m h) stored at index m.
    let m = pad * n;
    let mut ker: Vec<C64> = (0..m)
        .map(|idx| {
            let off = if idx < n { idx as f64 } else { idx as f64 - m as f64 };
            C64::new(c(-off * h), 0.0)
        })
        .collect();
    let mut fp = padded;
    fft::fft(&mut ker);
    fft::fft(&mut fp);
    for (a, b) in fp.iter_mut().zip(&ker) {
        *a *= b;
    }
    fft::ifft(&mut fp);
    (0..n).map(|i| per[i] + fp[i] * h).collect()
}

fn line_t(op: Operator, f: &[C64], len: f64, delta: f64) -> Vec<C64> {
    let n = f.len();
    // (1/2δ) sgn s part: (1/2δ)(M₀ − 2F(x)).
    let cum = cumulative(f, len);
    let h = len / n as f64;
    let total = f.iter().sum::<C64>() * h;
    let pad = 2 + (8.0 * delta / len).ceil() as usize;
    let lp = len * pad as f64;
    let rem = fft::apply_multiplier(&zero_pad(f, pad), lp, |k, nyq| {
        if nyq {
            C64::default()
        } else {
            remainder_multiplier(op, k)
        }
    });
    (0..n)
        .map(|i| (total - cum[i] * 2.0) / (2.0 * delta) + rem[i])
        .collect()
}

/// Spectral fast path. On the circle only H is available. On the line, H
/// combines the periodic multiplier on a zero-padded grid with a smooth
/// kernel correction; T and T̃ split off the (1/2δ) sgn s tail of their
/// kernels (evaluated through a spectral antiderivative) and apply the
/// smooth remainder multiplier on a zero-padded grid.
pub fn spectral(op: Operator, field: &GridField) -> Result<GridField> {
    let len = field.domain.length();
    let arrays = field.entry_arrays();
    let out: Vec<Vec<C64>> = match (field.domain, op) {
        (Domain::Periodic { .. }, Operator::Hilbert) => arrays
            .iter()
            .map(|f| {
                fft::apply_multiplier(f, len, |k, nyq| {
                    if nyq {
                        C64::default()
                    } else {
                        multiplier(Operator::Hilbert, k)
                    }
                })
            })
            .collect(),
        (Domain::Periodic { .. }, _) => {
            return Err(Error::Precondition("T and T̃ act on the line".into()));
        }
        (Domain::LineTruncated { .. }, Operator::Hilbert) => arrays.iter().map(|f| line_hilbert(f, len)).collect(),
        (Domain::LineTruncated { .. }, Operator::T { delta } | Operator::TTilde { delta }) => {
            arrays.iter().map(|f| line_t(op, f, len, delta)).collect()
        }
    };
    Ok(GridField::from_entry_arrays(field.domain, field.dim, &out))
}
