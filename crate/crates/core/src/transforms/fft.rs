use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft(data: &mut [C64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(data.len()));
    plan.process(data);
}

/// Inverse transform including the 1/n factor.
pub(crate) fn ifft(data: &mut [C64]) {
    let n = data.len();
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    plan.process(data);
    let s = 1.0 / n as f64;
    for z in data.iter_mut() {
        *z *= s;
    }
}

/// Angular wavenumbers of an n-point grid of length `len` in FFT order. The
/// Nyquist entry is reported as +n/2.
pub(crate) fn wavenumbers(n: usize, len: f64) -> Vec<f64> {
    let dk = 2.0 * PI / len;
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            m * dk
        })
        .collect()
}

/// Applies a Fourier multiplier m(k, is_nyquist) to periodic samples.
pub(crate) fn apply_multiplier<M>(values: &[C64], len: f64, mult: M) -> Vec<C64>
where
    M: Fn(f64, bool) -> C64,
{
    let n = values.len();
    let mut buf = values.to_vec();
    fft(&mut buf);
    let ks = wavenumbers(n, len);
    for (i, z) in buf.iter_mut().enumerate() {
        *z *= mult(ks[i], n % 2 == 0 && i == n / 2);
    }
    ifft(&mut buf);
    buf
}

/// Spectral derivative of periodic samples (Nyquist mode dropped).
pub(crate) fn derivative(values: &[C64], len: f64) -> Vec<C64> {
    apply_multiplier(values, len, |k, nyq| if nyq { C64::default() } else { C64::new(0.0, k) })
}
