//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued complex
//! integrands, on finite intervals and on [a, ∞).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result, C64};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64, m: usize, buf: &mut [C64]) -> Panel
where
    F: FnMut(f64, &mut [C64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![C64::default(); m];
    let mut g = vec![C64::default(); m];
    f(c, buf);
    for i in 0..m {
        k[i] += buf[i] * WGK[7];
        g[i] += buf[i] * WG[3];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        f(c - dx, buf);
        for i in 0..m {
            k[i] += buf[i] * WGK[j];
            if j % 2 == 1 {
                g[i] += buf[i] * WG[j / 2];
            }
        }
        f(c + dx, buf);
        for i in 0..m {
            k[i] += buf[i] * WGK[j];
            if j % 2 == 1 {
                g[i] += buf[i] * WG[j / 2];
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..m {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).norm());
    }
    Panel { a, b, value: k, err }
}

/// ∫_a^b f with `f(x, out)` filling `m` components. Returns the integral and
/// an error estimate.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, m: usize, opts: &QuadOptions) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &mut [C64]),
{
    let mut buf = vec![C64::default(); m];
    let mut heap = BinaryHeap::new();
    heap.push(gk15(&mut f, a, b, m, &mut buf));
    loop {
        let mut total = vec![C64::default(); m];
        let mut err = 0.0;
        for p in heap.iter() {
            for i in 0..m {
                total[i] += p.value[i];
            }
            err += p.err;
        }
        let scale = total.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err <= opts.abs_tol.max(opts.rel_tol * scale) {
            return Ok((total, err));
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} after {} panels",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature("interval too small to bisect".into()));
        }
        heap.push(gk15(&mut f, worst.a, mid, m, &mut buf));
        heap.push(gk15(&mut f, mid, worst.b, m, &mut buf));
    }
}

pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<(C64, f64)>
where
    F: FnMut(f64) -> C64,
{
    let (v, e) = integrate_vec(|x, out| out[0] = f(x), a, b, 1, opts)?;
    Ok((v[0], e))
}

/// ∫_a^∞ f through x = a + t/(1 − t).
pub fn integrate_vec_to_infinity<F>(mut f: F, a: f64, m: usize, opts: &QuadOptions) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &mut [C64]),
{
    integrate_vec(
        |t, out| {
            let s = 1.0 - t;
            let x = a + t / s;
            f(x, out);
            let jac = 1.0 / (s * s);
            for o in out.iter_mut() {
                *o *= jac;
            }
        },
        0.0,
        1.0,
        m,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x| C64::new(x.powi(5), x), 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((v - C64::new(64.0 / 6.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn lorentzian_tail() {
        let (v, _) = integrate_vec_to_infinity(
            |x, o| o[0] = C64::new(1.0 / (1.0 + x * x), 0.0),
            0.0,
            1,
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((v[0].re - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }
}
