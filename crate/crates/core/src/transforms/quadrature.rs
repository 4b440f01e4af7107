use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::{fft, Domain, GridField, Operator};
use crate::quad::{self, QuadOptions};
use crate::spin::SpinMatrix;
use crate::{Error, Result, C64};

/// Punctured trapezoid rule Σ_{j≠i} h K(x_j − x_i) f_j plus the term
/// c h f′(x_i) that restores spectral accuracy for a c/s singularity. The
/// derivative is taken spectrally from the samples. On a periodic grid the
/// Hilbert kernel is the cotangent kernel and differences wrap around.
pub fn grid_quadrature(op: Operator, field: &GridField) -> Result<GridField> {
    let n = field.n();
    let h = field.spacing();
    let periodic = field.domain.is_periodic();
    if periodic && op != Operator::Hilbert {
        return Err(Error::Precondition("only H has a periodic version".into()));
    }
    // Kernel table indexed by j − i + n − 1.
    let table: Vec<f64> = (0..2 * n - 1)
        .map(|m| {
            let off = m as isize - (n as isize - 1);
            if off == 0 {
                return 0.0;
            }
            match field.domain {
                Domain::Periodic { period } => {
                    let s = off as f64 * h;
                    (PI * s / period).tan().recip() / period
                }
                Domain::LineTruncated { .. } => op.kernel(off as f64 * h),
            }
        })
        .collect();
    let c = op.singular_coefficient();
    let len = field.domain.length();
    let arrays = field.entry_arrays();
    let out: Vec<Vec<C64>> = arrays
        .iter()
        .map(|f| {
            let df = fft::derivative(f, len);
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let base = n - 1 - i;
                    let mut acc = C64::default();
                    for (j, fj) in f.iter().enumerate() {
                        acc += fj * table[base + j];
                    }
                    acc * h + df[i] * (c * h)
                })
                .collect()
        })
        .collect();
    Ok(GridField::from_entry_arrays(field.domain, field.dim, &out))
}

/// Evaluates (K f)(x) for a matrix-valued function by adaptive quadrature of
/// ∫₀^∞ K(s)(f(x + s) − f(x − s)) ds (∫₀^{L/2} with the cotangent kernel on a
/// circle of length L). Independent of any grid; used as the oracle for
/// fields known in closed form.
pub fn apply_fn<F>(op: Operator, period: Option<f64>, f: F, x: f64, dim: usize, opts: &QuadOptions) -> Result<SpinMatrix>
where
    F: Fn(f64) -> Result<SpinMatrix>,
{
    let m = dim * dim;
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64, out: &mut [C64]| {
        let k = match period {
            Some(l) => (PI * s / l).tan().recip() / l,
            None => op.kernel(s),
        };
        match (f(x + s), f(x - s)) {
            (Ok(p), Ok(q)) => {
                for i in 0..m {
                    out[i] = (p.data[i] - q.data[i]) * k;
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                err.borrow_mut().get_or_insert(e);
                out.iter_mut().for_each(|o| *o = C64::default());
            }
        }
    };
    let total = match period {
        Some(l) => {
            let (v, _) = quad::integrate_vec(integrand, 0.0, 0.5 * l, m, opts)?;
            v
        }
        None => {
            let scale = match op {
                Operator::Hilbert => 1.0,
                Operator::T { delta } | Operator::TTilde { delta } => delta.min(1.0),
            };
            let mut integrand = integrand;
            let mut total = vec![C64::default(); m];
            let cuts = [0.0, scale, 10.0 * scale];
            for w in cuts.windows(2) {
                let (v, _) = quad::integrate_vec(&mut integrand, w[0], w[1], m, opts)?;
                for i in 0..m {
                    total[i] += v[i];
                }
            }
            let (v, _) = quad::integrate_vec_to_infinity(&mut integrand, cuts[2], m, opts)?;
            for i in 0..m {
                total[i] += v[i];
            }
            total
        }
    };
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(SpinMatrix { dim, data: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_oracle_lorentzian() {
        let f = |x: f64| Ok(SpinMatrix::scalar(1, C64::new(1.0 / (1.0 + x * x), 0.0)));
        for x in [-3.0, 0.0, 0.5, 7.0] {
            let h = apply_fn(Operator::Hilbert, None, f, x, 1, &QuadOptions::default()).unwrap();
            assert!((h.get(0, 0).re + x / (1.0 + x * x)).abs() < 1e-10);
        }
    }
}
