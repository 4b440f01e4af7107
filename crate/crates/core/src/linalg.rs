//! Thin wrappers around nalgebra's complex SVD for the small dense systems of
//! the construction.

use nalgebra::{DMatrix, DVector};

use crate::C64;

pub(crate) struct LstsqSolution {
    pub x: Vec<C64>,
    /// s_max / s_min (infinite when singular).
    pub cond: f64,
    /// Number of singular values below `rank_tol * s_max`.
    pub nullity: usize,
    /// max |A x − b|.
    pub residual: f64,
}

pub(crate) fn singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Minimum-norm least-squares solution.
pub(crate) fn lstsq(a: &DMatrix<C64>, b: &[C64], rank_tol: f64) -> LstsqSolution {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let nullity = svd
        .singular_values
        .iter()
        .filter(|&&s| s < rank_tol * smax)
        .count()
        + a.ncols().saturating_sub(a.nrows());
    let rhs = DVector::from_column_slice(b);
    let x = svd
        .solve(&rhs, rank_tol * smax)
        .map(|v| v.iter().copied().collect::<Vec<_>>())
        .unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); a.ncols()]);
    let xv = DVector::from_column_slice(&x);
    let residual = (a * &xv - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    LstsqSolution {
        x,
        cond: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        nullity,
        residual,
    }
}

/// Orthonormal basis (as columns) of the left singular vectors belonging to
/// the `k` smallest singular values.
pub(crate) fn left_null_basis(a: &DMatrix<C64>, k: usize) -> DMatrix<C64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| {
        svd.singular_values[i]
            .partial_cmp(&svd.singular_values[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let cols: Vec<_> = idx[..k.min(idx.len())].iter().map(|&i| u.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Levenberg–Marquardt on a real residual with a central-difference
/// Jacobian. Returns the final parameters and residual norm.
pub(crate) fn levenberg_marquardt<F>(mut f: F, p0: Vec<f64>, max_iter: usize, tol: f64) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut p = p0;
    let mut r = f(&p);
    let mut cost = r.iter().map(|x| x * x).sum::<f64>();
    let mut lambda = 1e-3;
    let n = p.len();
    for _ in 0..max_iter {
        if cost.sqrt() < tol {
            break;
        }
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for i in 0..n {
            let h = 1e-7 * (1.0 + p[i].abs());
            let mut pp = p.clone();
            pp[i] += h;
            let rp = f(&pp);
            pp[i] -= 2.0 * h;
            let rm = f(&pp);
            for k in 0..m {
                jac[(k, i)] = (rp[k] - rm[k]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let step = match a.lu().solve(&(-&g)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let pn: Vec<f64> = p.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            let rn = f(&pn);
            let cn = rn.iter().map(|x| x * x).sum::<f64>();
            if cn.is_finite() && cn < cost {
                p = pn;
                r = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let s = lstsq(&a, &[C64::new(2.0, 0.0)], 1e-12);
        assert!((s.x[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(s.nullity, 1);
    }

    #[test]
    fn lm_rosenbrock() {
        let (p, r) = levenberg_marquardt(|p| vec![1.0 - p[0], 10.0 * (p[1] - p[0] * p[0])], vec![-1.2, 1.0], 200, 1e-14);
        assert!(r < 1e-10);
        assert!((p[0] - 1.0).abs() < 1e-8);
    }
}
