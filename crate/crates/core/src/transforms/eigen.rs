use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply, apply_fn, Domain, GridField, Method, Operator};
use crate::kernel::{KernelCase, KernelKind};
use crate::quad::QuadOptions;
use crate::spin::SpinMatrix;
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Eigenfunction identities of the nonlocal operators.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum EigenProblem {
    /// H α′(· − a) = ±i α′(· − a): +i for Im a < 0, −i for Im a > 0.
    /// Rational case on the line, trigonometric case on the circle.
    Hilbert { case: KernelCase, sign: f64 },
    /// 𝒯 𝒜′_±(· − a) = ±i 𝒜′_±(· − a) with 𝒜_+(z) = (α(z − iδ/2), −α(z + iδ/2))
    /// for −3δ/2 < Im a < −δ/2 and 𝒜_−(z) = (α(z + iδ/2), −α(z − iδ/2)) for
    /// δ/2 < Im a < 3δ/2.
    CalT { delta: f64, upper: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Grid(Method),
    /// Adaptive quadrature on the closed-form function (no truncation).
    Function,
}

fn scalar(z: C64) -> SpinMatrix {
    SpinMatrix::scalar(1, z)
}

/// Sup-norm residual of an eigenfunction identity at the grid nodes,
/// skipping 10% of a truncated grid at each end.
pub fn eigenfunction_residual(
    problem: EigenProblem,
    a: C64,
    n: usize,
    half_width: f64,
    method: EigenMethod,
) -> Result<f64> {
    match problem {
        EigenProblem::Hilbert { case, sign } => {
            let want = if a.im < 0.0 { 1.0 } else { -1.0 };
            if a.im == 0.0 || sign != want {
                return Err(Error::Precondition(format!(
                    "eigenvalue {}i is not attained for Im a = {}",
                    sign, a.im
                )));
            }
            let (domain, period) = match case.kind {
                KernelKind::Rational => (Domain::LineTruncated { half_width }, None),
                KernelKind::Trigonometric => {
                    let l = case.period().expect("trigonometric period");
                    (Domain::Periodic { period: l }, Some(l))
                }
                KernelKind::Hyperbolic => {
                    return Err(Error::Precondition("H eigenfunctions need case I or II".into()));
                }
            };
            let f = move |x: f64| case.alpha_prime(x - a).map(scalar);
            let lambda = I * sign;
            let nodes = domain.nodes(n);
            let hf: Vec<C64> = match method {
                EigenMethod::Grid(m) => {
                    let g = GridField::from_fn(domain, n, 1, f)?;
                    apply(Operator::Hilbert, &g, m)?.entry(0, 0)
                }
                EigenMethod::Function => interior(&domain, &nodes)
                    .into_par_iter()
                    .map(|x| {
                        apply_fn(Operator::Hilbert, period, f, x, 1, &QuadOptions::default()).map(|m| m.get(0, 0))
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            let xs = match method {
                EigenMethod::Grid(_) => nodes.clone(),
                EigenMethod::Function => interior(&domain, &nodes),
            };
            let mut worst: f64 = 0.0;
            for (x, v) in xs.iter().zip(&hf) {
                if in_interior(&domain, *x) {
                    worst = worst.max((v - lambda * f(*x)?.get(0, 0)).norm());
                }
            }
            Ok(worst)
        }
        EigenProblem::CalT { delta, upper } => {
            let case = KernelCase::hyperbolic(delta)?;
            let ok = if upper {
                a.im > 0.5 * delta && a.im < 1.5 * delta
            } else {
                a.im < -0.5 * delta && a.im > -1.5 * delta
            };
            if !ok {
                return Err(Error::Precondition(format!(
                    "Im a = {} outside the {} band",
                    a.im,
                    if upper { "upper" } else { "lower" }
                )));
            }
            let h = C64::new(0.0, 0.5 * delta);
            let (s1, s2) = if upper { (-h, h) } else { (h, -h) };
            let f1 = move |x: f64| case.alpha_prime(x - a - s1).map(scalar);
            let f2 = move |x: f64| case.alpha_prime(x - a - s2).map(|z| scalar(-z));
            let lambda = if upper { -I } else { I };
            let domain = Domain::LineTruncated { half_width };
            let nodes = domain.nodes(n);
            let (xs, r1, r2): (Vec<f64>, Vec<C64>, Vec<C64>) = match method {
                EigenMethod::Grid(m) => {
                    let g1 = GridField::from_fn(domain, n, 1, f1)?;
                    let g2 = GridField::from_fn(domain, n, 1, f2)?;
                    let (o1, o2) = super::calt_apply(&g1, &g2, delta, m)?;
                    (nodes.clone(), o1.entry(0, 0), o2.entry(0, 0))
                }
                EigenMethod::Function => {
                    let xs = interior(&domain, &nodes);
                    let opts = QuadOptions::default();
                    let t = Operator::T { delta };
                    let tt = Operator::TTilde { delta };
                    let vals = xs
                        .par_iter()
                        .map(|&x| -> Result<(C64, C64)> {
                            let tf1 = apply_fn(t, None, f1, x, 1, &opts)?.get(0, 0);
                            let tf2 = apply_fn(t, None, f2, x, 1, &opts)?.get(0, 0);
                            let sf1 = apply_fn(tt, None, f1, x, 1, &opts)?.get(0, 0);
                            let sf2 = apply_fn(tt, None, f2, x, 1, &opts)?.get(0, 0);
                            Ok((tf1 + sf2, -sf1 - tf2))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let (a, b) = vals.into_iter().unzip();
                    (xs, a, b)
                }
            };
            let mut worst: f64 = 0.0;
            for ((x, v1), v2) in xs.iter().zip(&r1).zip(&r2) {
                if in_interior(&domain, *x) {
                    let e1 = (v1 - lambda * f1(*x)?.get(0, 0)).norm();
                    let e2 = (v2 - lambda * f2(*x)?.get(0, 0)).norm();
                    worst = worst.max(e1).max(e2);
                }
            }
            Ok(worst)
        }
    }
}

fn in_interior(domain: &Domain, x: f64) -> bool {
    match *domain {
        Domain::LineTruncated { half_width } => x.abs() <= 0.8 * half_width,
        Domain::Periodic { .. } => true,
    }
}

fn interior(domain: &Domain, nodes: &[f64]) -> Vec<f64> {
    nodes.iter().copied().filter(|&x| in_interior(domain, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_half_plane_is_rejected() {
        let p = EigenProblem::Hilbert {
            case: KernelCase::rational(),
            sign: 1.0,
        };
        assert!(eigenfunction_residual(p, C64::new(0.0, 0.5), 64, 10.0, EigenMethod::Function).is_err());
    }

    #[test]
    fn periodic_hilbert_eigenfunction() {
        let case = KernelCase::trigonometric(6.0).unwrap();
        let p = EigenProblem::Hilbert { case, sign: 1.0 };
        let r = eigenfunction_residual(p, C64::new(1.0, -0.7), 256, 0.0, EigenMethod::Grid(Method::Spectral)).unwrap();
        assert!(r < 1e-10, "{r:e}");
    }
}
