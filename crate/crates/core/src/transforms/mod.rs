//! Nonlocal operators: the Hilbert transform on the line and the circle, the
//! coth- and tanh-kernel operators T and T̃, and the block operator 𝒯.
//!
//! Each operator has a quadrature implementation (the oracle) and a spectral
//! one (the fast path). Conventions, for an operator with kernel K:
//!
//! ```text
//! (K f)(x) = PV ∫ K(x′ − x) f(x′) dx′
//! H:  K(s) = 1/(π s)                 multiplier  i sgn k
//! Hₚ: K(s) = (1/L) cot(π s / L)      multiplier  i sgn n
//! T:  K(s) = (1/2δ) coth(π s / 2δ)   multiplier  i coth(k δ)
//! T̃:  K(s) = (1/2δ) tanh(π s / 2δ)   multiplier  i / sinh(k δ)
//! ```
//!
//! T̃ is only conditionally convergent; it is defined by symmetric partial
//! integrals over [x − R, x + R] with R → ∞, which on a truncated grid means
//! the integrand must have decayed at the boundary.

mod eigen;
pub(crate) mod fft;
mod quadrature;
mod spectral;

pub use eigen::{eigenfunction_residual, EigenMethod, EigenProblem};
pub use quadrature::{apply_fn, grid_quadrature};
pub use spectral::{multiplier, spectral};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::spin::SpinMatrix;
use crate::{Error, Result, C64};

pub const DECAY_WARN: f64 = 1e-10;
/// Relative boundary magnitude above which T̃ refuses a truncated field.
pub const TTILDE_DECAY_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// [−W, W) sampled at x_i = −W + i h, h = 2W/n.
    LineTruncated { half_width: f64 },
    /// [0, L) sampled at x_i = i L/n.
    Periodic { period: f64 },
}

impl Domain {
    /// Default truncation 50·max(1, δ).
    pub fn line_for_delta(delta: f64) -> Domain {
        Domain::LineTruncated {
            half_width: 50.0 * delta.max(1.0),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Domain::LineTruncated { half_width } => 2.0 * half_width,
            Domain::Periodic { period } => period,
        }
    }

    pub fn start(&self) -> f64 {
        match *self {
            Domain::LineTruncated { half_width } => -half_width,
            Domain::Periodic { .. } => 0.0,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Periodic { .. })
    }

    pub fn nodes(&self, n: usize) -> Vec<f64> {
        let h = self.length() / n as f64;
        (0..n).map(|i| self.start() + i as f64 * h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operator {
    Hilbert,
    T { delta: f64 },
    TTilde { delta: f64 },
}

impl Operator {
    /// Kernel value on the line (the periodic Hilbert kernel is handled
    /// separately).
    pub fn kernel(&self, s: f64) -> f64 {
        match *self {
            Operator::Hilbert => 1.0 / (PI * s),
            Operator::T { delta } => {
                let w = PI * s / (2.0 * delta);
                1.0 / (2.0 * delta * w.tanh())
            }
            Operator::TTilde { delta } => (PI * s / (2.0 * delta)).tanh() / (2.0 * delta),
        }
    }

    /// Coefficient c of the c/s singularity of the kernel.
    pub(crate) fn singular_coefficient(&self) -> f64 {
        match self {
            Operator::Hilbert | Operator::T { .. } => 1.0 / PI,
            Operator::TTilde { .. } => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Trapezoid on the grid with the principal-value correction.
    Quadrature,
    /// Fourier multipliers.
    Spectral,
}

/// Uniform samples of a d×d matrix field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub domain: Domain,
    pub dim: usize,
    pub values: Vec<SpinMatrix>,
}

impl GridField {
    pub fn new(domain: Domain, dim: usize, values: Vec<SpinMatrix>) -> Result<Self> {
        for v in &values {
            if v.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.dim });
            }
        }
        if values.is_empty() {
            return Err(Error::GridMismatch("empty grid".into()));
        }
        Ok(GridField { domain, dim, values })
    }

    pub fn zeros(domain: Domain, n: usize, dim: usize) -> Self {
        GridField {
            domain,
            dim,
            values: vec![SpinMatrix::zeros(dim); n],
        }
    }

    pub fn from_fn<F>(domain: Domain, n: usize, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<SpinMatrix>,
    {
        let values = domain.nodes(n).into_iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(domain, dim, values)
    }

    pub fn from_scalar<F: Fn(f64) -> C64>(domain: Domain, n: usize, f: F) -> Self {
        GridField {
            domain,
            dim: 1,
            values: domain
                .nodes(n)
                .into_iter()
                .map(|x| SpinMatrix::scalar(1, f(x)))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        self.domain.length() / self.n() as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.domain.nodes(self.n())
    }

    /// Samples of matrix entry (i, j).
    pub fn entry(&self, i: usize, j: usize) -> Vec<C64> {
        self.values.iter().map(|m| m.get(i, j)).collect()
    }

    pub(crate) fn entry_arrays(&self) -> Vec<Vec<C64>> {
        let d = self.dim;
        (0..d * d).map(|e| self.entry(e / d, e % d)).collect()
    }

    pub(crate) fn from_entry_arrays(domain: Domain, dim: usize, arrays: &[Vec<C64>]) -> Self {
        let n = arrays[0].len();
        let values = (0..n)
            .map(|i| SpinMatrix {
                dim,
                data: arrays.iter().map(|a| a[i]).collect(),
            })
            .collect();
        GridField { domain, dim, values }
    }

    pub fn map_entries<F: Fn(&[C64]) -> Vec<C64>>(&self, f: F) -> GridField {
        let arrays: Vec<Vec<C64>> = self.entry_arrays().iter().map(|a| f(a)).collect();
        Self::from_entry_arrays(self.domain, self.dim, &arrays)
    }

    /// Largest matrix entry among the outermost 1% of samples at each end
    /// (zero for periodic grids).
    pub fn boundary_magnitude(&self) -> f64 {
        if self.domain.is_periodic() {
            return 0.0;
        }
        let n = self.n();
        let k = (n / 100).max(1);
        self.values[..k]
            .iter()
            .chain(&self.values[n - k..])
            .map(|m| m.max_abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    pub(crate) fn warn_decay(&self) {
        let b = self.boundary_magnitude();
        if b > DECAY_WARN {
            log::warn!("field has not decayed at the grid boundary ({b:.2e})");
        }
    }

    /// Spectral x-derivative.
    pub fn derivative(&self) -> GridField {
        let len = self.domain.length();
        self.map_entries(|a| fft::derivative(a, len))
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.domain != other.domain || self.n() != other.n() || self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "{:?}/{}/{} vs {:?}/{}/{}",
                self.domain,
                self.n(),
                self.dim,
                other.domain,
                other.n(),
                other.dim
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridField {
            domain: self.domain,
            dim: self.dim,
            values,
        })
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(GridField {
            domain: self.domain,
            dim: self.dim,
            values,
        })
    }

    pub fn scale(&self, c: C64) -> GridField {
        GridField {
            domain: self.domain,
            dim: self.dim,
            values: self.values.iter().map(|m| m.scale(c)).collect(),
        }
    }

    /// Sup-norm of the matrix Frobenius norms, optionally skipping a
    /// fraction of the grid at each end of a truncated domain.
    pub fn sup_norm(&self, skip_fraction: f64) -> f64 {
        let n = self.n();
        let k = if self.domain.is_periodic() {
            0
        } else {
            (skip_fraction * n as f64).round() as usize
        };
        self.values[k..n - k].iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

fn check_ttilde_decay(field: &GridField) -> Result<()> {
    let b = field.boundary_magnitude();
    let m = field.max_abs();
    if m > 0.0 && b > TTILDE_DECAY_LIMIT * m {
        return Err(Error::InsufficientDecay(b));
    }
    Ok(())
}

/// Applies an operator with the chosen method.
pub fn apply(op: Operator, field: &GridField, method: Method) -> Result<GridField> {
    if let Operator::T { delta } | Operator::TTilde { delta } = op {
        if !(delta > 0.0) {
            return Err(Error::Precondition("delta must be positive".into()));
        }
        if field.domain.is_periodic() {
            return Err(Error::Precondition("T and T̃ act on the line".into()));
        }
    }
    if let Operator::TTilde { .. } = op {
        check_ttilde_decay(field)?;
    } else {
        field.warn_decay();
    }
    match method {
        Method::Quadrature => grid_quadrature(op, field),
        Method::Spectral => spectral(op, field),
    }
}

/// Hilbert transform: spectral on the circle, PV quadrature on the line.
pub fn hilbert(field: &GridField) -> Result<GridField> {
    let method = if field.domain.is_periodic() {
        Method::Spectral
    } else {
        Method::Quadrature
    };
    apply(Operator::Hilbert, field, method)
}

pub fn t_op(field: &GridField, delta: f64) -> Result<GridField> {
    apply(Operator::T { delta }, field, Method::Quadrature)
}

pub fn ttilde_op(field: &GridField, delta: f64) -> Result<GridField> {
    apply(Operator::TTilde { delta }, field, Method::Quadrature)
}

/// 𝒯(U, V) = (T U + T̃ V, −T̃ U − T V).
pub fn calt_apply(u: &GridField, v: &GridField, delta: f64, method: Method) -> Result<(GridField, GridField)> {
    u.check_same_grid(v)?;
    let tu = apply(Operator::T { delta }, u, method)?;
    let tv = apply(Operator::T { delta }, v, method)?;
    let su = apply(Operator::TTilde { delta }, u, method)?;
    let sv = apply(Operator::TTilde { delta }, v, method)?;
    let first = tu.add(&sv)?;
    let second = su.add(&tv)?.scale(C64::new(-1.0, 0.0));
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_dx(x: f64) -> C64 {
        C64::new(-2.0 * x * (-x * x).exp(), 0.0)
    }

    #[test]
    fn constant_periodic_is_annihilated() {
        let f = GridField::from_scalar(Domain::Periodic { period: 5.0 }, 64, |_| C64::new(3.0, 1.0));
        let h = hilbert(&f).unwrap();
        assert!(h.max_abs() < 1e-14);
    }

    #[test]
    fn lorentzian_hilbert() {
        let dom = Domain::LineTruncated { half_width: 400.0 };
        let f = GridField::from_scalar(dom, 8192, |x| C64::new(1.0 / (1.0 + x * x), 0.0));
        let h = hilbert(&f).unwrap();
        for (i, x) in f.nodes().iter().enumerate() {
            if x.abs() < 5.0 {
                let exact = -x / (1.0 + x * x);
                assert!((h.values[i].get(0, 0).re - exact).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn paths_agree_on_odd_gaussian_derivative() {
        let dom = Domain::LineTruncated { half_width: 50.0 };
        let f = GridField::from_scalar(dom, 4096, gauss_dx);
        for op in [
            Operator::Hilbert,
            Operator::T { delta: 1.0 },
            Operator::TTilde { delta: 1.0 },
            Operator::T { delta: 0.3 },
        ] {
            let q = apply(op, &f, Method::Quadrature).unwrap();
            let s = apply(op, &f, Method::Spectral).unwrap();
            let dev = q.sub(&s).unwrap().sup_norm(0.1);
            assert!(dev < 1e-6, "{op:?}: {dev:e}");
        }
    }

    #[test]
    fn ttilde_rejects_slow_decay() {
        let dom = Domain::LineTruncated { half_width: 20.0 };
        let f = GridField::from_scalar(dom, 256, |x| C64::new(1.0 / (1.0 + x * x), 0.0));
        assert!(matches!(ttilde_op(&f, 1.0), Err(Error::InsufficientDecay(_))));
    }
}
