//! The interaction functions α(z), V(z) = −α′(z) and the constant C for the
//! rational (I), trigonometric (II) and hyperbolic (III) cases.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub const DEFAULT_POLE_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Rational,
    Trigonometric,
    Hyperbolic,
}

/// Case selector plus its parameter (period L or strip half-width δ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCase {
    pub kind: KernelKind,
    /// L for the trigonometric case, δ for the hyperbolic case, unused otherwise.
    #[serde(default)]
    pub param: f64,
    #[serde(default = "default_guard")]
    pub guard: f64,
}

fn default_guard() -> f64 {
    DEFAULT_POLE_GUARD
}

impl KernelCase {
    pub fn rational() -> Self {
        KernelCase {
            kind: KernelKind::Rational,
            param: 0.0,
            guard: DEFAULT_POLE_GUARD,
        }
    }

    pub fn trigonometric(period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Precondition(format!("period L must be positive, got {period}")));
        }
        Ok(KernelCase {
            kind: KernelKind::Trigonometric,
            param: period,
            guard: DEFAULT_POLE_GUARD,
        })
    }

    pub fn hyperbolic(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Precondition(format!("delta must be positive, got {delta}")));
        }
        Ok(KernelCase {
            kind: KernelKind::Hyperbolic,
            param: delta,
            guard: DEFAULT_POLE_GUARD,
        })
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    /// Checks the parameter invariants; useful after deserialisation.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Rational => Ok(()),
            KernelKind::Trigonometric => Self::trigonometric(self.param).map(|_| ()),
            KernelKind::Hyperbolic => Self::hyperbolic(self.param).map(|_| ()),
        }
    }

    pub fn period(&self) -> Option<f64> {
        (self.kind == KernelKind::Trigonometric).then_some(self.param)
    }

    pub fn delta(&self) -> Option<f64> {
        (self.kind == KernelKind::Hyperbolic).then_some(self.param)
    }

    pub fn label(&self) -> String {
        match self.kind {
            KernelKind::Rational => "I".to_string(),
            KernelKind::Trigonometric => format!("II(L={})", self.param),
            KernelKind::Hyperbolic => format!("III(delta={})", self.param),
        }
    }

    /// The constant C in V = α² + C.
    pub fn c_const(&self) -> f64 {
        match self.kind {
            KernelKind::Rational => 0.0,
            KernelKind::Trigonometric => (PI / self.param).powi(2),
            KernelKind::Hyperbolic => -(PI / (2.0 * self.param)).powi(2),
        }
    }

    /// Distance from z to the nearest pole of α.
    pub fn pole_distance(&self, z: C64) -> f64 {
        match self.kind {
            KernelKind::Rational => z.norm(),
            KernelKind::Trigonometric => {
                let l = self.param;
                let k = (z.re / l).round();
                C64::new(z.re - k * l, z.im).norm()
            }
            KernelKind::Hyperbolic => {
                let p = 2.0 * self.param;
                let k = (z.im / p).round();
                C64::new(z.re, z.im - k * p).norm()
            }
        }
    }

    fn check(&self, z: C64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Precondition(format!("non-finite argument {z}")));
        }
        if self.pole_distance(z) < self.guard {
            return Err(Error::PoleProximity {
                z,
                radius: self.guard,
            });
        }
        Ok(())
    }

    pub fn alpha(&self, z: C64) -> Result<C64> {
        self.check(z)?;
        Ok(self.alpha_unchecked(z))
    }

    pub fn v_pot(&self, z: C64) -> Result<C64> {
        self.check(z)?;
        Ok(self.v_unchecked(z))
    }

    /// V′(z) = −2α(z)V(z).
    pub fn v_pot_prime(&self, z: C64) -> Result<C64> {
        self.check(z)?;
        Ok(-2.0 * self.alpha_unchecked(z) * self.v_unchecked(z))
    }

    /// α′ = −V.
    pub fn alpha_prime(&self, z: C64) -> Result<C64> {
        Ok(-self.v_pot(z)?)
    }

    /// α″ = −V′ = 2αV.
    pub fn alpha_second(&self, z: C64) -> Result<C64> {
        Ok(-self.v_pot_prime(z)?)
    }

    /// α, α′, α″ in one evaluation.
    pub fn alpha_jet(&self, z: C64) -> Result<[C64; 3]> {
        self.check(z)?;
        let a = self.alpha_unchecked(z);
        let v = self.v_unchecked(z);
        Ok([a, -v, 2.0 * a * v])
    }

    fn alpha_unchecked(&self, z: C64) -> C64 {
        match self.kind {
            KernelKind::Rational => z.inv(),
            KernelKind::Trigonometric => {
                let s = PI / self.param;
                s * cot(s * z)
            }
            KernelKind::Hyperbolic => {
                let s = PI / (2.0 * self.param);
                s * coth(s * z)
            }
        }
    }

    // V is evaluated from csc²/csch² directly, not as α² + C, so that the
    // identity residuals compare two independent computations.
    fn v_unchecked(&self, z: C64) -> C64 {
        match self.kind {
            KernelKind::Rational => (z * z).inv(),
            KernelKind::Trigonometric => {
                let s = PI / self.param;
                s * s * csc2(s * z)
            }
            KernelKind::Hyperbolic => {
                let s = PI / (2.0 * self.param);
                s * s * csch2(s * z)
            }
        }
    }

    /// Residuals of the functional identities at z = a − b and at the triple
    /// (a, b, c). Each residual is absolute when all contributing terms are at
    /// most 1 in magnitude and relative to the largest term otherwise.
    pub fn identity_residuals(&self, a: C64, b: C64, c: C64) -> Result<IdentityResiduals> {
        let z = a - b;
        let al = self.alpha(z)?;
        let al_m = self.alpha(-z)?;
        let v = self.v_pot(z)?;
        let v_m = self.v_pot(-z)?;
        let cc = C64::from(self.c_const());

        let odd = scaled((al_m + al).norm(), &[al, al_m]);
        let even = scaled((v_m - v).norm(), &[v, v_m]);
        let a2 = al * al;
        let v_id = scaled((v - a2 - cc).norm(), &[v, a2, cc]);

        let ab = self.alpha(a - b)?;
        let bc = self.alpha(b - c)?;
        let ca = self.alpha(c - a)?;
        let t = [ab * bc, bc * ca, ca * ab];
        let add = scaled((t[0] + t[1] + t[2] - cc).norm(), &[t[0], t[1], t[2], cc]);

        let periodicity = match self.kind {
            KernelKind::Hyperbolic => {
                let shifted = self.alpha(z + C64::new(0.0, 2.0 * self.param))?;
                let vs = self.v_pot(z + C64::new(0.0, 2.0 * self.param))?;
                Some(
                    scaled((shifted - al).norm(), &[shifted, al])
                        .max(scaled((vs - v).norm(), &[vs, v])),
                )
            }
            _ => None,
        };
        Ok(IdentityResiduals {
            oddness: odd,
            evenness: even,
            v_alpha: v_id,
            addition: add,
            periodicity,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub oddness: f64,
    pub evenness: f64,
    pub v_alpha: f64,
    pub addition: f64,
    pub periodicity: Option<f64>,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.oddness,
            self.evenness,
            self.v_alpha,
            self.addition,
            self.periodicity.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn scaled(res: f64, terms: &[C64]) -> f64 {
    let m = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    if m <= 1.0 {
        res
    } else {
        res / m
    }
}

/// e^z − 1 without cancellation for small |z|.
pub(crate) fn cexpm1(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let em1 = z.re.exp_m1();
    let half = (0.5 * z.im).sin();
    C64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
}

/// cot w through e^{2iw}, always exponentiating the decaying branch.
pub(crate) fn cot(w: C64) -> C64 {
    if w.im < 0.0 {
        return -cot(-w);
    }
    let em1 = cexpm1(C64::new(0.0, 2.0) * w);
    C64::i() * (em1 + 2.0) / em1
}

pub(crate) fn coth(w: C64) -> C64 {
    if w.re < 0.0 {
        return -coth(-w);
    }
    let em1 = cexpm1(-2.0 * w);
    -(em1 + 2.0) / em1
}

/// 1/sin²w = −4q/(q−1)² with q = e^{2iw}, |q| ≤ 1.
pub(crate) fn csc2(w: C64) -> C64 {
    let w = if w.im < 0.0 { -w } else { w };
    let s = C64::new(0.0, 2.0) * w;
    let em1 = cexpm1(s);
    -4.0 * s.exp() / (em1 * em1)
}

/// 1/sinh²w = 4r/(1−r)² with r = e^{−2w}, |r| ≤ 1.
pub(crate) fn csch2(w: C64) -> C64 {
    let w = if w.re < 0.0 { -w } else { w };
    let s = -2.0 * w;
    let em1 = cexpm1(s);
    4.0 * s.exp() / (em1 * em1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spot_values() {
        let r = KernelCase::rational();
        assert!((r.alpha(c(2.0, 0.0)).unwrap() - 0.5).norm() < 1e-15);
        assert!((r.v_pot(c(2.0, 0.0)).unwrap() - 0.25).norm() < 1e-15);
        assert!((r.v_pot_prime(c(1.0, 0.0)).unwrap() + 2.0).norm() < 1e-15);
        assert!((r.v_pot_prime(c(-1.0, 0.0)).unwrap() - 2.0).norm() < 1e-15);

        let h = KernelCase::hyperbolic(1.0).unwrap();
        assert!(h.alpha(c(0.0, 1.0)).unwrap().norm() < 1e-15);

        let t = KernelCase::trigonometric(2.0).unwrap();
        assert!((t.alpha(c(0.5, 0.0)).unwrap() - PI / 2.0).norm() < 1e-14);
        assert!((t.v_pot(c(1.0, 0.0)).unwrap() - PI * PI / 4.0).norm() < 1e-14);
    }

    #[test]
    fn pole_guard_rejects() {
        let t = KernelCase::trigonometric(3.0).unwrap();
        assert!(matches!(
            t.alpha(c(6.0, 0.0)),
            Err(Error::PoleProximity { .. })
        ));
        let h = KernelCase::hyperbolic(0.5).unwrap();
        assert!(h.v_pot(c(0.0, 2.0)).is_err());
        assert!(KernelCase::rational().alpha(c(0.0, 0.0)).is_err());
        assert!(KernelCase::rational().alpha(c(1e-6, 0.0)).is_ok());
    }

    #[test]
    fn far_from_axis_is_finite() {
        let t = KernelCase::trigonometric(1.0).unwrap();
        let a = t.alpha(c(0.3, 400.0)).unwrap();
        assert!((a - C64::new(0.0, -PI)).norm() < 1e-12);
        assert!(t.v_pot(c(0.3, -400.0)).unwrap().norm() < 1e-300 + 1e-12);
        let h = KernelCase::hyperbolic(0.1).unwrap();
        let a = h.alpha(c(-500.0, 0.2)).unwrap();
        assert!((a + PI / 0.2).norm() < 1e-10);
    }

    #[test]
    fn small_arguments_keep_relative_accuracy() {
        let t = KernelCase::trigonometric(2.0 * PI).unwrap();
        let z = c(1e-7, 2e-7);
        let rel = (t.alpha(z).unwrap() * z - 1.0).norm();
        assert!(rel < 1e-12, "{rel}");
        let h = KernelCase::hyperbolic(1.0).unwrap();
        let rel = (h.v_pot(z).unwrap() * z * z - 1.0).norm();
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn addition_identity_rational_example() {
        let r = KernelCase::rational();
        let res = r
            .identity_residuals(c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0))
            .unwrap();
        assert!(res.addition < 1e-15);
    }

    #[test]
    fn periodicity_example() {
        let h = KernelCase::hyperbolic(0.5).unwrap();
        let res = h
            .identity_residuals(c(1.0, 0.1), c(0.0, 0.0), c(0.4, -0.3))
            .unwrap();
        assert!(res.periodicity.unwrap() < 1e-13);
    }
}
