//! Dense d×d complex matrices and d-component kets/bras.
//!
//! A bra ⟨f| is stored by its row coefficients, i.e. the conjugates of the
//! components of the ket |f⟩ it is dual to. With that storage the pairing
//! ⟨f|e⟩ and the outer product |e⟩⟨f| are bilinear in the stored data, which
//! is what the complexified pole dynamics needs (kets and bras evolve
//! independently).

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KetVec {
    pub data: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BraVec {
    /// Row coefficients f̄_μ, so that ⟨f|e⟩ = Σ_μ row_μ e_μ.
    pub row: Vec<C64>,
}

impl KetVec {
    pub fn new(data: Vec<C64>) -> Self {
        KetVec { data }
    }

    pub fn zeros(d: usize) -> Self {
        KetVec {
            data: vec![C64::new(0.0, 0.0); d],
        }
    }

    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = Self::zeros(d);
        v.data[k] = C64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// |e⟩† = ⟨e|.
    pub fn dual(&self) -> BraVec {
        BraVec {
            row: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scaled(&self, c: C64) -> KetVec {
        KetVec {
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl BraVec {
    pub fn from_row(row: Vec<C64>) -> Self {
        BraVec { row }
    }

    /// The bra dual to the ket with the given components.
    pub fn from_ket_components(components: &[C64]) -> Self {
        BraVec {
            row: components.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.row.len()
    }

    /// ⟨f|† = |f⟩.
    pub fn dual(&self) -> KetVec {
        KetVec {
            data: self.row.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scaled(&self, c: C64) -> BraVec {
        BraVec {
            row: self.row.iter().map(|z| z * c).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// ⟨f|e⟩.
pub fn pairing(f: &BraVec, e: &KetVec) -> Result<C64> {
    check_dim(f.dim(), e.dim())?;
    Ok(pair(f, e))
}

#[inline]
pub(crate) fn pair(f: &BraVec, e: &KetVec) -> C64 {
    f.row.iter().zip(&e.data).map(|(a, b)| a * b).sum()
}

/// |e⟩⟨f| as a matrix.
pub fn outer(e: &KetVec, f: &BraVec) -> Result<SpinMatrix> {
    check_dim(e.dim(), f.dim())?;
    let d = e.dim();
    let mut m = SpinMatrix::zeros(d);
    for mu in 0..d {
        for nu in 0..d {
            m.data[mu * d + nu] = e.data[mu] * f.row[nu];
        }
    }
    Ok(m)
}

fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMatrix {
    pub dim: usize,
    /// Row-major entries.
    pub data: Vec<C64>,
}

impl SpinMatrix {
    pub fn zeros(d: usize) -> Self {
        SpinMatrix {
            dim: d,
            data: vec![C64::new(0.0, 0.0); d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        let mut data = Vec::with_capacity(d * d);
        for r in rows {
            check_dim(d, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(SpinMatrix { dim: d, data })
    }

    pub fn from_real(d: usize, vals: &[f64]) -> Self {
        SpinMatrix {
            dim: d,
            data: vals.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn scalar(d: usize, c: C64) -> Self {
        Self::identity(d) * c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn matmul(&self, other: &SpinMatrix) -> Result<SpinMatrix> {
        check_dim(self.dim, other.dim)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &SpinMatrix) -> SpinMatrix {
        let d = self.dim;
        let mut out = SpinMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, e: &KetVec) -> Result<KetVec> {
        check_dim(self.dim, e.dim())?;
        let d = self.dim;
        Ok(KetVec {
            data: (0..d)
                .map(|i| (0..d).map(|j| self.data[i * d + j] * e.data[j]).sum())
                .collect(),
        })
    }

    pub fn scale(&self, c: C64) -> SpinMatrix {
        SpinMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// self += c · other
    #[inline]
    pub fn add_scaled(&mut self, other: &SpinMatrix, c: C64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
    }

    /// self += c · |e⟩⟨f|
    #[inline]
    pub fn add_outer_scaled(&mut self, e: &KetVec, f: &BraVec, c: C64) {
        let d = self.dim;
        debug_assert!(e.dim() == d && f.dim() == d);
        for mu in 0..d {
            let em = e.data[mu] * c;
            for nu in 0..d {
                self.data[mu * d + nu] += em * f.row[nu];
            }
        }
    }

    pub fn herm_conj(&self) -> SpinMatrix {
        let d = self.dim;
        let mut m = SpinMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self - &self.herm_conj()).norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * self.norm().max(1.0)
    }

    /// Estimates of the two largest singular values by power iteration on
    /// A†A with deflation.
    pub fn top_singular_values(&self) -> (f64, f64) {
        let d = self.dim;
        let g = self.herm_conj().mul_unchecked(self);
        let (_, v1) = power_iter(&g, None);
        // s1 = |A v1|; deflating A itself (rather than A†A) keeps s2 at the
        // rounding level instead of its square root.
        let u: Vec<C64> = (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * v1[j]).sum())
            .collect();
        let s1 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if d < 2 {
            return (s1, 0.0);
        }
        let mut rest = self.clone();
        for i in 0..d {
            for j in 0..d {
                rest.data[i * d + j] -= u[i] * v1[j].conj();
            }
        }
        let (l2, _) = power_iter(&rest.herm_conj().mul_unchecked(&rest), None);
        (s1, l2.max(0.0).sqrt())
    }

    /// True when the second singular value is below `rel` times the first.
    pub fn is_rank_one(&self, rel: f64) -> bool {
        let (s1, s2) = self.top_singular_values();
        s2 <= rel * s1
    }

    pub fn commutator(&self, other: &SpinMatrix) -> Result<SpinMatrix> {
        check_dim(self.dim, other.dim)?;
        Ok(&self.mul_unchecked(other) - &other.mul_unchecked(self))
    }

    pub fn anticommutator(&self, other: &SpinMatrix) -> Result<SpinMatrix> {
        check_dim(self.dim, other.dim)?;
        Ok(&self.mul_unchecked(other) + &other.mul_unchecked(self))
    }
}

// Power iteration for a hermitian positive semidefinite matrix, optionally
// in the orthogonal complement of a given unit vector.
fn power_iter(g: &SpinMatrix, deflate: Option<&Vec<C64>>) -> (f64, Vec<C64>) {
    let d = g.dim;
    let project = |v: &mut Vec<C64>| {
        if let Some(u) = deflate {
            let c: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
    };
    let normalize = |v: &mut Vec<C64>| -> f64 {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            for z in v.iter_mut() {
                *z /= n;
            }
        }
        n
    };
    let mut best = (0.0, vec![C64::new(0.0, 0.0); d]);
    // several starts guard against an unlucky start orthogonal to the top vector
    for start in 0..d.min(3) {
        let mut v: Vec<C64> = (0..d)
            .map(|i| C64::new(1.0 + 0.37 * ((i + start) as f64), 0.11 * (i as f64) - 0.2 * start as f64))
            .collect();
        project(&mut v);
        if normalize(&mut v) == 0.0 {
            continue;
        }
        let mut lam = 0.0;
        for _ in 0..200 {
            let mut w: Vec<C64> = (0..d)
                .map(|i| (0..d).map(|j| g.data[i * d + j] * v[j]).sum())
                .collect();
            project(&mut w);
            let n = normalize(&mut w);
            let done = (n - lam).abs() <= 1e-15 * n.max(1e-300);
            lam = n;
            v = w;
            if n == 0.0 || done {
                break;
            }
        }
        if lam > best.0 {
            best = (lam, v);
        }
    }
    best
}

impl Add for &SpinMatrix {
    type Output = SpinMatrix;
    fn add(self, rhs: &SpinMatrix) -> SpinMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        SpinMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SpinMatrix {
    type Output = SpinMatrix;
    fn sub(self, rhs: &SpinMatrix) -> SpinMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        SpinMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Add for SpinMatrix {
    type Output = SpinMatrix;
    fn add(self, rhs: SpinMatrix) -> SpinMatrix {
        &self + &rhs
    }
}

impl Sub for SpinMatrix {
    type Output = SpinMatrix;
    fn sub(self, rhs: SpinMatrix) -> SpinMatrix {
        &self - &rhs
    }
}

impl AddAssign<&SpinMatrix> for SpinMatrix {
    fn add_assign(&mut self, rhs: &SpinMatrix) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&SpinMatrix> for SpinMatrix {
    fn sub_assign(&mut self, rhs: &SpinMatrix) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &SpinMatrix {
    type Output = SpinMatrix;
    fn mul(self, rhs: &SpinMatrix) -> SpinMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        self.mul_unchecked(rhs)
    }
}

impl Mul<C64> for SpinMatrix {
    type Output = SpinMatrix;
    fn mul(self, c: C64) -> SpinMatrix {
        self.scale(c)
    }
}

impl Mul<f64> for &SpinMatrix {
    type Output = SpinMatrix;
    fn mul(self, c: f64) -> SpinMatrix {
        self.scale(C64::new(c, 0.0))
    }
}

impl Neg for &SpinMatrix {
    type Output = SpinMatrix;
    fn neg(self) -> SpinMatrix {
        self.scale(C64::new(-1.0, 0.0))
    }
}

pub fn commutator(a: &SpinMatrix, b: &SpinMatrix) -> Result<SpinMatrix> {
    a.commutator(b)
}

pub fn anticommutator(a: &SpinMatrix, b: &SpinMatrix) -> Result<SpinMatrix> {
    a.anticommutator(b)
}

pub fn herm_conj(a: &SpinMatrix) -> SpinMatrix {
    a.herm_conj()
}

/// The Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli() -> [SpinMatrix; 3] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        SpinMatrix {
            dim: 2,
            data: vec![z, o, o, z],
        },
        SpinMatrix {
            dim: 2,
            data: vec![z, -i, i, z],
        },
        SpinMatrix {
            dim: 2,
            data: vec![o, z, z, -o],
        },
    ]
}

/// (u/2)(I + m·σ).
pub fn pauli_compose(u: f64, m: [f64; 3]) -> SpinMatrix {
    let h = 0.5 * u;
    SpinMatrix {
        dim: 2,
        data: vec![
            C64::new(h * (1.0 + m[2]), 0.0),
            C64::new(h * m[0], -h * m[1]),
            C64::new(h * m[0], h * m[1]),
            C64::new(h * (1.0 - m[2]), 0.0),
        ],
    }
}

/// Inverse of [`pauli_compose`]: u = tr U and m = 2·(traceless part)/u.
pub fn pauli_decompose(mat: &SpinMatrix) -> Result<(f64, [f64; 3])> {
    check_dim(2, mat.dim)?;
    let u = mat.trace().re;
    if u.abs() < 1e-14 {
        return Err(Error::ChargeDegenerate { trace: u });
    }
    // U = (u/2) I + (u/2) m·σ, so tr(σ_k U) = u m_k
    let s = pauli();
    let mut m = [0.0; 3];
    for k in 0..3 {
        m[k] = s[k].mul_unchecked(mat).trace().re / u;
    }
    Ok((u, m))
}

/// Coefficients (u, w) with U = (u/2) I + w·σ/2 for a possibly non-hermitian
/// 2×2 matrix; u = tr U and w_k = tr(σ_k U). Used where u may vanish.
pub fn pauli_coefficients(mat: &SpinMatrix) -> (C64, [C64; 3]) {
    let s = pauli();
    let u = mat.trace();
    let w = [
        s[0].mul_unchecked(mat).trace(),
        s[1].mul_unchecked(mat).trace(),
        s[2].mul_unchecked(mat).trace(),
    ];
    (u, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn outer_examples() {
        let e = KetVec::new(vec![r(1.0), r(0.0)]);
        let f = BraVec::from_ket_components(&[r(1.0), r(0.0)]);
        let m = outer(&e, &f).unwrap();
        assert_eq!(m.data, vec![r(1.0), r(0.0), r(0.0), r(0.0)]);
        let f2 = BraVec::from_ket_components(&[r(0.0), r(1.0)]);
        let m = outer(&e, &f2).unwrap();
        assert_eq!(m.data, vec![r(0.0), r(1.0), r(0.0), r(0.0)]);
    }

    #[test]
    fn outer_uses_conjugate_of_bra_components() {
        let e = KetVec::new(vec![r(1.0), r(0.0)]);
        let f = BraVec::from_ket_components(&[C64::new(0.0, 1.0), r(0.0)]);
        let m = outer(&e, &f).unwrap();
        assert_eq!(m.get(0, 0), C64::new(0.0, -1.0));
        assert_eq!(pairing(&f, &e).unwrap(), C64::new(0.0, -1.0));
    }

    #[test]
    fn dimension_mismatch() {
        let e = KetVec::zeros(2);
        let f = BraVec::from_row(vec![r(1.0); 3]);
        assert!(matches!(
            outer(&e, &f),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(pairing(&f, &e).is_err());
        assert!(SpinMatrix::zeros(2)
            .commutator(&SpinMatrix::zeros(3))
            .is_err());
    }

    #[test]
    fn pauli_examples() {
        let m = pauli_compose(2.0, [0.0, 0.0, 1.0]);
        assert_eq!(m.data, vec![r(2.0), r(0.0), r(0.0), r(0.0)]);
        let m = pauli_compose(1.0, [0.0; 3]);
        assert_eq!(m.data, SpinMatrix::identity(2).scale(r(0.5)).data);
        let s = pauli();
        let a = s[0].anticommutator(&s[0]).unwrap();
        assert!((&a - &SpinMatrix::identity(2).scale(r(2.0))).norm() < 1e-15);
        assert!(pauli_decompose(&SpinMatrix::zeros(2)).is_err());
    }

    #[test]
    fn singular_values_of_rank_one() {
        let e = KetVec::new(vec![r(1.0), C64::new(0.5, -0.2), r(-0.3)]);
        let f = BraVec::from_row(vec![C64::new(0.2, 0.9), r(1.1), C64::new(0.0, -0.4)]);
        let m = outer(&e, &f).unwrap();
        let (s1, s2) = m.top_singular_values();
        assert!((s1 - e.norm() * f.norm()).abs() < 1e-12);
        assert!(s2 < 1e-12 * s1);
        assert!(!SpinMatrix::identity(3).is_rank_one(1e-6));
    }
}
