use super::{check_strip, Equation};
use crate::kernel::{KernelCase, KernelKind};
use crate::ode::{self, OdeOptions};
use crate::scm::{family_rhs, pack_state, scm_rhs, unpack_state, pack_derivative, Family, ScmState};
use crate::spin::{BraVec, SpinMatrix};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Snapshot of the pole ansatz at one time: the sCM state plus the residue
/// matrices P_j = |e_j⟩⟨f_j| and Q_j = |g_j⟩⟨h_j|.
#[derive(Clone, Debug)]
pub struct PoleField {
    pub equation: Equation,
    pub state: ScmState,
    pub a: Family,
    pub b: Family,
    pub hermitian: bool,
    p: Vec<SpinMatrix>,
    q: Vec<SpinMatrix>,
    pdot: Vec<SpinMatrix>,
    qdot: Vec<SpinMatrix>,
}

/// One term group c_a Σ P_j α⁽ᵏ⁾(x − a_j − s_a) + c_b Σ Q_j α⁽ᵏ⁾(x − b_j − s_b).
/// Every group used by the ansatz has c_b = c̄_a and s_b = s̄_a, which makes
/// the b-part the adjoint of the a-part in the hermitian case.
#[derive(Clone, Copy)]
struct Group {
    ca: C64,
    sa: C64,
}

fn spin_dot(fam: &Family, dfam: &(Vec<crate::KetVec>, Vec<BraVec>)) -> Vec<SpinMatrix> {
    (0..fam.len())
        .map(|j| {
            let mut m = SpinMatrix::zeros(fam.kets[j].dim());
            m.add_outer_scaled(&dfam.0[j], &fam.bras[j], C64::new(1.0, 0.0));
            m.add_outer_scaled(&fam.kets[j], &dfam.1[j], C64::new(1.0, 0.0));
            m
        })
        .collect()
}

impl PoleField {
    pub fn from_state(equation: Equation, state: &ScmState) -> Result<PoleField> {
        let a = state.a.clone();
        let b = state.second().unwrap_or_else(Family::empty);
        check_strip(&state.case, equation, &a, &b)?;
        let da = family_rhs(&state.case, &a)?;
        let db = family_rhs(&state.case, &b)?;
        let pdot = spin_dot(&a, &(da.dkets, da.dbras));
        let qdot = spin_dot(&b, &(db.dkets, db.dbras));
        Ok(PoleField {
            equation,
            p: a.projectors(),
            q: b.projectors(),
            a,
            b,
            hermitian: state.mirror,
            state: state.clone(),
            pdot,
            qdot,
        })
    }

    pub fn case(&self) -> &KernelCase {
        &self.state.case
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn dim(&self) -> usize {
        self.state.dim
    }

    fn half_shift(&self) -> C64 {
        C64::new(0.0, 0.5 * self.state.case.delta().unwrap_or(0.0))
    }

    fn jet(&self, z: C64, k: usize) -> Result<C64> {
        let c = &self.state.case;
        match k {
            0 => c.alpha(z),
            1 => c.alpha_prime(z),
            2 => c.alpha_second(z),
            _ => Err(Error::Precondition("derivative order above 2".into())),
        }
    }

    fn group(&self, g: Group, x: f64, k: usize) -> Result<SpinMatrix> {
        let d = self.dim();
        let mut acc = SpinMatrix::zeros(d);
        for (j, p) in self.p.iter().enumerate() {
            acc.add_scaled(p, g.ca * self.jet(x - self.a.poles[j] - g.sa, k)?);
        }
        if self.hermitian {
            return Ok(&acc + &acc.herm_conj());
        }
        for (j, q) in self.q.iter().enumerate() {
            acc.add_scaled(q, g.ca.conj() * self.jet(x - self.b.poles[j] - g.sa.conj(), k)?);
        }
        Ok(acc)
    }

    /// ∂_t of a group along the sCM flow: P_j moves by Ṗ_j and the pole by ȧ_j.
    fn group_t(&self, g: Group, x: f64) -> Result<SpinMatrix> {
        let d = self.dim();
        let mut acc = SpinMatrix::zeros(d);
        for j in 0..self.p.len() {
            let z = x - self.a.poles[j] - g.sa;
            acc.add_scaled(&self.pdot[j], g.ca * self.jet(z, 0)?);
            acc.add_scaled(&self.p[j], -g.ca * self.jet(z, 1)? * self.a.vels[j]);
        }
        if self.hermitian {
            return Ok(&acc + &acc.herm_conj());
        }
        for j in 0..self.q.len() {
            let z = x - self.b.poles[j] - g.sa.conj();
            acc.add_scaled(&self.qdot[j], g.ca.conj() * self.jet(z, 0)?);
            acc.add_scaled(&self.q[j], -g.ca.conj() * self.jet(z, 1)? * self.b.vels[j]);
        }
        Ok(acc)
    }

    fn u_group(&self) -> Group {
        match self.equation {
            Equation::Sbo => Group { ca: I, sa: C64::default() },
            Equation::Sncilw => Group { ca: I, sa: self.half_shift() },
        }
    }

    fn v_group(&self) -> Group {
        Group {
            ca: -I,
            sa: -self.half_shift(),
        }
    }

    /// k-th x-derivative of U (k ≤ 2).
    pub fn u_dx(&self, x: f64, k: usize) -> Result<SpinMatrix> {
        self.group(self.u_group(), x, k)
    }

    pub fn u(&self, x: f64) -> Result<SpinMatrix> {
        self.u_dx(x, 0)
    }

    /// k-th x-derivative of V (sncILW only).
    pub fn v_dx(&self, x: f64, k: usize) -> Result<SpinMatrix> {
        self.require_sncilw()?;
        self.group(self.v_group(), x, k)
    }

    pub fn v(&self, x: f64) -> Result<SpinMatrix> {
        self.v_dx(x, 0)
    }

    fn require_sncilw(&self) -> Result<()> {
        if self.equation != Equation::Sncilw {
            return Err(Error::Precondition("V exists only for sncILW fields".into()));
        }
        Ok(())
    }

    /// U_t from the sCM equations of motion.
    pub fn u_t(&self, x: f64) -> Result<SpinMatrix> {
        self.group_t(self.u_group(), x)
    }

    pub fn v_t(&self, x: f64) -> Result<SpinMatrix> {
        self.require_sncilw()?;
        self.group_t(self.v_group(), x)
    }

    /// H ∂ₓᵏ U for k = 1, 2, using that α(x − a) is an H-eigenfunction with
    /// eigenvalue i below the real axis and −i above it.
    pub fn hilbert_u_dx(&self, x: f64, k: usize) -> Result<SpinMatrix> {
        if self.equation != Equation::Sbo || k == 0 {
            return Err(Error::Precondition("analytic H∂U needs an sBO field and k ≥ 1".into()));
        }
        self.group(
            Group {
                ca: C64::new(-1.0, 0.0),
                sa: C64::default(),
            },
            x,
            k,
        )
    }

    /// The two components of 𝒯∂ₓᵏ(U, V) for k = 1, 2: (T∂U + T̃∂V, −T̃∂U − T∂V).
    pub fn calt_dx(&self, x: f64, k: usize) -> Result<(SpinMatrix, SpinMatrix)> {
        self.require_sncilw()?;
        if k == 0 {
            return Err(Error::Precondition("analytic 𝒯∂U needs k ≥ 1".into()));
        }
        let s = self.half_shift();
        let first = self.group(Group { ca: C64::new(-1.0, 0.0), sa: s }, x, k)?;
        let second = self.group(Group { ca: C64::new(1.0, 0.0), sa: -s }, x, k)?;
        Ok((first, second))
    }

    /// The field transported by ±h and ±2h along the sCM flow, each reached
    /// by a single explicit step so that the differences are free of step
    /// control noise. Order: t+h, t−h, t+2h, t−2h.
    pub fn neighbours(&self, h: f64) -> Result<[PoleField; 4]> {
        let template = self.state.clone();
        let y0 = pack_state(&template);
        let t0 = template.time;
        let step = |dt: f64| -> Result<PoleField> {
            let opts = OdeOptions {
                rtol: 1e-6,
                atol: 1e-8,
                h_init: Some(dt.abs()),
                ..OdeOptions::default()
            };
            let sol = ode::integrate(
                |t, y, dy| {
                    let s = unpack_state(&template, t, y);
                    pack_derivative(&scm_rhs(&s)?, dy);
                    Ok(())
                },
                t0,
                &y0,
                t0 + dt,
                &[],
                &opts,
                |_, _| Ok(false),
            )?;
            let s = unpack_state(&template, t0 + dt, &sol.y_final);
            PoleField::from_state(self.equation, &s)
        };
        Ok([step(h)?, step(-h)?, step(2.0 * h)?, step(-2.0 * h)?])
    }
}

/// Five-point central difference from `neighbours`.
pub fn central_difference(values: [&SpinMatrix; 4], h: f64) -> SpinMatrix {
    let [p1, m1, p2, m2] = values;
    let mut out = (p1 - m1) * C64::new(8.0, 0.0);
    out -= &(p2 - m2);
    out.scale(C64::new(1.0 / (12.0 * h), 0.0))
}

/// Closed-form hermitian one-soliton of the sBO equation,
/// U = |f⟩⟨f|/⟨f|f⟩ (iα(x − a) − iα(x − ā)) with a = a₀ + v t.
#[derive(Clone, Debug)]
pub struct OneSoliton {
    pub case: KernelCase,
    pub a0: C64,
    pub velocity: f64,
    proj: SpinMatrix,
}

pub fn one_soliton(case: KernelCase, a0: C64, f: &BraVec) -> Result<OneSoliton> {
    if case.kind == KernelKind::Hyperbolic {
        return Err(Error::Precondition("one-soliton formula covers the rational and periodic cases".into()));
    }
    if !(a0.im < 0.0) {
        return Err(Error::StripViolation(format!("Im a0 = {} must be negative", a0.im)));
    }
    let nrm = f.norm();
    if nrm == 0.0 {
        return Err(Error::Precondition("bra vanishes".into()));
    }
    let d = f.dim();
    let mut proj = SpinMatrix::zeros(d);
    for mu in 0..d {
        for nu in 0..d {
            proj.set(mu, nu, f.row[mu].conj() * f.row[nu] / (nrm * nrm));
        }
    }
    let v = -2.0 * I * case.alpha(a0 - a0.conj())?;
    Ok(OneSoliton {
        case,
        a0,
        velocity: v.re,
        proj,
    })
}

impl OneSoliton {
    pub fn eval(&self, x: f64, t: f64) -> Result<SpinMatrix> {
        let a = self.a0 + self.velocity * t;
        let s = I * (self.case.alpha(x - a)? - self.case.alpha(x - a.conj())?);
        Ok(self.proj.scale(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{generate_hermitian, solve_initial_data};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_soliton_peak() {
        let f = BraVec::from_row(vec![C64::new(1.0, 0.0)]);
        let s = one_soliton(KernelCase::rational(), C64::new(0.0, -1.0), &f).unwrap();
        assert!((s.velocity - 1.0).abs() < 1e-15);
        assert!((s.eval(0.0, 0.0).unwrap().get(0, 0) - C64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn constructed_matches_closed_form() {
        let f = BraVec::from_row(vec![C64::new(0.6, 0.2), C64::new(-0.3, 0.7)]);
        let a0 = C64::new(0.4, -0.8);
        let case = KernelCase::trigonometric(7.0).unwrap();
        let data = solve_initial_data(case, Equation::Sbo, &[a0], &[f.clone()]).unwrap();
        let closed = one_soliton(case, a0, &f).unwrap();
        let pf = data.field_at(0.3).unwrap();
        for i in 0..100 {
            let x = -3.0 + 0.07 * i as f64;
            let diff = &pf.u(x).unwrap() - &closed.eval(x, 0.3).unwrap();
            assert!(diff.norm() < 1e-12, "{}", diff.norm());
        }
    }

    #[test]
    fn time_derivative_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = generate_hermitian(KernelCase::rational(), Equation::Sbo, 2, 2, &mut rng).unwrap();
        let pf = data.field_at(0.0).unwrap();
        let h = 1e-3;
        let nb = pf.neighbours(h).unwrap();
        for x in [-1.0, 0.2, 1.5] {
            let vals: Vec<SpinMatrix> = nb.iter().map(|f| f.u(x).unwrap()).collect();
            let fd = central_difference([&vals[0], &vals[1], &vals[2], &vals[3]], h);
            let ex = pf.u_t(x).unwrap();
            assert!((&fd - &ex).norm() < 1e-9 * (1.0 + ex.norm()));
        }
    }
}
