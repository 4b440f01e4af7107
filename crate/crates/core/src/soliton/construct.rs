use nalgebra::DMatrix;
use rand::Rng;

use super::{certify_families, check_strip, Conditioning, Equation, SolitonData, COND_FLAG};
use crate::kernel::{KernelCase, KernelKind};
use crate::linalg;
use crate::scm::Family;
use crate::spin::{BraVec, KetVec};
use crate::{Error, Result, C64};

const I2: C64 = C64::new(0.0, 2.0);
const CERT_TOL: f64 = 1e-10;
const SINGULAR_COND: f64 = 1e14;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(case: &KernelCase, poles: &[C64], dim: usize) -> Result<()> {
    case.validate()?;
    for j in 0..poles.len() {
        for k in (j + 1)..poles.len() {
            let dist = case.pole_distance(poles[j] - poles[k]);
            if dist < 1e-9 {
                return Err(Error::DegenerateConfiguration {
                    what: format!("poles {j} and {k} coincide"),
                    cond: f64::INFINITY,
                });
            }
        }
    }
    if dim == 0 {
        return Err(Error::Precondition("spin dimension must be positive".into()));
    }
    Ok(())
}

/// Solves the hermitian constraints at t = 0 for given poles and bras.
///
/// The kets enter the constraints together with their conjugates, so the
/// problem is a 2Nd×2Nd complex system in (e, ē) whose right-hand side is
/// linear in (v, v̄). It is solved once for each unit velocity, after which
/// the normalizations ⟨f_j|e_j⟩ = 1 and their conjugates form a 2N×2N system
/// for (v, v̄).
pub fn solve_initial_data(case: KernelCase, equation: Equation, poles: &[C64], bras: &[BraVec]) -> Result<SolitonData> {
    let n = poles.len();
    if bras.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bras.len() });
    }
    let d = bras.first().map_or(1, |f| f.dim());
    check_inputs(&case, poles, d)?;
    for (j, f) in bras.iter().enumerate() {
        if f.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: f.dim() });
        }
        if f.norm() == 0.0 {
            return Err(Error::Precondition(format!("bra {j} vanishes")));
        }
    }
    let probe = Family {
        poles: poles.to_vec(),
        vels: vec![C64::default(); n],
        kets: vec![KetVec::zeros(d); n],
        bras: bras.to_vec(),
    };
    check_strip(&case, equation, &probe, &probe.hermitian_mirror())?;

    let shift = equation.shift(&case);
    let nd = n * d;
    let f: Vec<&[C64]> = bras.iter().map(|b| b.row.as_slice()).collect();
    let mut m = DMatrix::<C64>::zeros(2 * nd, 2 * nd);
    for j in 0..n {
        for k in 0..n {
            let gram: C64 = f[j].iter().zip(f[k]).map(|(x, y)| x * y.conj()).sum();
            let beta = case.alpha(poles[j] - poles[k].conj() + shift)?;
            let cb = -I2 * gram * beta;
            for nu in 0..d {
                m[(j * d + nu, nd + k * d + nu)] += cb;
                m[(nd + j * d + nu, k * d + nu)] += cb.conj();
            }
            if k == j {
                continue;
            }
            let al = case.alpha(poles[j] - poles[k])?;
            for nu in 0..d {
                for mu in 0..d {
                    let ca = I2 * f[j][mu] * f[k][nu] * al;
                    m[(j * d + nu, k * d + mu)] += ca;
                    m[(nd + j * d + nu, nd + k * d + mu)] += ca.conj();
                }
            }
        }
    }
    let sv = linalg::singular_values(&m);
    let block_cond = sv[0] / sv[sv.len() - 1];
    if !(block_cond < SINGULAR_COND) {
        return Err(Error::DegenerateConfiguration {
            what: "singular constraint block matrix".into(),
            cond: block_cond,
        });
    }
    // Columns 0..n: unit v_j; columns n..2n: unit v̄_j.
    let mut rhs = DMatrix::<C64>::zeros(2 * nd, 2 * n);
    for j in 0..n {
        for nu in 0..d {
            rhs[(j * d + nu, j)] = f[j][nu];
            rhs[(nd + j * d + nu, n + j)] = f[j][nu].conj();
        }
    }
    let basis = m.clone().lu().solve(&rhs).ok_or(Error::DegenerateConfiguration {
        what: "singular constraint block matrix".into(),
        cond: block_cond,
    })?;

    let mut w = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for k in 0..n {
        for c in 0..2 * n {
            let mut top = C64::default();
            let mut bot = C64::default();
            for mu in 0..d {
                top += f[k][mu] * basis[(k * d + mu, c)];
                bot += f[k][mu].conj() * basis[(nd + k * d + mu, c)];
            }
            w[(k, c)] = top;
            w[(n + k, c)] = bot;
        }
    }
    let svw = linalg::singular_values(&w);
    let vel_cond = svw[0] / svw[svw.len() - 1];
    if !(vel_cond < SINGULAR_COND) {
        return Err(Error::DegenerateVelocity { cond: vel_cond });
    }
    let ones = nalgebra::DVector::from_element(2 * n, C64::new(1.0, 0.0));
    let z = w.lu().solve(&ones).ok_or(Error::DegenerateVelocity { cond: vel_cond })?;
    let x = &basis * &z;
    let vels: Vec<C64> = (0..n).map(|j| z[j]).collect();
    let kets: Vec<KetVec> = (0..n)
        .map(|k| KetVec::new((0..d).map(|mu| x[k * d + mu]).collect()))
        .collect();

    let a = Family {
        poles: poles.to_vec(),
        vels,
        kets,
        bras: bras.to_vec(),
    };
    let data = SolitonData {
        case,
        equation,
        hermitian: true,
        a,
        b: None,
        dim: d,
        tol: CERT_TOL,
        conditioning: Conditioning {
            block: block_cond,
            velocity: vel_cond,
            flagged: block_cond > COND_FLAG || vel_cond > COND_FLAG,
        },
    };
    if data.conditioning.flagged {
        log::warn!("ill-conditioned construction: block {block_cond:.2e}, velocity {vel_cond:.2e}");
    }
    finish(data)
}

fn finish(data: SolitonData) -> Result<SolitonData> {
    let rep = data.certify();
    if !rep.strip_ok {
        return Err(Error::StripViolation(format!("margin {:.3e}", rep.strip_margin)));
    }
    if let Some((class, residual)) = rep
        .classes()
        .into_iter()
        .filter(|(c, _)| *c != "strip_margin")
        .find(|(_, r)| !(*r < data.tol))
    {
        return Err(Error::ConstructionFailed {
            class: class.into(),
            residual,
            tol: data.tol,
        });
    }
    Ok(data)
}

/// Matrix and right-hand side of the bordered system for the unknowns
/// (e_1..e_N, h_1..h_M, v_1..v_N, w_1..w_M) given a-bras F and b-kets G.
fn bordered(
    case: &KernelCase,
    a: &[C64],
    b: &[C64],
    f: &[Vec<C64>],
    g: &[Vec<C64>],
    shift: C64,
) -> Result<(DMatrix<C64>, Vec<C64>)> {
    let n = a.len();
    let m = b.len();
    let d = f.first().or(g.first()).map_or(1, |v| v.len());
    let nd = (n + m) * d;
    let size = nd + n + m;
    let mut mat = DMatrix::<C64>::zeros(size, size);
    let e_col = |k: usize, mu: usize| k * d + mu;
    let h_col = |k: usize, nu: usize| n * d + k * d + nu;
    for j in 0..n {
        for nu in 0..d {
            let row = j * d + nu;
            for k in 0..n {
                if k == j {
                    continue;
                }
                let al = case.alpha(a[j] - a[k])?;
                for mu in 0..d {
                    mat[(row, e_col(k, mu))] += I2 * f[j][mu] * f[k][nu] * al;
                }
            }
            for k in 0..m {
                let c = -I2 * dot(&f[j], &g[k]) * case.alpha(a[j] - b[k] + shift)?;
                mat[(row, h_col(k, nu))] += c;
            }
            mat[(row, nd + j)] = -f[j][nu];
        }
    }
    for j in 0..m {
        for mu in 0..d {
            let row = n * d + j * d + mu;
            for k in 0..m {
                if k == j {
                    continue;
                }
                let al = case.alpha(b[j] - b[k])?;
                for nu in 0..d {
                    mat[(row, h_col(k, nu))] += -I2 * g[k][mu] * g[j][nu] * al;
                }
            }
            for k in 0..n {
                let c = I2 * dot(&f[k], &g[j]) * case.alpha(b[j] - a[k] + shift)?;
                mat[(row, e_col(k, mu))] += c;
            }
            mat[(row, nd + n + j)] = -g[j][mu];
        }
    }
    for j in 0..n {
        for mu in 0..d {
            mat[(nd + j, e_col(j, mu))] = f[j][mu];
        }
    }
    for j in 0..m {
        for nu in 0..d {
            mat[(nd + n + j, h_col(j, nu))] = g[j][nu];
        }
    }
    let mut rhs = vec![C64::default(); size];
    for r in rhs.iter_mut().skip(nd) {
        *r = C64::new(1.0, 0.0);
    }
    Ok((mat, rhs))
}

/// Solves the general (two-family) constraints at t = 0 for given poles,
/// a-bras ⟨f_j| and b-kets |g_j⟩. The unknown kets e_j, bras h_j and
/// velocities v_j, w_j satisfy a square linear system; when it is rank
/// deficient but consistent (for instance N = 1, M = 0 with d > 1) the
/// minimum-norm solution is returned and the conditioning is flagged.
pub fn solve_general_initial_data(
    case: KernelCase,
    equation: Equation,
    a_poles: &[C64],
    b_poles: &[C64],
    bras_f: &[BraVec],
    kets_g: &[KetVec],
) -> Result<SolitonData> {
    let n = a_poles.len();
    let m = b_poles.len();
    if bras_f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bras_f.len() });
    }
    if kets_g.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: kets_g.len() });
    }
    let d = bras_f.first().map(|f| f.dim()).or(kets_g.first().map(|g| g.dim())).unwrap_or(1);
    check_inputs(&case, a_poles, d)?;
    check_inputs(&case, b_poles, d)?;
    let f: Vec<Vec<C64>> = bras_f.iter().map(|x| x.row.clone()).collect();
    let g: Vec<Vec<C64>> = kets_g.iter().map(|x| x.data.clone()).collect();
    if f.iter().chain(&g).any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: 0 });
    }
    let shift = equation.shift(&case);
    let (mat, rhs) = bordered(&case, a_poles, b_poles, &f, &g, shift)?;
    let sol = linalg::lstsq(&mat, &rhs, 1e-12);
    let xmax = sol.x.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !(sol.residual < 1e-10 * xmax) {
        return Err(Error::DegenerateConfiguration {
            what: format!("inconsistent constraint system (residual {:.2e})", sol.residual),
            cond: sol.cond,
        });
    }
    let x = sol.x;
    let nd = (n + m) * d;
    let a = Family {
        poles: a_poles.to_vec(),
        vels: x[nd..nd + n].to_vec(),
        kets: (0..n).map(|k| KetVec::new(x[k * d..(k + 1) * d].to_vec())).collect(),
        bras: bras_f.to_vec(),
    };
    let b = Family {
        poles: b_poles.to_vec(),
        vels: x[nd + n..].to_vec(),
        kets: kets_g.to_vec(),
        bras: (0..m)
            .map(|k| BraVec::from_row(x[n * d + k * d..n * d + (k + 1) * d].to_vec()))
            .collect(),
    };
    let data = SolitonData {
        case,
        equation,
        hermitian: false,
        a,
        b: Some(b),
        dim: d,
        tol: CERT_TOL,
        conditioning: Conditioning {
            block: sol.cond,
            velocity: sol.cond,
            flagged: sol.cond > COND_FLAG,
        },
    };
    // Strip conditions only matter for field evaluation; the report carries
    // them, the constraint residuals decide success here.
    let rep = certify_families(&case, equation, &data.a, &data.second(), shift, data.tol);
    if let Some((class, residual)) = rep
        .classes()
        .into_iter()
        .filter(|(c, _)| *c != "strip_margin")
        .find(|(_, r)| !(*r < data.tol))
    {
        return Err(Error::ConstructionFailed {
            class: class.into(),
            residual,
            tol: data.tol,
        });
    }
    Ok(data)
}

/// Band from which random poles are drawn.
#[derive(Clone, Copy, Debug)]
pub struct PoleBand {
    pub re: (f64, f64),
    /// Range of Im for the lower family; the upper family is mirrored.
    pub im: (f64, f64),
    pub min_sep: f64,
}

impl PoleBand {
    pub fn for_case(case: &KernelCase, eq: Equation) -> PoleBand {
        match (eq, case.kind) {
            (Equation::Sncilw, _) => {
                let d = case.delta().unwrap_or(1.0);
                PoleBand {
                    re: (-2.0 * d.max(1.0), 2.0 * d.max(1.0)),
                    im: (-1.35 * d, -0.65 * d),
                    min_sep: 0.3 * d.min(1.0),
                }
            }
            (_, KernelKind::Trigonometric) => {
                let l = case.period().unwrap_or(1.0);
                let s = (l / (2.0 * std::f64::consts::PI)).min(1.0);
                PoleBand {
                    re: (0.0, l),
                    im: (-1.4 * s, -0.4 * s),
                    min_sep: 0.3 * s,
                }
            }
            (_, KernelKind::Hyperbolic) => {
                let d = case.delta().unwrap_or(1.0);
                let s = d.min(1.0);
                PoleBand {
                    re: (-2.0, 2.0),
                    im: (-0.9 * s, -0.3 * s),
                    min_sep: 0.3 * s,
                }
            }
            (_, KernelKind::Rational) => PoleBand {
                re: (-2.0, 2.0),
                im: (-1.4, -0.4),
                min_sep: 0.3,
            },
        }
    }
}

/// Random poles in the lower band (or its mirror when `upper`), pairwise
/// separated by at least the band's `min_sep`.
pub fn sample_poles<R: Rng>(case: &KernelCase, band: &PoleBand, n: usize, upper: bool, rng: &mut R) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        let z = C64::new(rng.gen_range(band.re.0..band.re.1), rng.gen_range(band.im.0..band.im.1));
        let z = if upper { z.conj() } else { z };
        tries += 1;
        if tries > 10_000 || out.iter().all(|w| case.pole_distance(z - w) >= band.min_sep) {
            out.push(z);
        }
    }
    out
}

fn random_unit<R: Rng>(d: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.1 {
            return v.into_iter().map(|z| z / nrm).collect();
        }
    }
}

/// Unit-norm random bras.
pub fn random_bras<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<BraVec> {
    (0..n).map(|_| BraVec::from_row(random_unit(d, rng))).collect()
}

/// Random certified hermitian soliton data; retries on degenerate draws.
pub fn generate_hermitian<R: Rng>(case: KernelCase, equation: Equation, n: usize, d: usize, rng: &mut R) -> Result<SolitonData> {
    let band = PoleBand::for_case(&case, equation);
    let mut last = None;
    for _ in 0..50 {
        let poles = sample_poles(&case, &band, n, false, rng);
        let bras = random_bras(n, d, rng);
        match solve_initial_data(case, equation, &poles, &bras) {
            Ok(data) if !data.conditioning.flagged && max_ket(&data.a) < 1e3 => return Ok(data),
            Ok(data) => last = Some(Error::DegenerateVelocity { cond: data.conditioning.velocity }),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::Precondition("no attempts".into())))
}

fn max_ket(f: &Family) -> f64 {
    f.kets
        .iter()
        .map(|k| k.norm())
        .chain(f.bras.iter().map(|b| b.norm()))
        .fold(0.0, f64::max)
}

/// Random certified general (two-family) data with N a-poles in the lower
/// band and M b-poles in the upper band.
///
/// When N + M is odd and the kernel constant is nonzero the bordered system
/// is singular and generically inconsistent. The random bras and kets are
/// then moved (with unit norm kept) until the right-hand side lies in the
/// range of the matrix, by least squares on the projection of the
/// right-hand side onto the left null space. Draws whose solution is
/// ill-scaled are discarded.
pub fn generate_general<R: Rng>(
    case: KernelCase,
    equation: Equation,
    n: usize,
    m: usize,
    d: usize,
    rng: &mut R,
) -> Result<SolitonData> {
    let band = PoleBand::for_case(&case, equation);
    let shift = equation.shift(&case);
    let mut last = None;
    for _ in 0..50 {
        let a = sample_poles(&case, &band, n, false, rng);
        let b = sample_poles(&case, &band, m, true, rng);
        let mut f: Vec<Vec<C64>> = (0..n).map(|_| random_unit(d, rng)).collect();
        let mut g: Vec<Vec<C64>> = (0..m).map(|_| random_unit(d, rng)).collect();

        let (mat, rhs) = bordered(&case, &a, &b, &f, &g, shift)?;
        let sol = linalg::lstsq(&mat, &rhs, 1e-10);
        if sol.nullity > 0 && sol.residual > 1e-12 {
            let k = sol.nullity;
            let unpack = |p: &[f64]| -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
                let half = p.len() / 2;
                let z: Vec<C64> = (0..half).map(|i| C64::new(p[i], p[half + i])).collect();
                let norm = |v: &[C64]| {
                    let s = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                    v.iter().map(|x| x / s).collect::<Vec<_>>()
                };
                let f = (0..n).map(|j| norm(&z[j * d..(j + 1) * d])).collect();
                let g = (0..m).map(|j| norm(&z[(n + j) * d..(n + j + 1) * d])).collect();
                (f, g)
            };
            let resid = |p: &[f64]| -> Vec<f64> {
                let (f, g) = unpack(p);
                let Ok((mat, rhs)) = bordered(&case, &a, &b, &f, &g, shift) else {
                    return vec![1e6; 2 * rhs.len()];
                };
                let u = linalg::left_null_basis(&mat, k);
                let r = nalgebra::DVector::from_column_slice(&rhs);
                let c = &u * (u.adjoint() * &r);
                c.iter().map(|z| z.re).chain(c.iter().map(|z| z.im)).collect()
            };
            let z: Vec<C64> = f.iter().chain(&g).flatten().copied().collect();
            let p0: Vec<f64> = z.iter().map(|z| z.re).chain(z.iter().map(|z| z.im)).collect();
            let (p, _) = linalg::levenberg_marquardt(resid, p0, 200, 1e-15);
            let (f2, g2) = unpack(&p);
            f = f2;
            g = g2;
        }
        let bras: Vec<BraVec> = f.into_iter().map(BraVec::from_row).collect();
        let kets: Vec<KetVec> = g.into_iter().map(KetVec::new).collect();
        match solve_general_initial_data(case, equation, &a, &b, &bras, &kets) {
            Ok(data) => {
                let scale = max_ket(&data.a).max(data.b.as_ref().map_or(0.0, max_ket));
                if scale < 1e3 && data.certify().max_residual() < 1e-11 {
                    return Ok(data);
                }
                last = Some(Error::ConstructionFailed {
                    class: "scale".into(),
                    residual: scale,
                    tol: 1e3,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::Precondition("no attempts".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn one_soliton_rational() {
        let f = BraVec::from_row(vec![r(1.0), r(0.0), r(0.0)]);
        let data = solve_initial_data(KernelCase::rational(), Equation::Sbo, &[C64::new(0.0, -1.0)], &[f]).unwrap();
        assert!((data.a.vels[0] - r(1.0)).norm() < 1e-13);
        assert!((data.a.kets[0].data[0] - r(1.0)).norm() < 1e-13);
    }

    #[test]
    fn non_interacting_pair() {
        let f1 = BraVec::from_row(vec![r(1.0), r(0.0)]);
        let f2 = BraVec::from_row(vec![r(0.0), r(1.0)]);
        let poles = [C64::new(0.0, -1.0), C64::new(1.0, -2.0)];
        let data = solve_initial_data(KernelCase::rational(), Equation::Sbo, &poles, &[f1, f2]).unwrap();
        assert!((data.a.vels[0] - r(1.0)).norm() < 1e-13);
        assert!((data.a.vels[1] - r(0.5)).norm() < 1e-13);
    }

    #[test]
    fn coincident_poles_rejected() {
        let f = BraVec::from_row(vec![r(1.0)]);
        let z = C64::new(0.0, -1.0);
        let e = solve_initial_data(KernelCase::rational(), Equation::Sbo, &[z, z], &[f.clone(), f]).unwrap_err();
        assert_eq!(e.kind(), "degenerate-configuration");
    }

    #[test]
    fn general_odd_count_is_generated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let case = KernelCase::trigonometric(2.0 * std::f64::consts::PI).unwrap();
        let data = generate_general(case, Equation::Sbo, 2, 1, 2, &mut rng).unwrap();
        assert!(data.certify().max_residual() < 1e-10);
    }

    #[test]
    fn single_pole_without_partner() {
        let f = BraVec::from_row(vec![r(1.0), C64::new(0.0, 1.0)]);
        let data =
            solve_general_initial_data(KernelCase::rational(), Equation::Sbo, &[C64::new(0.0, -1.0)], &[], &[f], &[])
                .unwrap();
        assert!(data.a.vels[0].norm() < 1e-14);
    }
}
