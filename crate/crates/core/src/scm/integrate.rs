use serde::{Deserialize, Serialize};

use super::{pack_derivative, pack_state, scm_rhs, unpack_state, ScmState};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Sample times; the final time is always appended.
    pub samples: Vec<f64>,
    /// Rescale kets after every step so that ⟨f_j|e_j⟩ = 1.
    pub renormalize: bool,
    pub drift_warn: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            samples: vec![],
            renormalize: false,
            drift_warn: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<ScmState>,
    /// max_j |⟨f_j|e_j⟩ − 1| per sample.
    pub drift: Vec<f64>,
    pub warnings: Vec<String>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn last(&self) -> &ScmState {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }
}

/// Integrates the second-order sCM system (both families when present) from
/// `state.time` to `t_end`.
pub fn integrate(state: &ScmState, t_end: f64, opts: &IntegrateOptions) -> Result<Trajectory> {
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::Precondition("tolerances must be positive".into()));
    }
    state.validate_shapes()?;
    let template = state.clone();
    let y0 = pack_state(state);
    let mut times = opts.samples.clone();
    times.push(t_end);
    let ode_opts = OdeOptions::tol(opts.rel_tol, opts.abs_tol);

    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        let s = unpack_state(&template, t, y);
        let der = scm_rhs(&s)?;
        pack_derivative(&der, dy);
        Ok(())
    };
    let renorm = opts.renormalize;
    let mut last = (state.time, y0.clone());
    let after = |t: f64, y: &mut [C64]| -> Result<bool> {
        last = (t, y.to_vec());
        if !renorm {
            return Ok(false);
        }
        let mut s = unpack_state(&template, t, y);
        s.a.renormalize();
        if let Some(b) = s.b.as_mut() {
            b.renormalize();
        }
        y.copy_from_slice(&pack_state(&s));
        Ok(true)
    };

    let sol = match ode::integrate(rhs, state.time, &y0, t_end, &times, &ode_opts, after) {
        Ok(sol) => sol,
        Err(Error::StepUnderflow { t, h, .. }) => {
            let s = unpack_state(&template, last.0, &last.1);
            let (i, j, distance) = s.closest_pair().unwrap_or((0, 0, f64::NAN));
            return Err(Error::StepUnderflow { t, h, i, j, distance });
        }
        Err(e) => return Err(e),
    };

    let mut states = Vec::with_capacity(sol.samples.len());
    let mut drift = Vec::with_capacity(sol.samples.len());
    let mut warnings = Vec::new();
    for (t, y) in &sol.samples {
        let s = unpack_state(&template, *t, y);
        let dr = s.constraint_drift();
        if dr > opts.drift_warn {
            let msg = format!("constraint drift {dr:.3e} at t={t}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        drift.push(dr);
        states.push(s);
    }
    Ok(Trajectory {
        states,
        drift,
        warnings,
        stats: sol.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::Family;
    use crate::spin::{BraVec, KetVec};
    use crate::KernelCase;

    #[test]
    fn free_particle() {
        let fam = Family::new(
            vec![C64::new(0.5, -1.0)],
            vec![C64::new(0.7, 0.1)],
            vec![KetVec::new(vec![C64::new(1.0, 0.0)])],
            vec![BraVec::from_row(vec![C64::new(1.0, 0.0)])],
        )
        .unwrap();
        let s = ScmState::new(KernelCase::rational(), 1, fam, None).unwrap();
        let tr = integrate(&s, 2.0, &IntegrateOptions::default()).unwrap();
        let a = tr.last().a.poles[0];
        assert!((a - C64::new(0.5 + 1.4, -1.0 + 0.2)).norm() < 1e-12);
    }
}
