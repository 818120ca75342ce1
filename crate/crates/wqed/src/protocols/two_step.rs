//! Two-step heralding through a source atom and a detector ensemble.
//!
//! Step a: the source atom hands its excitation to the target ensemble via
//! a Zeno transfer. Step b: the target hands a mapped copy to the detector
//! ensemble the same way; finding the detector ensemble flipped heralds
//! success. Any spontaneous emission or photon loss is incompatible with the
//! heralding outcome, so the post-selected infidelity is exactly zero; the
//! cost is restarting from scratch on failure, R_m = p^{−m}.

use crate::zeno;
use crate::{Error, Result};

use super::{AccumStep, AccumulationReport, PhysicalParams, StepReport};

/// One heralded transfer: p_a from the source→target Zeno step (k = 0,
/// N_b = N − m), p_b from the target→detector step (k = m, N_b = N_d).
pub fn step(params: &PhysicalParams) -> Result<StepReport> {
    if params.stored >= params.n {
        return Err(Error::InvalidInput("need N > m".into()));
    }
    if params.n_d < 1 {
        return Err(Error::InvalidInput("need at least one detector atom".into()));
    }
    let p_a = zeno::success_probability(0, params.n - params.stored, params.purcell);
    let p_b = zeno::success_probability(params.stored, params.n_d, params.purcell);
    Ok(StepReport {
        p: p_a * p_b,
        p_a,
        p_b,
        // heralding is error-free: post-selection rules every error out
        i_step: 0.0,
        ..StepReport::default()
    })
}

/// R_m = p^{−m_target} with the step probability of this instance; the
/// stored-state infidelity stays identically zero.
pub fn accumulate(params: &PhysicalParams, m_target: u32) -> Result<AccumulationReport> {
    if m_target < 1 {
        return Err(Error::InvalidInput("need m_target ≥ 1".into()));
    }
    let s = step(params)?;
    if !(s.p > 0.0 && s.p <= 1.0) {
        return Err(Error::InvalidInput(format!("p = {} outside (0, 1]", s.p)));
    }
    let steps = (0..m_target)
        .map(|index| AccumStep {
            index,
            p: s.p,
            i_step: 0.0,
        })
        .collect();
    Ok(AccumulationReport {
        r_m: s.p.powi(-(m_target as i32)),
        i_m: 0.0,
        steps,
    })
}

/// Excitation number reachable with a repetition budget R at a given Purcell
/// factor, in the N, N_d ≫ m limit where p = p_a² = e^{−2π/√P_1d}:
/// m = ⌊ln R / ln(1/p)⌋.
pub fn reachable_excitations(r_budget: f64, p1d: f64) -> u32 {
    let ln_inv_p = 2.0 * std::f64::consts::PI / p1d.sqrt();
    let m = r_budget.ln() / ln_inv_p;
    if m >= u32::MAX as f64 {
        u32::MAX
    } else {
        m.floor() as u32
    }
}
