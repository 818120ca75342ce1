//! The four heralded excitation-loading protocols.
//!
//! Each submodule analyzes one scheme for adding a single collective
//! excitation to a target ensemble:
//!
//! * [`weak_drive`] — weak coherent pulse plus waveguide photon detection
//!   (heralding by a photon click, limited by double excitations).
//! * [`two_step`] — a source atom injects the excitation through a Zeno
//!   transfer and a detector ensemble absorbs and heralds it; post-selection
//!   removes every error at the price of restarting on failure.
//! * [`fast_pi`] — stores heralded excitations in auxiliary levels so
//!   failures do not destroy previous work; heralds with one detector atom
//!   through a fast π-pulse window.
//! * [`single_step`] — one shot through two waveguide modes with different
//!   rates, needing no closed transition.
//!
//! All closed forms work in units Γ* = 1, Γ_1d = P_1d.

pub mod fast_pi;
pub mod single_step;
pub mod two_step;
pub mod weak_drive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical parameters of one protocol instance. Rates are in units of Γ*.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Target ensemble size.
    pub n: u32,
    /// Detector ensemble size.
    pub n_d: u32,
    /// Purcell factor Γ_1d/Γ*.
    pub purcell: f64,
    /// Photon-detector efficiency (weak-drive protocol).
    pub eta: f64,
    /// Residual spontaneous-emission fraction of the closed transition.
    pub alpha: f64,
    /// Excitations already stored.
    pub stored: u32,
    /// Weak-drive amplitude x = Ω√N T/2.
    pub x: f64,
    /// Coefficient of the 1/(N P_1d) repump error.
    pub pump_coefficient: f64,
}

impl PhysicalParams {
    /// Defaults: one detector atom, perfect photon detector, x = 0.1, no
    /// stored excitations, α = 1/√P_1d, repump coefficient 1.
    pub fn new(n: u32, purcell: f64) -> Self {
        PhysicalParams {
            n,
            n_d: 1,
            purcell,
            eta: 1.0,
            alpha: 1.0 / purcell.sqrt(),
            stored: 0,
            x: 0.1,
            pump_coefficient: 1.0,
        }
    }

    pub fn with_detectors(mut self, n_d: u32) -> Self {
        self.n_d = n_d;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_stored(mut self, m: u32) -> Self {
        self.stored = m;
        self
    }

    pub fn with_x(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    pub fn gamma_1d(&self) -> f64 {
        self.purcell
    }

    pub fn gamma_star(&self) -> f64 {
        1.0
    }

    /// Check the invariants; returns advisory warnings for soft limits.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidInput(format!("η = {} outside [0,1]", self.eta)));
        }
        if self.x <= 0.0 || self.x > 0.3 {
            return Err(Error::InvalidInput(format!(
                "x = {} outside the weak-drive range (0, 0.3]",
                self.x
            )));
        }
        if self.stored >= self.n {
            return Err(Error::InvalidInput(format!(
                "m = {} must stay below N = {}",
                self.stored, self.n
            )));
        }
        if self.purcell <= 0.0 {
            return Err(Error::InvalidInput("Purcell factor must be positive".into()));
        }
        let mut warnings = Vec::new();
        if self.x > 0.1 {
            warnings.push(format!(
                "x = {} is large for the O(x³) truncation; expect percent-level bias",
                self.x
            ));
        }
        Ok(warnings)
    }
}

/// Outcome of a single heralding step.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StepReport {
    /// Heralding success probability.
    pub p: f64,
    /// First-stage (source → target) transfer probability.
    pub p_a: f64,
    /// Second-stage (herald) probability.
    pub p_b: f64,
    /// Collective photon emitted but not detected.
    pub p_coll_undetected: f64,
    /// Free-space jump in the source atom per attempt.
    pub p_free_source: f64,
    /// Free-space jump in the target ensemble per attempt.
    pub p_free_target: f64,
    /// Free-space jump in the detector ensemble per attempt.
    pub p_free_detector: f64,
    /// Free-space emission during repumping per attempt.
    pub p_repump: f64,
    /// Heralded error from double excitations.
    pub eps_double: f64,
    /// Error per failed attempt on the stored state.
    pub eps_fail: f64,
    /// Heralded error from the imperfectly closed transition.
    pub eps_closed: f64,
    /// Infidelity of one accumulated excitation, averaged over the ~1/p
    /// repetitions.
    pub i_step: f64,
}

/// One step of an accumulation trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AccumStep {
    pub index: u32,
    pub p: f64,
    pub i_step: f64,
}

/// Cost and error of accumulating a number of excitations.
#[derive(Clone, Debug, Serialize)]
pub struct AccumulationReport {
    /// Expected number of operations.
    pub r_m: f64,
    /// Accumulated infidelity.
    pub i_m: f64,
    pub steps: Vec<AccumStep>,
}

/// Empirical repeat-until-success statistics.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RepetitionStats {
    pub trials: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
    pub max: u64,
}

/// Sample the number of attempts until first success at probability `p`,
/// `n_trials` times. Per-trial RNG streams keyed on (seed, trial) keep the
/// result independent of scheduling.
pub fn monte_carlo_repetitions(p: f64, n_trials: u64, seed: u64) -> Result<RepetitionStats> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!("p = {p} outside (0, 1]")));
    }
    if n_trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let counts: Vec<u64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            if p >= 1.0 {
                1
            } else {
                let u: f64 = rng.random();
                ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64 + 1
            }
        })
        .collect();
    let n = n_trials as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    Ok(RepetitionStats {
        trials: n_trials,
        mean,
        std_dev: var.sqrt(),
        std_err: var.sqrt() / n.sqrt(),
        max: counts.iter().copied().max().unwrap_or(0),
    })
}
