//! Monte Carlo merge schedulers.
//!
//! Trials are driven by counter-based RNG streams keyed on (seed, trial), so
//! results are identical whatever the thread count.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::combinatorics::{
    detection_distribution, doubling_d, number_resolved_input_size, number_resolved_levels,
    one_by_one_q_closed,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MergeStrategy {
    OneByOne,
    Doubling,
    /// Number-resolved merging, capping every successful merge at the
    /// guaranteed worst-case size (excess trimmed away).
    NumberResolvedWorstCase,
    /// Number-resolved merging keeping whatever excitation count the
    /// detection left behind.
    NumberResolvedRealistic,
}

#[derive(Clone, Debug, Serialize)]
pub struct SchedulerStats {
    pub strategy: MergeStrategy,
    pub target: u64,
    pub p: f64,
    pub trials: u64,
    /// Mean heralding + merge operations per prepared state.
    pub mean_ops: f64,
    /// Sample standard deviation of the per-trial operation count.
    pub std_ops: f64,
    /// Standard error of `mean_ops`.
    pub std_err: f64,
    /// Mean trim attempts (worst-case number-resolved mode only).
    pub mean_trim_attempts: f64,
    /// Mean excitation count actually reached (≥ target for number-resolved
    /// realistic mode).
    pub mean_achieved: f64,
    /// Merge levels in the tree.
    pub levels: u32,
    pub max_ops: f64,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn geometric(rng: &mut ChaCha12Rng, p: f64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    let u: f64 = rng.random();
    ((1.0 - u).ln() / (1.0 - p).ln()).floor() + 1.0
}

/// Shared cache of detection CDFs keyed by input sizes.
struct DistCache {
    inner: Mutex<HashMap<(u64, u64), Vec<f64>>>,
}

impl DistCache {
    fn new() -> Self {
        DistCache {
            inner: Mutex::new(HashMap::new()),
        }
    }

    fn cdf(&self, k1: u64, k2: u64) -> Vec<f64> {
        let mut guard = self.inner.lock().unwrap();
        guard
            .entry((k1, k2))
            .or_insert_with(|| {
                let dist = detection_distribution(k1, k2);
                let mut acc = 0.0;
                dist.iter()
                    .map(|d| {
                        acc += d;
                        acc
                    })
                    .collect()
            })
            .clone()
    }

    fn sample(&self, rng: &mut ChaCha12Rng, k1: u64, k2: u64) -> u64 {
        let cdf = self.cdf(k1, k2);
        let u: f64 = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
        cdf.iter().position(|&c| c >= u).unwrap_or(cdf.len() - 1) as u64
    }
}

struct TrialOutcome {
    ops: f64,
    trims: f64,
    achieved: u64,
}

fn one_by_one_trial(rng: &mut ChaCha12Rng, m: u64, p: f64) -> TrialOutcome {
    // R_m = (1 + R_{m-1}) / q_{m-1}: each attempt consumes the register and
    // one merge operation
    fn build(rng: &mut ChaCha12Rng, m: u64, p: f64) -> f64 {
        if m == 1 {
            return geometric(rng, p);
        }
        let q = one_by_one_q_closed(m - 1);
        let mut ops = 0.0;
        loop {
            ops += build(rng, m - 1, p) + 1.0;
            if rng.random::<f64>() < q {
                return ops;
            }
        }
    }
    TrialOutcome {
        ops: build(rng, m, p),
        trims: 0.0,
        achieved: m,
    }
}

fn doubling_trial(rng: &mut ChaCha12Rng, m: u64, p: f64) -> TrialOutcome {
    assert!(m.is_power_of_two(), "doubling scheduler needs a power of two");
    fn build(rng: &mut ChaCha12Rng, m: u64, p: f64) -> f64 {
        if m == 1 {
            return geometric(rng, p);
        }
        let d = doubling_d(m / 2);
        let mut ops = 0.0;
        loop {
            ops += build(rng, m / 2, p) + build(rng, m / 2, p) + 1.0;
            if rng.random::<f64>() < d {
                return ops;
            }
        }
    }
    TrialOutcome {
        ops: build(rng, m, p),
        trims: 0.0,
        achieved: m,
    }
}

fn number_resolved_trial(
    rng: &mut ChaCha12Rng,
    m: u64,
    p: f64,
    worst_case: bool,
    cache: &DistCache,
) -> TrialOutcome {
    // returns (achieved size, ops, trim attempts)
    fn build(
        rng: &mut ChaCha12Rng,
        m: u64,
        p: f64,
        worst_case: bool,
        cache: &DistCache,
    ) -> (u64, f64, f64) {
        if m <= 1 {
            return (1, geometric(rng, p), 0.0);
        }
        let k = number_resolved_input_size(m);
        let mut ops = 0.0;
        let mut trims = 0.0;
        loop {
            let (n1, o1, t1) = build(rng, k, p, worst_case, cache);
            let (n2, o2, t2) = build(rng, k, p, worst_case, cache);
            ops += o1 + o2 + 1.0;
            trims += t1 + t2;
            let q = cache.sample(rng, n1, n2);
            let success = 4 * q < n1 + n2;
            if success {
                let result = n1 + n2 - q;
                if worst_case && result > m {
                    // trim down to the level size; each removed excitation
                    // takes ≈ 1/(θ²n) = 10 attempts at the largest allowed
                    // tap angle θ² = 0.1/n
                    trims += 10.0 * (result - m) as f64;
                    return (m, ops, trims);
                }
                return (result.max(m), ops, trims);
            }
        }
    }
    let (achieved, ops, trims) = build(rng, m, p, worst_case, cache);
    TrialOutcome {
        ops,
        trims,
        achieved,
    }
}

/// Run the Monte Carlo scheduler.
pub fn simulate(
    strategy: MergeStrategy,
    target: u64,
    p: f64,
    n_trials: u64,
    seed: u64,
) -> SchedulerStats {
    assert!(target >= 1 && n_trials >= 1);
    assert!(p > 0.0 && p <= 1.0);
    let cache = DistCache::new();
    // warm the cache along the deterministic worst-case chain so parallel
    // trials rarely contend
    if matches!(
        strategy,
        MergeStrategy::NumberResolvedWorstCase | MergeStrategy::NumberResolvedRealistic
    ) {
        let mut size = target;
        while size > 1 {
            let k = number_resolved_input_size(size);
            cache.cdf(k, k);
            size = k;
        }
    }

    let outcomes: Vec<TrialOutcome> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            match strategy {
                MergeStrategy::OneByOne => one_by_one_trial(&mut rng, target, p),
                MergeStrategy::Doubling => doubling_trial(&mut rng, target, p),
                MergeStrategy::NumberResolvedWorstCase => {
                    number_resolved_trial(&mut rng, target, p, true, &cache)
                }
                MergeStrategy::NumberResolvedRealistic => {
                    number_resolved_trial(&mut rng, target, p, false, &cache)
                }
            }
        })
        .collect();

    let n = n_trials as f64;
    let mean_ops = outcomes.iter().map(|o| o.ops).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|o| (o.ops - mean_ops).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let std_ops = var.sqrt();
    let levels = match strategy {
        MergeStrategy::OneByOne => target.saturating_sub(1) as u32,
        MergeStrategy::Doubling => (target as f64).log2().ceil() as u32,
        _ => number_resolved_levels(target),
    };
    SchedulerStats {
        strategy,
        target,
        p,
        trials: n_trials,
        mean_ops,
        std_ops,
        std_err: std_ops / n.sqrt(),
        mean_trim_attempts: outcomes.iter().map(|o| o.trims).sum::<f64>() / n,
        mean_achieved: outcomes.iter().map(|o| o.achieved as f64).sum::<f64>() / n,
        levels,
        max_ops: outcomes.iter().map(|o| o.ops).fold(0.0, f64::max),
    }
}
