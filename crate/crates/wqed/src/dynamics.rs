//! Open-system engine: non-Hermitian propagation, Lindblad integration, and
//! jump-resolved probabilities.
//!
//! Channels are in standard form: rate γ with dissipator
//! γ (O ρ O† − ½{O†O, ρ}). The no-jump evolution is generated by
//! H_eff = H − (i/2) Σ γ O†O.

use std::collections::BTreeMap;

use crate::linalg::{c64, expm, hermitian_eigen, max_abs, CMat, CVec};
use crate::ode::integrate_adaptive;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    CollectiveWaveguide,
    FreeSpace,
}

#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub label: String,
    pub kind: ChannelKind,
    pub rate: f64,
    pub op: CMat,
}

impl JumpChannel {
    pub fn waveguide(label: &str, rate: f64, op: CMat) -> Self {
        JumpChannel {
            label: label.to_string(),
            kind: ChannelKind::CollectiveWaveguide,
            rate,
            op,
        }
    }

    pub fn free_space(label: &str, rate: f64, op: CMat) -> Self {
        JumpChannel {
            label: label.to_string(),
            kind: ChannelKind::FreeSpace,
            rate,
            op,
        }
    }
}

/// Hermitian drive plus weighted jump channels over a finite basis.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub hamiltonian: CMat,
    pub channels: Vec<JumpChannel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: CMat, channels: Vec<JumpChannel>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d {
            return Err(Error::Dimension("hamiltonian must be square".into()));
        }
        for ch in &channels {
            if ch.rate < 0.0 || !ch.rate.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "channel '{}' has invalid rate {}",
                    ch.label, ch.rate
                )));
            }
            if ch.op.nrows() != d || ch.op.ncols() != d {
                return Err(Error::Dimension(format!(
                    "channel '{}' operator is {}x{}, expected {d}x{d}",
                    ch.label,
                    ch.op.nrows(),
                    ch.op.ncols()
                )));
            }
        }
        Ok(LindbladModel {
            hamiltonian,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// H_eff = H − (i/2) Σ γ O†O.
    pub fn effective_hamiltonian(&self) -> CMat {
        let mut h = self.hamiltonian.clone();
        for ch in &self.channels {
            h += ch.op.adjoint() * &ch.op * c64(0.0, -0.5 * ch.rate);
        }
        h
    }

    /// Largest eigenvalue of (H_eff − H_eff†)/(2i); must be ≤ tol for a
    /// physical model (the anti-Hermitian part only removes norm).
    pub fn antihermitian_violation(&self) -> f64 {
        let h = self.effective_hamiltonian();
        // (H_eff − H_eff†)/(2i) = −½ Σ γ O†O is Hermitian negative semidefinite
        let a = (&h - h.adjoint()) * c64(0.0, -0.5);
        crate::linalg::hermitian_eigenvalues(&a)
            .last()
            .copied()
            .unwrap_or(0.0)
    }

    /// Right-hand side of the master equation.
    pub fn rhs(&self, rho: &CMat) -> CMat {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * c64(0.0, -1.0);
        for ch in &self.channels {
            if ch.rate == 0.0 {
                continue;
            }
            let o_rho = &ch.op * rho;
            let o_rho_od = &o_rho * ch.op.adjoint();
            let odo = ch.op.adjoint() * &ch.op;
            let anti = &odo * rho + rho * &odo;
            out += (o_rho_od - anti * c64(0.5, 0.0)) * c64(ch.rate, 0.0);
        }
        out
    }
}

/// Propagate a pure state under a (generally non-Hermitian) Hamiltonian:
/// ψ(t) = e^{−iH t} ψ0. The norm may shrink but never grows for a physical
/// effective Hamiltonian.
pub fn evolve_nonhermitian(h_eff: &CMat, psi0: &CVec, t: f64) -> Result<CVec> {
    if t < 0.0 {
        return Err(Error::InvalidInput("negative evolution time".into()));
    }
    if h_eff.nrows() != psi0.len() {
        return Err(Error::Dimension(format!(
            "state dim {} vs hamiltonian dim {}",
            psi0.len(),
            h_eff.nrows()
        )));
    }
    let u = nonhermitian_propagator(h_eff, t)?;
    Ok(&u * psi0)
}

/// e^{−iH t}.
pub fn nonhermitian_propagator(h_eff: &CMat, t: f64) -> Result<CMat> {
    expm(&(h_eff * c64(0.0, -t)))
}

/// Integrate the master equation to time `t`.
///
/// Adaptive 4th/5th-order stepping; preserves trace, Hermiticity and
/// positivity within the integration tolerance.
pub fn integrate_lindblad(model: &LindbladModel, rho0: &CMat, t: f64, tol: f64) -> Result<CMat> {
    if rho0.nrows() != model.dim() || rho0.ncols() != model.dim() {
        return Err(Error::Dimension("rho0 does not match model dimension".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidInput("negative integration time".into()));
    }
    integrate_adaptive(|rho: &CMat| model.rhs(rho), rho0, t, tol)
}

/// Jump-resolved decomposition of the Lindblad evolution at a horizon.
///
/// Each outcome is keyed by the ordered list of channel indices that fired;
/// the empty key is the no-jump branch. Probabilities are horizon-conditioned:
/// an outcome with k jumps means exactly those k jumps occurred within the
/// horizon (in that order) and nothing else.
#[derive(Clone, Debug)]
pub struct JumpSeries {
    pub horizon: f64,
    outcomes: BTreeMap<Vec<usize>, CMat>,
}

impl JumpSeries {
    pub fn probability(&self, seq: &[usize]) -> f64 {
        self.outcomes
            .get(seq)
            .map(|m| crate::linalg::trace(m).re)
            .unwrap_or(0.0)
    }

    pub fn probabilities(&self) -> BTreeMap<Vec<usize>, f64> {
        self.outcomes
            .iter()
            .map(|(k, m)| (k.clone(), crate::linalg::trace(m).re))
            .collect()
    }

    /// Unnormalized conditional density of one outcome at the horizon.
    pub fn conditional_density(&self, seq: &[usize]) -> Option<&CMat> {
        self.outcomes.get(seq)
    }

    /// Sum of all tracked branch densities; equals the Lindblad-evolved state
    /// when `max_jumps` covers every sequence that can fire.
    pub fn reconstructed_density(&self) -> CMat {
        let mut acc = self
            .outcomes
            .values()
            .next()
            .map(|m| CMat::zeros(m.nrows(), m.ncols()))
            .unwrap();
        for m in self.outcomes.values() {
            acc += m;
        }
        acc
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes
            .values()
            .map(|m| crate::linalg::trace(m).re)
            .sum()
    }

    /// Probability that the first fired channel is `c`, regardless of what
    /// happens afterwards (within the horizon).
    pub fn first_jump_probability(&self, c: usize) -> f64 {
        self.outcomes
            .iter()
            .filter(|(k, _)| k.first() == Some(&c))
            .map(|(_, m)| crate::linalg::trace(m).re)
            .sum()
    }
}

fn enumerate_sequences(n_channels: usize, max_jumps: usize) -> Vec<Vec<usize>> {
    let mut seqs = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_jumps {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..n_channels {
                let mut t: Vec<usize> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        seqs.extend(next.iter().cloned());
        frontier = next;
    }
    seqs
}

/// Decompose the evolution into jump sequences up to `max_jumps` jumps.
///
/// The hierarchy dρ_s/dt = −i(H_eff ρ_s − ρ_s H_eff†) + γ_c O_c ρ_parent O_c†
/// is integrated as one stacked ODE, so every branch density is exact up to
/// the integration tolerance. Probabilities over all sequences sum to 1 when
/// `max_jumps` covers all reachable sequences and the horizon is long enough
/// for nothing else; in general they are horizon-conditioned.
pub fn jump_series(
    model: &LindbladModel,
    psi0: &CVec,
    horizon: f64,
    max_jumps: usize,
    tol: f64,
) -> Result<JumpSeries> {
    if horizon < 0.0 {
        return Err(Error::InvalidInput("negative horizon".into()));
    }
    let d = model.dim();
    if psi0.len() != d {
        return Err(Error::Dimension("psi0 does not match model dimension".into()));
    }
    let h_eff = model.effective_hamiltonian();
    let seqs = enumerate_sequences(model.channels.len(), max_jumps);
    let n = seqs.len();
    // parent index of each sequence (sequence minus its last jump)
    let index: BTreeMap<Vec<usize>, usize> = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let parents: Vec<Option<(usize, usize)>> = seqs
        .iter()
        .map(|s| {
            s.split_last().map(|(&last, head)| (index[&head.to_vec()], last))
        })
        .collect();

    let mut x0: Vec<CMat> = vec![CMat::zeros(d, d); n];
    x0[index[&vec![]]] = psi0 * psi0.adjoint();

    let rhs = |x: &Vec<CMat>| -> Vec<CMat> {
        let mut out = Vec::with_capacity(n);
        for (i, rho) in x.iter().enumerate() {
            let mut dr = (&h_eff * rho - rho * h_eff.adjoint()) * c64(0.0, -1.0);
            if let Some((pi, c)) = parents[i] {
                let ch = &model.channels[c];
                dr += &ch.op * &x[pi] * ch.op.adjoint() * c64(ch.rate, 0.0);
            }
            out.push(dr);
        }
        out
    };

    let xt = integrate_adaptive(rhs, &x0, horizon, tol)?;
    let outcomes = seqs.into_iter().zip(xt).collect();
    Ok(JumpSeries { horizon, outcomes })
}

/// Convenience wrapper returning only the probabilities.
pub fn jump_series_probabilities(
    model: &LindbladModel,
    psi0: &CVec,
    horizon: f64,
    max_jumps: usize,
) -> Result<BTreeMap<Vec<usize>, f64>> {
    Ok(jump_series(model, psi0, horizon, max_jumps, 1e-10)?.probabilities())
}

/// Exact branching of a freely decaying state (no drive) into its jump
/// channels over an infinite wait.
///
/// With H = 0 the no-jump generator is K = ½ Σ γ O†O (Hermitian, PSD).
/// Because the future after a jump does not depend on when it happened, the
/// time integral over each segment can be taken in closed form in the
/// eigenbasis of K: G = ∫ e^{−Kt} B e^{−Kt} dt has entries B̃_ij/(λ_i + λ_j).
/// Components in the kernel of K are annihilated by every jump operator and
/// never fire.
///
/// Returns, for every sequence with at most `max_jumps` jumps, the
/// probability that exactly that sequence fires over t ∈ [0, ∞) and nothing
/// afterwards. Entries sum to tr B when `max_jumps` covers all cascades.
pub fn decay_branching(
    channels: &[JumpChannel],
    initial: &CMat,
    max_jumps: usize,
) -> BTreeMap<Vec<usize>, f64> {
    let d = initial.nrows();
    let mut k = CMat::zeros(d, d);
    for ch in channels {
        k += ch.op.adjoint() * &ch.op * c64(0.5 * ch.rate, 0.0);
    }
    let (vals, vecs) = hermitian_eigen(&k);
    let scale = vals.iter().cloned().fold(0.0, f64::max).max(1.0);
    let kernel_tol = 1e-12 * scale;

    let mut out = BTreeMap::new();
    let mut frontier: Vec<(Vec<usize>, CMat)> = vec![(vec![], initial.clone())];
    for depth in 0..=max_jumps {
        let mut next = Vec::new();
        for (seq, b) in &frontier {
            let bt = vecs.adjoint() * b * &vecs;
            // never-jump-again probability: kernel block of K
            let mut stop = 0.0;
            for (i, &li) in vals.iter().enumerate() {
                if li <= kernel_tol {
                    stop += bt[(i, i)].re;
                }
            }
            out.insert(seq.clone(), stop);
            if depth == max_jumps {
                continue;
            }
            // integrated pre-jump density
            let mut g = CMat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let s = vals[i] + vals[j];
                    if s > kernel_tol {
                        g[(i, j)] = bt[(i, j)] / c64(s, 0.0);
                    }
                }
            }
            let g = &vecs * g * vecs.adjoint();
            for (c, ch) in channels.iter().enumerate() {
                if ch.rate == 0.0 {
                    continue;
                }
                let b_next = &ch.op * &g * ch.op.adjoint() * c64(ch.rate, 0.0);
                if max_abs(&b_next) < 1e-300 {
                    continue;
                }
                let mut s = seq.clone();
                s.push(c);
                next.push((s, b_next));
            }
        }
        frontier = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, trace, trace_distance};
    use approx::assert_relative_eq;

    fn two_level_decay(gamma: f64) -> LindbladModel {
        // |1⟩ decays to |0⟩
        let mut op = CMat::zeros(2, 2);
        op[(0, 1)] = c64(1.0, 0.0);
        LindbladModel::new(
            CMat::zeros(2, 2),
            vec![JumpChannel::free_space("decay", gamma, op)],
        )
        .unwrap()
    }

    fn excited() -> CMat {
        let mut m = CMat::zeros(2, 2);
        m[(1, 1)] = c64(1.0, 0.0);
        m
    }

    #[test]
    fn identity_when_no_dynamics() {
        let model = LindbladModel::new(CMat::zeros(2, 2), vec![]).unwrap();
        let rho = integrate_lindblad(&model, &excited(), 2.5, 1e-10).unwrap();
        assert!(trace_distance(&rho, &excited()) < 1e-12);
    }

    #[test]
    fn nonhermitian_identity_and_decay() {
        // H_eff = 0 leaves the state alone
        let psi0 = CVec::from_vec(vec![c64(0.6, 0.0), c64(0.8, 0.0)]);
        let psi = evolve_nonhermitian(&CMat::zeros(2, 2), &psi0, 3.0).unwrap();
        assert_relative_eq!((psi - &psi0).norm(), 0.0, epsilon = 1e-14);
        // single decaying level: amplitude e^{-Γt/2}
        let gamma = 1.0;
        let h_eff = CMat::from_row_slice(1, 1, &[c64(0.0, -0.5 * gamma)]);
        let psi = evolve_nonhermitian(&h_eff, &CVec::from_vec(vec![c64(1.0, 0.0)]), 2.0).unwrap();
        assert_relative_eq!(psi[0].re, (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn exponential_decay_of_population() {
        let gamma = 0.7;
        let model = two_level_decay(gamma);
        let t = 2.0;
        let rho = integrate_lindblad(&model, &excited(), t, 1e-11).unwrap();
        assert_relative_eq!(rho[(1, 1)].re, (-gamma * t).exp(), epsilon = 1e-9);
        assert_relative_eq!(trace(&rho).re, 1.0, epsilon = 1e-9);
        assert!(min_eigenvalue(&rho) > -1e-9);
    }

    #[test]
    fn jump_series_trivial_cases() {
        // no channels: everything stays in the no-jump branch
        let model = LindbladModel::new(CMat::zeros(2, 2), vec![]).unwrap();
        let psi0 = CVec::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
        let probs = jump_series_probabilities(&model, &psi0, 5.0, 2).unwrap();
        assert_relative_eq!(probs[&vec![]], 1.0, epsilon = 1e-10);

        // single decaying level at long horizon: one jump with certainty
        let model = two_level_decay(1.0);
        let probs = jump_series_probabilities(&model, &psi0, 60.0, 1).unwrap();
        assert!(probs[&vec![]] < 1e-10);
        assert_relative_eq!(probs[&vec![0]], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn series_reconstructs_lindblad_state() {
        // driven, decaying two-level system; 3 jumps cover the horizon budget
        let mut h = CMat::zeros(2, 2);
        h[(0, 1)] = c64(0.4, 0.0);
        h[(1, 0)] = c64(0.4, 0.0);
        let mut op = CMat::zeros(2, 2);
        op[(0, 1)] = c64(1.0, 0.0);
        let model =
            LindbladModel::new(h, vec![JumpChannel::free_space("d", 1.0, op)]).unwrap();
        let psi0 = CVec::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        let t = 1.2;
        let series = jump_series(&model, &psi0, t, 6, 1e-11).unwrap();
        let direct = integrate_lindblad(&model, &(&psi0 * psi0.adjoint()), t, 1e-11).unwrap();
        assert!(trace_distance(&series.reconstructed_density(), &direct) < 1e-6);
        assert_relative_eq!(series.total_probability(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn branching_matches_long_horizon_series() {
        // cascade: |2⟩ → |1⟩ → |0⟩ with distinct channels
        let mut o21 = CMat::zeros(3, 3);
        o21[(1, 2)] = c64(1.0, 0.0);
        let mut o10 = CMat::zeros(3, 3);
        o10[(0, 1)] = c64(1.0, 0.0);
        let channels = vec![
            JumpChannel::free_space("a", 1.0, o21),
            JumpChannel::free_space("b", 0.5, o10),
        ];
        let model = LindbladModel::new(CMat::zeros(3, 3), channels.clone()).unwrap();
        let psi0 = CVec::from_vec(vec![c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let b = decay_branching(&channels, &(&psi0 * psi0.adjoint()), 2);
        // the only cascade is a then b, with probability 1
        assert_relative_eq!(b[&vec![0, 1]], 1.0, epsilon = 1e-12);
        // sanity alternative: timed wait of 20/Γ* instead of the analytic tail
        let probs = jump_series_probabilities(&model, &psi0, 20.0 / 0.5, 2).unwrap();
        assert_relative_eq!(probs[&vec![0, 1]], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn branching_splits_by_rate() {
        // one excited state, two competing channels with rates 2:1
        let mut oa = CMat::zeros(2, 2);
        oa[(0, 1)] = c64(1.0, 0.0);
        let ob = oa.clone();
        let channels = vec![
            JumpChannel::free_space("a", 2.0, oa),
            JumpChannel::free_space("b", 1.0, ob),
        ];
        let psi0 = CVec::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
        let b = decay_branching(&channels, &(&psi0 * psi0.adjoint()), 1);
        assert_relative_eq!(b[&vec![0]], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(b[&vec![1]], 1.0 / 3.0, epsilon = 1e-12);
        let total: f64 = b.values().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn effective_hamiltonian_is_dissipative() {
        let model = two_level_decay(1.3);
        assert!(model.antihermitian_violation() <= 1e-12);
    }
}
