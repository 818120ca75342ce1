//! Fock-space states and beam-splitter transformations for one and two
//! bosonic modes (collective excitations in the Holstein–Primakoff limit).

use num_complex::Complex64 as C64;
use num_traits::Zero;

use crate::{Error, Result};

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Single-mode state: amplitude per occupation number, 0..=n_max.
#[derive(Clone, Debug)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    pub fn vacuum(n_max: usize) -> Self {
        let mut amps = vec![C64::zero(); n_max + 1];
        amps[0] = C64::new(1.0, 0.0);
        FockVector { amps }
    }

    pub fn number_state(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::TruncationOverflow(n_max));
        }
        let mut amps = vec![C64::zero(); n_max + 1];
        amps[n] = C64::new(1.0, 0.0);
        Ok(FockVector { amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        FockVector { amps }
    }

    /// Normalized state ∝ Π_i (a† − α_i) |vac⟩.
    pub fn from_roots(roots: &[C64], n_max: usize) -> Result<Self> {
        if roots.len() > n_max {
            return Err(Error::TruncationOverflow(n_max));
        }
        // polynomial coefficients of Π (x − α_i)
        let mut poly = vec![C64::zero(); roots.len() + 1];
        poly[0] = C64::new(1.0, 0.0);
        for (i, &r) in roots.iter().enumerate() {
            let mut next = vec![C64::zero(); i + 2];
            for j in 0..=i {
                next[j + 1] += poly[j];
                next[j] -= poly[j] * r;
            }
            poly = next;
        }
        // (a†)^k |vac⟩ = √(k!) |k⟩
        let mut amps = vec![C64::zero(); n_max + 1];
        for (k, c) in poly.iter().enumerate() {
            amps[k] = c * C64::new((0.5 * ln_factorial(k)).exp(), 0.0);
        }
        let mut v = FockVector { amps };
        v.normalize()?;
        Ok(v)
    }

    pub fn n_max(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amp(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or_else(C64::zero)
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-150 {
            return Err(Error::ZeroProbability);
        }
        for a in &mut self.amps {
            *a /= C64::new(n, 0.0);
        }
        Ok(())
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Highest occupation number with non-negligible amplitude.
    pub fn top_occupation(&self) -> usize {
        self.amps
            .iter()
            .rposition(|a| a.norm_sqr() > 1e-24)
            .unwrap_or(0)
    }
}

/// Two-mode state with per-mode truncation n_max.
#[derive(Clone, Debug)]
pub struct TwoModeFock {
    n_max: usize,
    amps: Vec<C64>, // row-major: index = n1 * (n_max+1) + n2
}

impl TwoModeFock {
    pub fn product(left: &FockVector, right: &FockVector) -> Self {
        let n_max = left.n_max() + right.n_max();
        let dim = n_max + 1;
        let mut amps = vec![C64::zero(); dim * dim];
        for n1 in 0..=left.n_max() {
            for n2 in 0..=right.n_max() {
                amps[n1 * dim + n2] = left.amp(n1) * right.amp(n2);
            }
        }
        TwoModeFock { n_max, amps }
    }

    pub fn with_truncation(left: &FockVector, right: &FockVector, n_max: usize) -> Self {
        let dim = n_max + 1;
        let mut amps = vec![C64::zero(); dim * dim];
        for n1 in 0..=left.n_max().min(n_max) {
            for n2 in 0..=right.n_max().min(n_max) {
                amps[n1 * dim + n2] = left.amp(n1) * right.amp(n2);
            }
        }
        TwoModeFock { n_max, amps }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn amp(&self, n1: usize, n2: usize) -> C64 {
        if n1 > self.n_max || n2 > self.n_max {
            C64::zero()
        } else {
            self.amps[n1 * (self.n_max + 1) + n2]
        }
    }

    pub fn set_amp(&mut self, n1: usize, n2: usize, v: C64) {
        let d = self.n_max + 1;
        self.amps[n1 * d + n2] = v;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Project mode 2 onto |detected⟩; the returned single-mode state is
    /// unnormalized (its norm² is the outcome probability).
    pub fn project_mode2(&self, detected: usize) -> FockVector {
        let amps = (0..=self.n_max).map(|n1| self.amp(n1, detected)).collect();
        FockVector::from_amplitudes(amps)
    }
}

/// Two-port beam splitter acting on creation operators as
/// a1† → T a1† + R a2†, a2† → −R̄ a1† + T̄ a2†.
#[derive(Clone, Copy, Debug)]
pub struct BeamSplitter {
    pub transmission: C64,
    pub reflection: C64,
}

impl BeamSplitter {
    pub fn new(transmission: C64, reflection: C64) -> Result<Self> {
        let s = transmission.norm_sqr() + reflection.norm_sqr();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "|T|² + |R|² = {s}, not unitary"
            )));
        }
        Ok(BeamSplitter {
            transmission,
            reflection,
        })
    }

    /// The 50/50 splitter whose detection amplitudes are
    /// [`detection_amplitude`](super::combinatorics::detection_amplitude):
    /// a1† → (a1† − a2†)/√2, a2† → (a1† + a2†)/√2.
    pub fn balanced() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        BeamSplitter {
            transmission: C64::new(s, 0.0),
            reflection: C64::new(-s, 0.0),
        }
    }

    /// Identity splitter.
    pub fn transparent() -> Self {
        BeamSplitter {
            transmission: C64::new(1.0, 0.0),
            reflection: C64::zero(),
        }
    }

    /// Small-angle splitter a1† → cosθ a1† + i sinθ a2†, used for trimming.
    pub fn rotation(theta: f64) -> Self {
        BeamSplitter {
            transmission: C64::new(theta.cos(), 0.0),
            reflection: C64::new(0.0, theta.sin()),
        }
    }

    /// By-transmittance constructor with real amplitudes: |T|² = tau.
    pub fn from_transmittance(tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidInput("transmittance outside [0,1]".into()));
        }
        Ok(BeamSplitter {
            transmission: C64::new(tau.sqrt(), 0.0),
            reflection: C64::new(-(1.0 - tau).sqrt(), 0.0),
        })
    }
}

/// Apply a beam splitter to a two-mode state.
///
/// Total occupation is conserved block by block; amplitudes on totals beyond
/// the state's truncation are an error rather than a silent clip.
pub fn apply_beamsplitter(state: &TwoModeFock, bs: &BeamSplitter) -> Result<TwoModeFock> {
    let n_max = state.n_max();
    // detect occupied blocks beyond the truncation
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            if n1 + n2 > n_max && state.amp(n1, n2).norm_sqr() > 1e-24 {
                return Err(Error::TruncationOverflow(n_max));
            }
        }
    }
    let t = bs.transmission;
    let r = bs.reflection;
    let t2 = t.conj();
    let r2 = -r.conj();
    let mut out = TwoModeFock {
        n_max,
        amps: vec![C64::zero(); (n_max + 1) * (n_max + 1)],
    };
    // per total-number block: |k, M−k⟩ → Σ_j c_j |j, M−j⟩
    for total in 0..=n_max {
        for k in 0..=total {
            let a_in = state.amp(k, total - k);
            if a_in.norm_sqr() < 1e-300 {
                continue;
            }
            // (T a1† + R a2†)^k (−R̄ a1† + T̄ a2†)^{total−k}, tracked as
            // coefficients over j = resulting occupation of mode 1
            let m2 = total - k;
            let mut coeffs = vec![C64::zero(); total + 1];
            for i in 0..=k {
                // i transmitted from the first factor
                let c1 = C64::new(binom(k, i), 0.0) * t.powu(i as u32) * r.powu((k - i) as u32);
                for l in 0..=m2 {
                    let c2 = C64::new(binom(m2, l), 0.0)
                        * r2.powu(l as u32)
                        * t2.powu((m2 - l) as u32);
                    coeffs[i + l] += c1 * c2;
                }
            }
            // monomial (a1†)^j (a2†)^{total−j}|vac⟩ = √(j!(total−j)!)|j, total−j⟩
            let ln_in = 0.5 * (ln_factorial(k) + ln_factorial(total - k));
            for (j, c) in coeffs.iter().enumerate() {
                if c.norm_sqr() < 1e-300 {
                    continue;
                }
                let ln_out = 0.5 * (ln_factorial(j) + ln_factorial(total - j));
                let w = (ln_out - ln_in).exp();
                let cur = out.amp(j, total - j);
                out.set_amp(j, total - j, cur + a_in * c * C64::new(w, 0.0));
            }
        }
    }
    Ok(out)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

/// Merge two stored modes through a 50/50 splitter, post-selecting on an
/// empty second mode. Returns the normalized conditional state and the
/// post-selection probability.
pub fn superposition_merge(left: &FockVector, right: &FockVector) -> Result<(FockVector, f64)> {
    let joint = TwoModeFock::product(left, right);
    let out = apply_beamsplitter(&joint, &BeamSplitter::balanced())?;
    let mut cond = out.project_mode2(0);
    let prob = cond.norm_sqr();
    cond.normalize()?;
    Ok((cond, prob))
}

/// Reduce a stored state to `target_n` excitations with weak beam-splitter
/// taps: each attempt couples the mode to an empty ancilla with angle θ and
/// post-selects on a single detected excitation, which lowers the occupation
/// by exactly one while barely disturbing the rest (amplitude factor
/// ≈ 1 − θ²n/2 per no-click attempt).
///
/// Returns the conditional state after reaching `target_n` and the expected
/// number of attempts Σ_k 1/(θ²k) over the trimmed levels.
pub fn excitation_trim(
    state: &FockVector,
    target_n: usize,
    theta: f64,
) -> Result<(FockVector, f64)> {
    let top = state.top_occupation();
    if target_n > top {
        return Err(Error::InvalidInput(format!(
            "target {target_n} above the highest occupied level {top}"
        )));
    }
    if theta * theta * top as f64 > 0.1 {
        return Err(Error::InvalidInput(
            "θ²·n must stay ≤ 0.1 for the trim to be non-destructive".into(),
        ));
    }
    let mut cur = state.clone();
    let mut expected_attempts = 0.0;
    for k in (target_n + 1..=top).rev() {
        expected_attempts += 1.0 / (theta * theta * k as f64);
        let joint = TwoModeFock::with_truncation(&cur, &FockVector::vacuum(0), cur.n_max() + 1);
        let out = apply_beamsplitter(&joint, &BeamSplitter::rotation(theta))?;
        let mut cond = out.project_mode2(1);
        cond.normalize()?;
        cur = cond;
    }
    Ok((cur, expected_attempts))
}
