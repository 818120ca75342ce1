//! Truncated symmetric-subspace bases for collections of atomic ensembles.
//!
//! A basis state stores, for every ensemble, the number of atoms in each
//! internal level. The first level of each ensemble is its rest ("ground")
//! level; the truncation bound caps the total number of atoms outside the
//! rest levels across all ensembles.

use std::collections::HashMap;
use std::fmt;

use crate::linalg::{c64, CMat, CVec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub atoms: u32,
    /// Level names; `levels[0]` is the rest level.
    pub levels: Vec<String>,
}

impl EnsembleSpec {
    pub fn new(atoms: u32, levels: &[&str]) -> Self {
        EnsembleSpec {
            atoms,
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Occupation numbers per ensemble per level; sums to the atom count
/// of each ensemble.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState(pub Vec<Vec<u16>>);

impl BasisState {
    pub fn occupation(&self, ensemble: usize, level: usize) -> u16 {
        self.0[ensemble][level]
    }

    /// Atoms outside the rest level, summed over ensembles.
    pub fn excitations(&self) -> u32 {
        self.0
            .iter()
            .map(|occ| occ.iter().skip(1).map(|&n| n as u32).sum::<u32>())
            .sum()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|occ| {
                let inner: Vec<String> = occ.iter().map(|n| n.to_string()).collect();
                format!("|{}⟩", inner.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

#[derive(Clone, Debug)]
pub struct HilbertBasis {
    pub ensembles: Vec<EnsembleSpec>,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

fn occupations_for_ensemble(spec: &EnsembleSpec, max_exc: u32) -> Vec<Vec<u16>> {
    // distribute up to max_exc atoms over the non-rest levels
    let n_levels = spec.levels.len();
    let mut out = Vec::new();
    let mut current = vec![0u16; n_levels];
    fn rec(
        level: usize,
        remaining: u32,
        spec: &EnsembleSpec,
        current: &mut Vec<u16>,
        out: &mut Vec<Vec<u16>>,
    ) {
        if level == spec.levels.len() {
            let excited: u32 = current.iter().skip(1).map(|&n| n as u32).sum();
            let mut occ = current.clone();
            occ[0] = (spec.atoms - excited) as u16;
            out.push(occ);
            return;
        }
        if level == 0 {
            rec(1, remaining, spec, current, out);
            return;
        }
        for n in 0..=remaining {
            current[level] = n as u16;
            rec(level + 1, remaining - n, spec, current, out);
        }
        current[level] = 0;
    }
    let cap = max_exc.min(spec.atoms);
    rec(0, cap, spec, &mut current, &mut out);
    out.sort();
    out.dedup();
    out
}

impl HilbertBasis {
    /// Enumerate all occupation configurations with at most `max_excitations`
    /// atoms outside the rest levels, ordered lexicographically.
    ///
    /// A bound exceeding the total atom number is clamped.
    pub fn build(ensembles: Vec<EnsembleSpec>, max_excitations: u32) -> Result<Self> {
        for (i, e) in ensembles.iter().enumerate() {
            if e.levels.is_empty() {
                return Err(Error::EmptyLevels(i));
            }
            if e.atoms == 0 {
                return Err(Error::InvalidInput(format!("ensemble {i} has no atoms")));
            }
        }
        let total_atoms: u32 = ensembles.iter().map(|e| e.atoms).sum();
        let bound = max_excitations.min(total_atoms);

        let per_ensemble: Vec<Vec<Vec<u16>>> = ensembles
            .iter()
            .map(|e| occupations_for_ensemble(e, bound))
            .collect();

        let mut states = Vec::new();
        let mut stack: Vec<(usize, Vec<Vec<u16>>, u32)> = vec![(0, Vec::new(), 0)];
        while let Some((k, partial, exc)) = stack.pop() {
            if k == ensembles.len() {
                states.push(BasisState(partial));
                continue;
            }
            for occ in &per_ensemble[k] {
                let e: u32 = occ.iter().skip(1).map(|&n| n as u32).sum();
                if exc + e <= bound {
                    let mut p = partial.clone();
                    p.push(occ.clone());
                    stack.push((k + 1, p, exc + e));
                }
            }
        }
        states.sort();
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(HilbertBasis {
            ensembles,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &BasisState {
        &self.states[i]
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn level_index(&self, ensemble: usize, level: &str) -> Result<usize> {
        self.ensembles[ensemble]
            .levels
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| {
                Error::InvalidInput(format!("no level '{level}' in ensemble {ensemble}"))
            })
    }

    /// Collective transfer operator S_{to,from} = Σ_n |to⟩⟨from|_n on the
    /// symmetric subspace: matrix element √((n_to + 1) n_from).
    pub fn collective_op(&self, ensemble: usize, from: &str, to: &str) -> Result<CMat> {
        self.transfer_op(ensemble, from, to, true)
    }

    /// Transfer operator with matrix element √(n_from) and no bosonic
    /// enhancement on the destination. This is the right weight for summing
    /// independent per-atom emission channels: the total flux from a state
    /// with n_from excited atoms is γ·n_from.
    pub fn transfer_op_unstimulated(&self, ensemble: usize, from: &str, to: &str) -> Result<CMat> {
        self.transfer_op(ensemble, from, to, false)
    }

    fn transfer_op(&self, ensemble: usize, from: &str, to: &str, stimulated: bool) -> Result<CMat> {
        let fi = self.level_index(ensemble, from)?;
        let ti = self.level_index(ensemble, to)?;
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (i, s) in self.states.iter().enumerate() {
            let n_from = s.occupation(ensemble, fi) as f64;
            if n_from == 0.0 {
                continue;
            }
            let mut occ = s.0.clone();
            occ[ensemble][fi] -= 1;
            occ[ensemble][ti] += 1;
            let target = BasisState(occ);
            if let Some(j) = self.index_of(&target) {
                let n_to = s.occupation(ensemble, ti) as f64;
                let w = if stimulated {
                    ((n_to + 1.0) * n_from).sqrt()
                } else {
                    n_from.sqrt()
                };
                m[(j, i)] = c64(w, 0.0);
            }
        }
        Ok(m)
    }

    /// Diagonal occupation-number operator of one level.
    pub fn level_number_op(&self, ensemble: usize, level: &str) -> Result<CMat> {
        let li = self.level_index(ensemble, level)?;
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (i, s) in self.states.iter().enumerate() {
            m[(i, i)] = c64(s.occupation(ensemble, li) as f64, 0.0);
        }
        Ok(m)
    }

    /// Unit vector for a basis state.
    pub fn unit_vector(&self, s: &BasisState) -> Result<CVec> {
        let i = self
            .index_of(s)
            .ok_or_else(|| Error::InvalidInput(format!("state {s} not in basis")))?;
        let mut v = CVec::zeros(self.dim());
        v[i] = c64(1.0, 0.0);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(atoms: u32, levels: &[&str], max: u32) -> HilbertBasis {
        HilbertBasis::build(vec![EnsembleSpec::new(atoms, levels)], max).unwrap()
    }

    #[test]
    fn two_level_atom() {
        let b = single(1, &["g", "e"], 1);
        assert_eq!(b.dim(), 2);
        assert_eq!(b.state(0), &BasisState(vec![vec![0, 1]]));
        assert_eq!(b.state(1), &BasisState(vec![vec![1, 0]]));
    }

    #[test]
    fn symmetric_subspace_single_excitation() {
        let b = single(50, &["g", "e"], 1);
        assert_eq!(b.dim(), 2);
    }

    #[test]
    fn lookup_roundtrip() {
        let b = single(10, &["g", "s", "e"], 2);
        for i in 0..b.dim() {
            assert_eq!(b.index_of(b.state(i)), Some(i));
        }
    }

    #[test]
    fn truncation_clamps_to_atom_count() {
        let b = single(2, &["g", "e"], 99);
        // occupations (2,0), (1,1), (0,2)
        assert_eq!(b.dim(), 3);
    }

    #[test]
    fn empty_levels_is_error() {
        let r = HilbertBasis::build(vec![EnsembleSpec { atoms: 1, levels: vec![] }], 1);
        assert!(r.is_err());
    }

    #[test]
    fn collective_matrix_elements() {
        // S_eg on |N g⟩ has norm √N; S_ge S_eg |Ng⟩ = N |Ng⟩
        let n = 7u32;
        let b = single(n, &["g", "e"], 2);
        let s_eg = b.collective_op(0, "g", "e").unwrap();
        let ground = b.unit_vector(&BasisState(vec![vec![n as u16, 0]])).unwrap();
        let one = &s_eg * &ground;
        approx::assert_relative_eq!(one.norm(), (n as f64).sqrt(), epsilon = 1e-12);
        // bosonic enhancement into an occupied level: e -> s with m already in s
        let b2 = single(n, &["g", "s", "e"], 3);
        let m_stored = 2u16;
        let st = BasisState(vec![vec![(n as u16) - m_stored - 1, m_stored, 1]]);
        let v = b2.unit_vector(&st).unwrap();
        let s_se = b2.collective_op(0, "e", "s").unwrap();
        let w = &s_se * &v;
        approx::assert_relative_eq!(w.norm_squared(), (m_stored as f64) + 1.0, epsilon = 1e-12);
        // independent-emission weight has no destination enhancement
        let j_se = b2.transfer_op_unstimulated(0, "e", "s").unwrap();
        let u = &j_se * &v;
        approx::assert_relative_eq!(u.norm_squared(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn multi_ensemble_enumeration() {
        // source (1 atom, g/e), target (2 atoms, g/e), max 1 excitation:
        // states: all-rest, source-excited, target-excited
        let b = HilbertBasis::build(
            vec![EnsembleSpec::new(1, &["g", "e"]), EnsembleSpec::new(2, &["g", "e"])],
            1,
        )
        .unwrap();
        assert_eq!(b.dim(), 3);
    }
}
