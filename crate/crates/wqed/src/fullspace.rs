//! Brute-force full tensor-product oracle for 2–3 atoms.
//!
//! Validates the symmetric-subspace reduction: the same dynamics run in the
//! full (levels)^N space and compared against the collective model through
//! the symmetrization embedding. Also provides the deliberately broken
//! control case of an atom displaced by λ/4, whose waveguide coupling phase
//! destroys the collective structure.

use num_complex::Complex64 as C64;

use crate::hilbert::HilbertBasis;
use crate::linalg::{c64, kron, CMat, CVec};
use crate::{Error, Result};

/// Tensor-product space of `n_atoms` identical atoms with `n_levels` levels.
#[derive(Clone, Debug)]
pub struct FullSpaceModel {
    pub n_atoms: usize,
    pub n_levels: usize,
}

impl FullSpaceModel {
    pub fn new(n_atoms: usize, n_levels: usize) -> Result<Self> {
        let dim = n_levels.pow(n_atoms as u32);
        if n_atoms > 3 || dim > 256 {
            return Err(Error::Dimension(format!(
                "full-space oracle capped at 3 atoms / 256 dimensions, got {n_atoms} atoms ({dim})"
            )));
        }
        Ok(FullSpaceModel { n_atoms, n_levels })
    }

    pub fn dim(&self) -> usize {
        self.n_levels.pow(self.n_atoms as u32)
    }

    /// σ_{ab} = |a⟩⟨b| on one atom, identity elsewhere.
    pub fn sigma(&self, atom: usize, a: usize, b: usize) -> CMat {
        let mut single = CMat::zeros(self.n_levels, self.n_levels);
        single[(a, b)] = c64(1.0, 0.0);
        let mut out = CMat::identity(1, 1);
        for n in 0..self.n_atoms {
            let factor = if n == atom {
                single.clone()
            } else {
                CMat::identity(self.n_levels, self.n_levels)
            };
            out = kron(&out, &factor);
        }
        out
    }

    /// Collective operator Σ_n e^{iφ_n} σ_{ab}^n. Atoms at multiples of the
    /// guided wavelength have φ_n = 0; an atom displaced by λ/4 picks up
    /// φ = π/2.
    pub fn collective(&self, a: usize, b: usize, phases: &[f64]) -> CMat {
        assert_eq!(phases.len(), self.n_atoms);
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (n, &phi) in phases.iter().enumerate() {
            out += self.sigma(n, a, b) * C64::from_polar(1.0, phi);
        }
        out
    }

    pub fn uniform_phases(&self) -> Vec<f64> {
        vec![0.0; self.n_atoms]
    }

    /// Product basis vector |l_1, …, l_N⟩.
    pub fn product_state(&self, levels: &[usize]) -> CVec {
        assert_eq!(levels.len(), self.n_atoms);
        let mut idx = 0usize;
        for &l in levels {
            idx = idx * self.n_levels + l;
        }
        let mut v = CVec::zeros(self.dim());
        v[idx] = c64(1.0, 0.0);
        v
    }
}

/// Isometry from a symmetric occupation basis into the full product space:
/// each occupation column is the normalized sum over all level assignments
/// with those occupation numbers.
#[derive(Clone, Debug)]
pub struct SymmetricEmbedding {
    pub matrix: CMat,
}

fn assignments(n_atoms: usize, n_levels: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n_atoms {
        let mut next = Vec::new();
        for partial in &out {
            for l in 0..n_levels {
                let mut p = partial.clone();
                p.push(l);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

impl SymmetricEmbedding {
    /// Embedding for a (possibly multi-ensemble) symmetric basis into the
    /// full space whose atoms are ordered ensemble by ensemble.
    pub fn for_basis(basis: &HilbertBasis) -> Result<Self> {
        let n_levels: Vec<usize> = basis.ensembles.iter().map(|e| e.levels.len()).collect();
        let atoms: Vec<usize> = basis.ensembles.iter().map(|e| e.atoms as usize).collect();
        let full_dim: usize = atoms
            .iter()
            .zip(&n_levels)
            .map(|(&a, &l)| l.pow(a as u32))
            .product();
        if full_dim > 256 {
            return Err(Error::Dimension(format!(
                "full space would be {full_dim}-dimensional"
            )));
        }
        let mut matrix = CMat::zeros(full_dim, basis.dim());
        for (col, state) in basis.states().iter().enumerate() {
            // per-ensemble symmetrized vectors, then kron
            let mut v = CMat::identity(1, 1);
            for (ens, occ) in state.0.iter().enumerate() {
                let na = atoms[ens];
                let nl = n_levels[ens];
                let mut sym = CVec::zeros(nl.pow(na as u32));
                let mut count = 0usize;
                for assign in assignments(na, nl) {
                    let mut tally = vec![0u16; nl];
                    for &l in &assign {
                        tally[l] += 1;
                    }
                    if tally == *occ {
                        let mut idx = 0usize;
                        for &l in &assign {
                            idx = idx * nl + l;
                        }
                        sym[idx] = c64(1.0, 0.0);
                        count += 1;
                    }
                }
                if count == 0 {
                    return Err(Error::InvalidInput("occupation with no assignment".into()));
                }
                sym /= c64((count as f64).sqrt(), 0.0);
                let sym_m = CMat::from_column_slice(sym.len(), 1, sym.as_slice());
                v = kron(&v, &sym_m);
            }
            for r in 0..full_dim {
                matrix[(r, col)] = v[(r, 0)];
            }
        }
        Ok(SymmetricEmbedding { matrix })
    }

    pub fn embed_state(&self, reduced: &CVec) -> CVec {
        &self.matrix * reduced
    }

    pub fn embed_density(&self, reduced: &CMat) -> CMat {
        &self.matrix * reduced * self.matrix.adjoint()
    }
}

/// Trace distance between a full-space density matrix and an embedded
/// symmetric-subspace one.
pub fn compare_with_symmetric(
    full: &CMat,
    reduced: &CMat,
    embedding: &SymmetricEmbedding,
) -> Result<f64> {
    let embedded = embedding.embed_density(reduced);
    if embedded.nrows() != full.nrows() {
        return Err(Error::Dimension(format!(
            "embedded dim {} vs full dim {}",
            embedded.nrows(),
            full.nrows()
        )));
    }
    Ok(crate::linalg::trace_distance(full, &embedded))
}

/// Outcome of one full-space vs symmetric-subspace comparison.
#[derive(Clone, Copy, Debug)]
pub struct OracleReport {
    /// Trace distance of the conditional (no-jump + heralded) states.
    pub conditional_distance: f64,
    /// Trace distance of the Lindblad-evolved states (collective channel).
    pub lindblad_distance: f64,
}

/// Weak-drive write attempt on 3 atoms with one excitation stored in an
/// auxiliary level: exact pulse, conditional decay, and the heralded
/// (post-collective-jump) state, run in the full 4³ space and in the
/// symmetric occupation basis.
pub fn weak_drive_oracle(x: f64, p1d: f64, decay_time: f64) -> Result<OracleReport> {
    let n_atoms = 3usize;
    let levels = ["g", "s", "e", "s1"];
    let basis = HilbertBasis::build(
        vec![crate::hilbert::EnsembleSpec::new(n_atoms as u32, &levels)],
        n_atoms as u32,
    )?;
    let emb = SymmetricEmbedding::for_basis(&basis)?;
    let full = FullSpaceModel::new(n_atoms, levels.len())?;
    let (g_idx, s_idx, e_idx) = (0usize, 1usize, 2usize);

    // reduced operators
    let s_se = basis.collective_op(0, "e", "s")?;
    let s_eg = basis.collective_op(0, "g", "e")?;
    let n_e = basis.level_number_op(0, "e")?;
    // full-space counterparts
    let o_coll = full.collective(s_idx, e_idx, &full.uniform_phases());
    let f_eg = full.collective(e_idx, g_idx, &full.uniform_phases());
    let mut f_ne = CMat::zeros(full.dim(), full.dim());
    for n in 0..n_atoms {
        f_ne += full.sigma(n, e_idx, e_idx);
    }

    // initial state: one excitation parked in s1, two atoms in g
    let red0 = basis.unit_vector(&crate::hilbert::BasisState(vec![vec![2, 0, 0, 1]]))?;
    let n_m = 2.0f64;
    let pulse_red = (&s_eg + s_eg.adjoint()) * c64(x / n_m.sqrt(), 0.0);
    let pulse_full = (&f_eg + f_eg.adjoint()) * c64(x / n_m.sqrt(), 0.0);
    let red_pulsed = &crate::linalg::expm(&(pulse_red * c64(0.0, -1.0)))? * &red0;
    let full_pulsed =
        &crate::linalg::expm(&(pulse_full * c64(0.0, -1.0)))? * &emb.embed_state(&red0);

    // conditional decay under H_eff = −(i/2)(Γ_1d O†O + Γ* n_e); compare the
    // normalized conditional states (their norms agree by construction)
    let h_red = (s_se.adjoint() * &s_se * c64(p1d, 0.0) + &n_e) * c64(0.0, -0.5);
    let h_full = (o_coll.adjoint() * &o_coll * c64(p1d, 0.0) + &f_ne) * c64(0.0, -0.5);
    let red_t = crate::dynamics::evolve_nonhermitian(&h_red, &red_pulsed, decay_time)?
        .normalize();
    let full_t = crate::dynamics::evolve_nonhermitian(&h_full, &full_pulsed, decay_time)?
        .normalize();
    let cond = crate::linalg::trace_distance(
        &(&full_t * full_t.adjoint()),
        &emb.embed_density(&(&red_t * red_t.adjoint())),
    );

    // heralded state after a collective jump
    let red_h = (&s_se * &red_t).normalize();
    let full_h = (&o_coll * &full_t).normalize();
    let herald = crate::linalg::trace_distance(
        &(&full_h * full_h.adjoint()),
        &emb.embed_density(&(&red_h * red_h.adjoint())),
    );

    Ok(OracleReport {
        conditional_distance: cond.max(herald),
        lindblad_distance: lindblad_collective_distance(
            &basis,
            &emb,
            &full,
            &o_coll,
            &s_se,
            p1d,
            &red_pulsed,
            decay_time,
        )?,
    })
}

/// Transfer step on 1 source + 2 target atoms (three levels each), with
/// uniform or deliberately broken waveguide phases.
pub fn zeno_step_oracle(p1d: f64, misplaced: bool) -> Result<OracleReport> {
    let levels = ["m", "g", "e"];
    let basis = HilbertBasis::build(
        vec![
            crate::hilbert::EnsembleSpec::new(1, &levels),
            crate::hilbert::EnsembleSpec::new(2, &levels),
        ],
        3,
    )?;
    let emb = SymmetricEmbedding::for_basis(&basis)?;
    let full = FullSpaceModel::new(3, 3)?;
    let (m_idx, g_idx, e_idx) = (0usize, 1usize, 2usize);

    let phases = if misplaced {
        vec![0.0, 0.0, std::f64::consts::FRAC_PI_2]
    } else {
        full.uniform_phases()
    };

    // collective decay e→m over all atoms; drive g→e on the target ensemble
    let o_red = &basis.collective_op(0, "e", "m")? + basis.collective_op(1, "e", "m")?;
    let o_full = full.collective(m_idx, e_idx, &phases);
    let drive_red = basis.collective_op(1, "g", "e")?;
    let mut drive_full = CMat::zeros(full.dim(), full.dim());
    for n in 1..3 {
        drive_full += full.sigma(n, e_idx, g_idx);
    }
    let n_e_red = &basis.level_number_op(0, "e")? + basis.level_number_op(1, "e")?;
    let mut n_e_full = CMat::zeros(full.dim(), full.dim());
    for n in 0..3 {
        n_e_full += full.sigma(n, e_idx, e_idx);
    }

    let zp = crate::zeno::ZenoParams::optimal(0, 2, p1d, 1.0);
    let h_red = (&drive_red + drive_red.adjoint()) * c64(0.5 * zp.omega, 0.0);
    let h_full = (&drive_full + drive_full.adjoint()) * c64(0.5 * zp.omega, 0.0);

    // source excited, targets in g
    let red0 = basis.unit_vector(&crate::hilbert::BasisState(vec![
        vec![0, 0, 1],
        vec![0, 2, 0],
    ]))?;

    let heff_red =
        &h_red + (o_red.adjoint() * &o_red * c64(p1d, 0.0) + &n_e_red) * c64(0.0, -0.5);
    let heff_full =
        &h_full + (o_full.adjoint() * &o_full * c64(p1d, 0.0) + &n_e_full) * c64(0.0, -0.5);
    let red_t =
        crate::dynamics::evolve_nonhermitian(&heff_red, &red0, zp.pulse_time)?.normalize();
    let full_t =
        crate::dynamics::evolve_nonhermitian(&heff_full, &emb.embed_state(&red0), zp.pulse_time)?
            .normalize();
    let cond = crate::linalg::trace_distance(
        &(&full_t * full_t.adjoint()),
        &emb.embed_density(&(&red_t * red_t.adjoint())),
    );

    // Lindblad with the collective channel and the coherent drive
    let red_model = crate::dynamics::LindbladModel::new(
        (&h_red).clone(),
        vec![crate::dynamics::JumpChannel::waveguide("wg", p1d, o_red.clone())],
    )?;
    let full_model = crate::dynamics::LindbladModel::new(
        (&h_full).clone(),
        vec![crate::dynamics::JumpChannel::waveguide("wg", p1d, o_full.clone())],
    )?;
    let t = zp.pulse_time.min(2.0 / p1d.max(1.0)).max(0.05 * zp.pulse_time);
    let red_rho =
        crate::dynamics::integrate_lindblad(&red_model, &(&red0 * red0.adjoint()), t, 1e-11)?;
    let f0 = emb.embed_state(&red0);
    let full_rho =
        crate::dynamics::integrate_lindblad(&full_model, &(&f0 * f0.adjoint()), t, 1e-11)?;
    let lind = compare_with_symmetric(&full_rho, &red_rho, &emb)?;

    Ok(OracleReport {
        conditional_distance: cond,
        lindblad_distance: lind,
    })
}

#[allow(clippy::too_many_arguments)]
fn lindblad_collective_distance(
    basis: &HilbertBasis,
    emb: &SymmetricEmbedding,
    _full: &FullSpaceModel,
    o_full: &CMat,
    o_red: &CMat,
    p1d: f64,
    red0: &CVec,
    t: f64,
) -> Result<f64> {
    let red_model = crate::dynamics::LindbladModel::new(
        CMat::zeros(basis.dim(), basis.dim()),
        vec![crate::dynamics::JumpChannel::waveguide("wg", p1d, o_red.clone())],
    )?;
    let d = o_full.nrows();
    let full_model = crate::dynamics::LindbladModel::new(
        CMat::zeros(d, d),
        vec![crate::dynamics::JumpChannel::waveguide("wg", p1d, o_full.clone())],
    )?;
    let horizon = t.min(3.0 / p1d.max(1.0));
    let red_rho =
        crate::dynamics::integrate_lindblad(&red_model, &(red0 * red0.adjoint()), horizon, 1e-11)?;
    let f0 = emb.embed_state(red0);
    let full_rho =
        crate::dynamics::integrate_lindblad(&full_model, &(&f0 * f0.adjoint()), horizon, 1e-11)?;
    compare_with_symmetric(&full_rho, &red_rho, emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_lindblad, JumpChannel, LindbladModel};
    use crate::hilbert::EnsembleSpec;
    use approx::assert_relative_eq;

    #[test]
    fn embedding_is_isometry() {
        let basis =
            HilbertBasis::build(vec![EnsembleSpec::new(3, &["g", "e"])], 3).unwrap();
        let e = SymmetricEmbedding::for_basis(&basis).unwrap();
        let gram = e.matrix.adjoint() * &e.matrix;
        assert!((gram - CMat::identity(basis.dim(), basis.dim())).norm() < 1e-12);
    }

    #[test]
    fn collective_ops_intertwine() {
        // E S_sym = S_full E on the symmetric subspace
        let basis =
            HilbertBasis::build(vec![EnsembleSpec::new(3, &["g", "e"])], 3).unwrap();
        let e = SymmetricEmbedding::for_basis(&basis).unwrap();
        let s_red = basis.collective_op(0, "g", "e").unwrap();
        let full = FullSpaceModel::new(3, 2).unwrap();
        let s_full = full.collective(1, 0, &full.uniform_phases());
        let lhs = &s_full * &e.matrix;
        let rhs = &e.matrix * &s_red;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn single_atom_reduces_exactly() {
        // N = 1: full space IS the reduced space
        let full = FullSpaceModel::new(1, 2).unwrap();
        let op = full.collective(0, 1, &full.uniform_phases());
        let model = LindbladModel::new(
            CMat::zeros(2, 2),
            vec![JumpChannel::free_space("decay", 1.0, op)],
        )
        .unwrap();
        let mut rho0 = CMat::zeros(2, 2);
        rho0[(1, 1)] = c64(1.0, 0.0);
        let rho = integrate_lindblad(&model, &rho0, 1.5, 1e-10).unwrap();
        assert_relative_eq!(rho[(1, 1)].re, (-1.5f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn oracle_cases_agree_and_control_breaks() {
        let r = weak_drive_oracle(0.05, 20.0, 3.0).unwrap();
        assert!(r.conditional_distance < 1e-8, "{}", r.conditional_distance);
        assert!(r.lindblad_distance < 1e-8, "{}", r.lindblad_distance);
        let z = zeno_step_oracle(15.0, false).unwrap();
        assert!(z.conditional_distance < 1e-8, "{}", z.conditional_distance);
        assert!(z.lindblad_distance < 1e-8, "{}", z.lindblad_distance);
        let broken = zeno_step_oracle(15.0, true).unwrap();
        assert!(broken.lindblad_distance > 1e-3, "{}", broken.lindblad_distance);
    }

    #[test]
    fn collective_decay_stays_symmetric() {
        // N = 2, symmetric initial state, collective decay only: the state
        // never leaves the symmetric sector
        let full = FullSpaceModel::new(2, 2).unwrap();
        let op = full.collective(0, 1, &full.uniform_phases());
        let model = LindbladModel::new(
            CMat::zeros(4, 4),
            vec![JumpChannel::waveguide("collective", 1.0, op)],
        )
        .unwrap();
        let basis =
            HilbertBasis::build(vec![EnsembleSpec::new(2, &["g", "e"])], 2).unwrap();
        let e = SymmetricEmbedding::for_basis(&basis).unwrap();
        // symmetric one-excitation start
        let psi_red = basis
            .unit_vector(&crate::hilbert::BasisState(vec![vec![1, 1]]))
            .unwrap();
        let psi_full = e.embed_state(&psi_red);
        let rho = integrate_lindblad(&model, &(&psi_full * psi_full.adjoint()), 0.8, 1e-11)
            .unwrap();
        // antisymmetric singlet overlap stays zero
        let mut anti = CVec::zeros(4);
        anti[1] = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        anti[2] = c64(-std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let overlap = (anti.adjoint() * &rho * &anti)[(0, 0)].re;
        assert!(overlap.abs() < 1e-10);
    }
}
