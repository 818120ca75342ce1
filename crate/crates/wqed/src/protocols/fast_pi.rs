//! Heralding with stored auxiliary levels and a single detector atom.
//!
//! Step a moves the source excitation into the target through a Zeno
//! transfer. Step b must be fast to keep the infidelity at the 1/(N P_1d)
//! scaling: a π-pulse puts the target excitation into the waveguide-coupled
//! level, the target/detector pair evolves freely for a short window, and
//! closing π-pulses freeze the outcome. Failures do not destroy the stored
//! excitations — they are repumped and retried — so the infidelity budget is
//! the free-space exposure of the target per attempt divided by p.

use crate::dynamics::{integrate_lindblad, JumpChannel, LindbladModel};
use crate::linalg::{c64, CMat};
use crate::optimize::scan_then_golden;
use crate::quad::integrate;
use crate::zeno;
use crate::{Error, Result};

use super::{PhysicalParams, StepReport};

/// Amplitudes (β1, β2) of the free step-b evolution at scaled time
/// u = Γ_1d t: β1 = ½e^{−u/(2P)}(1+e^{−u}), β2 = −½e^{−u/(2P)}(1−e^{−u}).
pub fn step_b_amplitudes(t: f64, gamma_1d: f64, gamma_star: f64) -> (f64, f64) {
    let damp = (-0.5 * gamma_star * t).exp();
    let osc = (-gamma_1d * t).exp();
    (0.5 * damp * (1.0 + osc), -0.5 * damp * (1.0 - osc))
}

/// Populations {|β1|², |β2|²}; |β2(T_b)|² is the single-window heralding
/// probability p_b.
pub fn step_b_populations(t: f64, gamma_1d: f64, gamma_star: f64) -> (f64, f64) {
    let (b1, b2) = step_b_amplitudes(t, gamma_1d, gamma_star);
    (b1 * b1, b2 * b2)
}

/// Effective 2×2 Hamiltonian of the free step-b window in {Ψ_b1, Ψ_b2}.
pub fn step_b_hamiltonian(gamma_1d: f64, gamma_star: f64) -> CMat {
    let d = c64(0.0, -0.5 * (gamma_1d + gamma_star));
    let o = c64(0.0, -0.5 * gamma_1d);
    CMat::from_row_slice(2, 2, &[d, o, o, d])
}

/// Window length (in units of 1/Γ_1d) that maximizes the infinite-retry
/// cumulative heralding probability |β2|²/(1 − |β1|²).
///
/// At T_b = 1/Γ_1d a single window heralds with ≈ 0.1; retrying from the
/// surviving β1 branch saturates at |β2|²/(1−|β1|²), which approaches 1/3
/// for long windows until the Γ* decay bites. The optimum sits at a few
/// 1/Γ_1d.
pub fn optimal_retry_window(p1d: f64) -> f64 {
    let g = |u: f64| {
        let (s, b) = step_b_populations(u, 1.0, 1.0 / p1d);
        b / (1.0 - s)
    };
    let (u, _) = scan_then_golden(g, 0.2, 40.0, 120, 1e-9);
    u
}

/// Window used for a given retry budget: the paper's T_b = 1/Γ_1d for a
/// single shot, the cumulative optimum otherwise.
pub fn retry_window(p1d: f64, repeat_b: u32) -> f64 {
    if repeat_b <= 1 {
        1.0
    } else {
        optimal_retry_window(p1d)
    }
}

/// Cumulative step-b success over `repeat_b` independent retries with window
/// `window_u` (units of 1/Γ_1d): each retry restarts from the surviving β1
/// population, Σ_j |β2|²|β1|^{2j}.
pub fn cumulative_step_b(p1d: f64, repeat_b: u32, window_u: f64) -> f64 {
    let (s, b) = step_b_populations(window_u, 1.0, 1.0 / p1d);
    if repeat_b == 0 {
        return 0.0;
    }
    b * (1.0 - s.powi(repeat_b as i32)) / (1.0 - s)
}

fn retry_exposure(survival: f64, repeat_b: u32) -> f64 {
    (1.0 - survival.powi(repeat_b as i32)) / (1.0 - survival)
}

/// Free-space exposure integrals over one window (units of 1/Γ_1d):
/// (Γ*∫|β1|² dt, Γ*∫|β2|² dt).
fn window_free_space(p1d: f64, window_u: f64) -> (f64, f64) {
    let f1 = integrate(
        |u| step_b_populations(u, 1.0, 1.0 / p1d).0,
        0.0,
        window_u,
        1e-12,
    ) / p1d;
    let f2 = integrate(
        |u| step_b_populations(u, 1.0, 1.0 / p1d).1,
        0.0,
        window_u,
        1e-12,
    ) / p1d;
    (f1, f2)
}

/// The paper's bookkeeping for "transferred but undetected" over one window
/// at T_b = 1/Γ_1d: collective emission from either component plus the
/// detector's e→s leg; ≈ 0.71.
pub fn undetected_transfer_probability(p1d: f64) -> f64 {
    let pop = |u: f64| step_b_populations(u, 1.0, 1.0 / p1d);
    integrate(|u| pop(u).0 + pop(u).1, 0.0, 1.0, 1e-12)
        + integrate(|u| pop(u).1, 0.0, 1.0, 1e-12) / (2.0 * p1d)
}

/// Closed-form step analysis.
pub fn step(params: &PhysicalParams, repeat_b: u32) -> Result<StepReport> {
    if params.stored >= params.n {
        return Err(Error::InvalidInput("need N > m".into()));
    }
    if repeat_b < 1 {
        return Err(Error::InvalidInput("need repeat_b ≥ 1".into()));
    }
    let p1d = params.purcell;
    let n_m = params.n - params.stored;
    let p_a = zeno::success_probability(0, n_m, p1d);

    // step-a jump exposure from the analytic envelopes; the receiving
    // ensemble of the Zeno step is the target, so its free-space channel is
    // the b-channel of the general step
    let za = zeno::jump_probabilities_analytic(&zeno::ZenoParams::optimal(0, n_m, p1d, 1.0))?;

    let window_u = retry_window(p1d, repeat_b);
    let (surv, _) = step_b_populations(window_u, 1.0, 1.0 / p1d);
    let p_b = cumulative_step_b(p1d, repeat_b, window_u);
    let exposure = retry_exposure(surv, repeat_b);
    let (f_target, f_det) = window_free_space(p1d, window_u);

    let p = p_a * p_b;
    let m = params.stored as f64;
    let n = params.n as f64;
    let p_repump = params.pump_coefficient / (n * p1d);
    let p_free_target = za.b_star() + exposure * f_target;
    let eps_closed = params.alpha / (n * p1d.sqrt());
    let eps_fail = (za.b_star() + exposure * f_target + p_repump) * (m / n);
    Ok(StepReport {
        p,
        p_a,
        p_b,
        p_coll_undetected: undetected_transfer_probability(p1d),
        p_free_source: za.a_star(),
        p_free_target,
        p_free_detector: exposure * f_det,
        p_repump,
        eps_closed,
        eps_fail,
        i_step: eps_closed + eps_fail / p,
        ..StepReport::default()
    })
}

/// Five-state Lindblad model of one step-b window: {Ψ_b1, Ψ_b2} plus sinks
/// for the collective waveguide channel and the two free-space channels.
pub fn step_b_sink_model(gamma_1d: f64, gamma_star: f64) -> Result<LindbladModel> {
    let mut wg = CMat::zeros(5, 5);
    wg[(2, 0)] = c64(1.0, 0.0);
    wg[(2, 1)] = c64(1.0, 0.0);
    let mut ft = CMat::zeros(5, 5);
    ft[(3, 0)] = c64(1.0, 0.0);
    let mut fd = CMat::zeros(5, 5);
    fd[(4, 1)] = c64(1.0, 0.0);
    LindbladModel::new(
        CMat::zeros(5, 5),
        vec![
            JumpChannel::waveguide("waveguide", gamma_1d, wg),
            JumpChannel::free_space("free-space target", gamma_star, ft),
            JumpChannel::free_space("free-space detector", gamma_star, fd),
        ],
    )
}

/// Full-numeric step analysis: master-equation integration of step a (sink
/// model) and step b (window model) with every jump channel tracked, plus
/// the repumping branch accounting.
pub fn numeric(params: &PhysicalParams, repeat_b: u32) -> Result<StepReport> {
    if params.stored >= params.n {
        return Err(Error::InvalidInput("need N > m".into()));
    }
    if repeat_b < 1 {
        return Err(Error::InvalidInput("need repeat_b ≥ 1".into()));
    }
    let p1d = params.purcell;
    let n_m = params.n - params.stored;
    let za = zeno::jump_probabilities_lindblad(
        &zeno::ZenoParams::optimal(0, n_m, p1d, 1.0),
        1e-10,
    )?;
    let p_a = za.success;

    let window_u = retry_window(p1d, repeat_b);
    let model = step_b_sink_model(1.0, 1.0 / p1d)?;
    let mut rho0 = CMat::zeros(5, 5);
    rho0[(0, 0)] = c64(1.0, 0.0);
    let rho = integrate_lindblad(&model, &rho0, window_u, 1e-11)?;
    let surv = rho[(0, 0)].re;
    let p_b_win = rho[(1, 1)].re;
    let exposure = retry_exposure(surv, repeat_b);
    let p_b = p_b_win * exposure;
    let p = p_a * p_b;

    let m = params.stored as f64;
    let n = params.n as f64;
    // repump through the waveguide: collective decay at N_m Γ_1d against Γ*
    let p_repump = params.pump_coefficient / (1.0 + n_m as f64 * p1d);
    let p_free_target = za.b_star() + exposure * rho[(3, 3)].re;
    let eps_closed = params.alpha / (n * p1d.sqrt());
    let eps_fail = (p_free_target + p_repump) * (m / n);
    Ok(StepReport {
        p,
        p_a,
        p_b,
        p_coll_undetected: rho[(2, 2)].re,
        p_free_source: za.a_star(),
        p_free_target,
        p_free_detector: exposure * rho[(4, 4)].re,
        p_repump,
        eps_closed,
        eps_fail,
        i_step: eps_closed + eps_fail / p,
        ..StepReport::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_nonhermitian;
    use crate::linalg::CVec;
    use approx::assert_relative_eq;

    #[test]
    fn amplitude_base_cases() {
        let (b1, b2) = step_b_populations(0.0, 1.0, 0.01);
        assert_relative_eq!(b1, 1.0, epsilon = 1e-15);
        assert_relative_eq!(b2, 0.0, epsilon = 1e-15);
        // Γ* = 0 at t = 1/Γ_1d: the closed-form constants
        let e = std::f64::consts::E;
        let (b1, b2) = step_b_populations(1.0, 1.0, 0.0);
        assert_relative_eq!(b2, (e - 1.0).powi(2) / (4.0 * e * e), epsilon = 1e-14);
        assert_relative_eq!(b1, (e + 1.0).powi(2) / (4.0 * e * e), epsilon = 1e-14);
        assert!((b2 - 0.0999).abs() < 1e-3);
        assert!((b1 - 0.46).abs() < 0.01);
    }

    #[test]
    fn numeric_two_level_matches_closed_form() {
        for &p1d in &[100.0, 1000.0] {
            let h = step_b_hamiltonian(p1d, 1.0);
            let psi0 = CVec::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
            let t = 1.0 / p1d;
            let psi = evolve_nonhermitian(&h, &psi0, t).unwrap();
            let (b1, b2) = step_b_populations(t, p1d, 1.0);
            assert_relative_eq!(psi[0].norm_sqr(), b1, epsilon = 1e-12);
            assert_relative_eq!(psi[1].norm_sqr(), b2, epsilon = 1e-12);
            // and the quoted approximation (e−1)²/(4e²)(1−1/P) to 1e-3 rel
            let e = std::f64::consts::E;
            let approx_pb = (e - 1.0).powi(2) / (4.0 * e * e) * (1.0 - 1.0 / p1d);
            assert!((psi[1].norm_sqr() - approx_pb).abs() / approx_pb < 1e-3);
        }
    }

    #[test]
    fn retries_saturate_near_one_third() {
        for &p1d in &[100.0, 1000.0] {
            let w = optimal_retry_window(p1d);
            let p_inf = cumulative_step_b(p1d, 10_000, w);
            assert!(p_inf > 0.30 && p_inf <= 1.0 / 3.0 + 0.01, "P={p1d}: {p_inf}");
            // monotone in the retry budget
            let mut prev = 0.0;
            for r in 1..30 {
                let p_r = cumulative_step_b(p1d, r, w);
                assert!(p_r >= prev);
                prev = p_r;
            }
        }
    }

    #[test]
    fn single_window_jump_budget() {
        // p_{b,*} = Γ*∫|β1|² ≈ 0.67/P_1d and the undetected-transfer
        // diagnostic ≈ 0.71
        let p1d = 1e4;
        let (f1, _) = window_free_space(p1d, 1.0);
        assert!((f1 * p1d - 0.674).abs() < 5e-3, "{}", f1 * p1d);
        let u = undetected_transfer_probability(p1d);
        assert!((u - 0.716).abs() < 5e-3, "{u}");
    }

    #[test]
    fn closed_form_step_values() {
        // N_m = 100, P = 100, m = 1, repeat_b = 1: p ≈ 0.723 × 0.099
        let params = PhysicalParams::new(101, 100.0).with_stored(1);
        let s = step(&params, 1).unwrap();
        assert!((s.p_a - 0.7232).abs() < 1e-3);
        assert!((s.p_b - 0.0990).abs() < 1e-3);
        assert!((s.p - 0.0716).abs() < 3e-4);
        // α = 0 and Γ* → 0 (huge Purcell) drives i_step to 0
        let clean = PhysicalParams::new(101, 1e12).with_stored(1).with_alpha(0.0);
        let s0 = step(&clean, 1).unwrap();
        assert!(s0.i_step < 1e-8, "{}", s0.i_step);
    }

    #[test]
    fn numeric_close_to_analytic() {
        let params = PhysicalParams::new(101, 100.0).with_stored(1);
        let a = step(&params, 1).unwrap();
        let n = numeric(&params, 1).unwrap();
        assert!((n.p - a.p).abs() / a.p < 0.1, "p: {} vs {}", n.p, a.p);
        assert!(
            (n.i_step - a.i_step).abs() / a.i_step < 0.35,
            "i: {} vs {}",
            n.i_step,
            a.i_step
        );
    }

    #[test]
    fn step_b_window_conserves_probability() {
        let model = step_b_sink_model(1.0, 0.01).unwrap();
        let mut rho0 = CMat::zeros(5, 5);
        rho0[(0, 0)] = c64(1.0, 0.0);
        let rho = integrate_lindblad(&model, &rho0, 1.0, 1e-11).unwrap();
        let total: f64 = (0..5).map(|i| rho[(i, i)].re).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-8);
        // window populations match the closed forms
        let (b1, b2) = step_b_populations(1.0, 1.0, 0.01);
        assert_relative_eq!(rho[(0, 0)].re, b1, epsilon = 1e-8);
        assert_relative_eq!(rho[(1, 1)].re, b2, epsilon = 1e-8);
    }
}
