//! Single-step heralding through two waveguide modes.
//!
//! The excited level couples to two guided modes: e↔g at Γ_1d^g and e↔s at
//! Γ_1d^s. One shot moves the source excitation through the target into the
//! detector atom, whose arrival in g heralds success. No closed transition
//! is needed; the price is a √N_m-worse exponent when referenced to the
//! larger of the two Purcell factors.
//!
//! Basis ordering {Ψ1..Ψ4}: source excited → target excited → detector
//! excited (target stores s) → detector in g (success).

use std::f64::consts::PI;

use crate::dynamics::{decay_branching, evolve_nonhermitian, JumpChannel};
use crate::linalg::{c64, CMat, CVec};
use crate::optimize::scan_then_golden;
use crate::quad::integrate;
use crate::{Error, Result};

use super::{PhysicalParams, StepReport};

/// Decay-rate ratio Γ_1d^s/Γ_1d^g that makes both superradiant channels
/// decay at the same (N_m+1)Γ_1d^g.
pub fn optimal_ratio(n_m: u32) -> f64 {
    (n_m as f64 + 1.0) / 2.0
}

/// The 4×4 effective Hamiltonian; `ratio` = Γ_1d^s/Γ_1d^g.
pub fn hamiltonian(n_m: u32, gamma_1d_g: f64, gamma_star: f64, ratio: f64, omega: f64) -> CMat {
    let nm = n_m as f64;
    let g = gamma_1d_g;
    let gs_mode = ratio * gamma_1d_g;
    let gst = gamma_star;
    let mut h = CMat::zeros(4, 4);
    h[(0, 0)] = c64(0.0, -0.5 * (g + gst));
    h[(0, 1)] = c64(0.0, -0.5 * nm.sqrt() * g);
    h[(1, 0)] = h[(0, 1)];
    h[(1, 1)] = c64(0.0, -0.5 * (nm * g + gs_mode + gst));
    h[(1, 2)] = c64(0.0, -0.5 * gs_mode);
    h[(2, 1)] = h[(1, 2)];
    h[(2, 2)] = c64(0.0, -0.5 * (gs_mode + gst));
    h[(2, 3)] = c64(0.5 * omega, 0.0);
    h[(3, 2)] = h[(2, 3)];
    h
}

/// The collective dark state (√N_m, −1, 1, 0)/√(N_m+2), annihilated by both
/// waveguide channels for any rate ratio.
pub fn dark_state(n_m: u32) -> CVec {
    let nm = n_m as f64;
    let norm = (nm + 2.0).sqrt();
    CVec::from_vec(vec![
        c64(nm.sqrt() / norm, 0.0),
        c64(-1.0 / norm, 0.0),
        c64(1.0 / norm, 0.0),
        c64(0.0, 0.0),
    ])
}

/// Loss-balancing drive Ω^d = √(N_m Γ_1d Γ*/3).
pub fn optimal_omega(n_m: u32, gamma_1d: f64, gamma_star: f64) -> f64 {
    (n_m as f64 * gamma_1d * gamma_star / 3.0).sqrt()
}

/// Transfer pulse time T = √3 π/√(Γ_1d Γ*).
pub fn optimal_time(gamma_1d: f64, gamma_star: f64) -> f64 {
    3f64.sqrt() * PI / (gamma_1d * gamma_star).sqrt()
}

/// Closed-form heralding probability p = N_m/(N_m+2) e^{−√3π/√P_1d}, with
/// P_1d = Γ_1d^g/Γ*.
pub fn closed_form_p(n_m: u32, p1d: f64) -> f64 {
    let nm = n_m as f64;
    nm / (nm + 2.0) * (-3f64.sqrt() * PI / p1d.sqrt()).exp()
}

/// The same probability referenced to the larger Purcell factor
/// P_s = Γ_1d^s/Γ* at the optimal ratio: Γ_1d^g = 2 P_s/(N_m+1), so the
/// exponent picks up a √N_m.
pub fn closed_form_p_s_referenced(n_m: u32, p1d_s: f64) -> f64 {
    closed_form_p(n_m, 2.0 * p1d_s / (n_m as f64 + 1.0))
}

/// State at time t from Ψ1 under the 4×4 effective Hamiltonian.
pub fn propagate(n_m: u32, p1d: f64, ratio: f64, omega: f64, t: f64) -> Result<CVec> {
    let h = hamiltonian(n_m, p1d, 1.0, ratio, omega);
    let psi0 = CVec::from_vec(vec![
        c64(1.0, 0.0),
        c64(0.0, 0.0),
        c64(0.0, 0.0),
        c64(0.0, 0.0),
    ]);
    evolve_nonhermitian(&h, &psi0, t)
}

/// |α4(T)|² at the default drive and timing.
pub fn numeric_p(n_m: u32, p1d: f64) -> Result<f64> {
    let omega = optimal_omega(n_m, p1d, 1.0);
    let t = optimal_time(p1d, 1.0);
    Ok(propagate(n_m, p1d, optimal_ratio(n_m), omega, t)?[3].norm_sqr())
}

/// Numeric transfer probability maximized over drive and pulse time at a
/// fixed rate ratio.
pub fn optimized_numeric_p(n_m: u32, p1d: f64, ratio: f64) -> f64 {
    let omega0 = optimal_omega(n_m, p1d, 1.0);
    let t0 = optimal_time(p1d, 1.0);
    let p_of = |omega: f64| {
        let f = |t: f64| {
            propagate(n_m, p1d, ratio, omega, t)
                .map(|v| v[3].norm_sqr())
                .unwrap_or(0.0)
        };
        scan_then_golden(f, 0.02 * t0, 6.0 * t0, 120, 1e-7 * t0).1
    };
    let (_, p) = scan_then_golden(|lw: f64| p_of(lw.exp()), (0.1 * omega0).ln(), (10.0 * omega0).ln(), 40, 1e-7);
    p
}

/// Grid search for the rate ratio maximizing the (Ω, T)-optimized transfer.
/// Returns (best ratio, best p).
pub fn optimize_ratio(n_m: u32, p1d: f64, lo: f64, hi: f64, n_grid: usize) -> (f64, f64) {
    assert!(n_grid >= 3 && lo > 0.0 && hi > lo);
    let f = |lr: f64| optimized_numeric_p(n_m, p1d, lr.exp());
    let (lr, p) = scan_then_golden(f, lo.ln(), hi.ln(), n_grid, 1e-4);
    (lr.exp(), p)
}

/// Closed-form step analysis.
pub fn step(params: &PhysicalParams) -> Result<StepReport> {
    if params.stored >= params.n {
        return Err(Error::InvalidInput("need N > m".into()));
    }
    let n_m = params.n - params.stored;
    let p1d = params.purcell;
    let p = closed_form_p(n_m, p1d);
    let p_star = 3f64.sqrt() * PI / (2.0 * n_m as f64 * p1d.sqrt());
    let m = params.stored as f64;
    let n = params.n as f64;
    let p_repump = params.pump_coefficient / (n * p1d);
    let eps_fail = (p_star + p_repump) * (m / n);
    Ok(StepReport {
        p,
        p_a: p,
        p_free_target: p_star,
        p_repump,
        eps_fail,
        i_step: eps_fail / p,
        ..StepReport::default()
    })
}

/// Channel-resolved probabilities of one shot, from exact quadrature of the
/// 4×4 populations plus the analytic relaxation tail.
#[derive(Clone, Copy, Debug, Default)]
pub struct SingleStepBudget {
    pub success: f64,
    pub free_space: f64,
    /// Free-space jumps from the target's excited component only (the
    /// damaging channel).
    pub free_space_target: f64,
    pub waveguide_g: f64,
    pub waveguide_s: f64,
    pub tail: f64,
}

impl SingleStepBudget {
    pub fn total(&self) -> f64 {
        self.success + self.free_space + self.waveguide_g + self.waveguide_s + self.tail
    }
}

pub fn jump_budget(n_m: u32, p1d: f64, ratio: f64, omega: f64, t_end: f64) -> Result<SingleStepBudget> {
    let nm = n_m as f64;
    let tol = 1e-10;
    let at = |t: f64| propagate(n_m, p1d, ratio, omega, t).unwrap();
    let fs = integrate(
        |t| {
            let v = at(t);
            v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
        },
        0.0,
        t_end,
        tol,
    );
    let fs_target = integrate(|t| at(t)[1].norm_sqr(), 0.0, t_end, tol);
    let wg_g = p1d
        * integrate(
            |t| {
                let v = at(t);
                (v[0] + v[1] * nm.sqrt()).norm_sqr()
            },
            0.0,
            t_end,
            tol,
        );
    let wg_s = ratio
        * p1d
        * integrate(
            |t| {
                let v = at(t);
                (v[1] + v[2]).norm_sqr()
            },
            0.0,
            t_end,
            tol,
        );
    // tail: remaining excited amplitudes decay with the drive off
    let v = at(t_end);
    let mut wg_g_op = CMat::zeros(4, 4);
    wg_g_op[(3, 0)] = c64(1.0, 0.0);
    wg_g_op[(3, 1)] = c64(nm.sqrt(), 0.0);
    let mut wg_s_op = CMat::zeros(4, 4);
    wg_s_op[(3, 1)] = c64(1.0, 0.0);
    wg_s_op[(3, 2)] = c64(1.0, 0.0);
    let mut fs_op = CMat::zeros(4, 4);
    fs_op[(3, 0)] = c64(1.0, 0.0);
    fs_op[(3, 1)] = c64(1.0, 0.0);
    fs_op[(3, 2)] = c64(1.0, 0.0);
    // the sink reuses the stable Ψ4 slot with the success amplitude removed
    let mut rem = CMat::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            rem[(i, j)] = v[i] * v[j].conj();
        }
    }
    let channels = vec![
        JumpChannel::waveguide("g-mode", p1d, wg_g_op),
        JumpChannel::waveguide("s-mode", ratio * p1d, wg_s_op),
        JumpChannel::free_space("free space", 1.0, fs_op),
    ];
    let tail: f64 = decay_branching(&channels, &rem, 1)
        .iter()
        .filter(|(k, _)| !k.is_empty())
        .map(|(_, v)| v)
        .sum();
    Ok(SingleStepBudget {
        success: v[3].norm_sqr(),
        free_space: fs,
        free_space_target: fs_target,
        waveguide_g: wg_g,
        waveguide_s: wg_s,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dark_state_is_dark_for_any_ratio() {
        for &ratio in &[1.0, 17.0, 50.5, 200.0] {
            let n_m = 100;
            let nm = 100f64;
            let d = dark_state(n_m);
            // waveguide jump amplitudes vanish
            let wg_g = d[0] + d[1] * nm.sqrt();
            let wg_s = d[1] + d[2];
            assert!(wg_g.norm() < 1e-12 && wg_s.norm() < 1e-12, "ratio={ratio}");
            // and the dissipative part of H acts as −(i/2)Γ* only
            let h = hamiltonian(n_m, 7.0, 1.0, ratio, 0.0);
            let hd = &h * &d;
            let expect = &d * c64(0.0, -0.5);
            assert!((hd - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn drive_off_decouples_goal_state() {
        let h = hamiltonian(50, 10.0, 1.0, optimal_ratio(50), 0.0);
        assert_eq!(h[(2, 3)], c64(0.0, 0.0));
        assert_eq!(h[(3, 3)], c64(0.0, 0.0));
    }

    #[test]
    fn matched_superradiance_at_optimal_ratio() {
        // each waveguide channel on its own is superradiant at (N_m+1)Γ_1d^g
        // when Γ_1d^s/Γ_1d^g = (N_m+1)/2: rate_g = Γ_g|v_g|² with
        // v_g = (1, √N_m), rate_s = Γ_s|v_s|² with v_s = (1, 1)
        let n_m = 100u32;
        let g = 1.0;
        let ratio = optimal_ratio(n_m);
        let rate_g = g * (1.0 + n_m as f64);
        let rate_s = ratio * g * 2.0;
        assert_relative_eq!(rate_g, rate_s, epsilon = 1e-12);
        // and the hamiltonian's dissipative diagonal carries those rates
        let h = hamiltonian(n_m, g, 0.0, ratio, 0.0);
        assert_relative_eq!(h[(0, 0)].im, -0.5 * g, epsilon = 1e-12);
        assert_relative_eq!(
            h[(1, 1)].im,
            -0.5 * (n_m as f64 * g + ratio * g),
            epsilon = 1e-12
        );
        assert_relative_eq!(h[(2, 2)].im, -0.5 * ratio * g, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_values() {
        // N_m = 100, P = 100 → ≈ 0.569; saturates at N_m/(N_m+2)
        assert!((closed_form_p(100, 100.0) - 0.569).abs() < 1e-3);
        assert_relative_eq!(closed_form_p(100, 1e12), 100.0 / 102.0, epsilon = 1e-5);
        // s-referenced form matches the substitution
        let p_s = closed_form_p_s_referenced(100, 100.0);
        assert_relative_eq!(p_s, closed_form_p(100, 200.0 / 101.0), epsilon = 1e-12);
    }

    #[test]
    fn numeric_close_to_closed_form() {
        for &p1d in &[100.0, 1000.0] {
            let pn = numeric_p(100, p1d).unwrap();
            let pc = closed_form_p(100, p1d);
            assert!((pn - pc).abs() / pc < 0.05, "P={p1d}: {pn} vs {pc}");
        }
    }

    #[test]
    fn step_scalings() {
        // I ∝ m/(N²√P): doubling N at fixed m quarters the infidelity
        let base = PhysicalParams::new(100, 100.0).with_stored(2);
        let big = PhysicalParams::new(200, 100.0).with_stored(2);
        let i1 = step(&base).unwrap().i_step;
        let i2 = step(&big).unwrap().i_step;
        let ratio = i1 / i2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio = {ratio}");
        // and roughly ∝ 1/√P at fixed N (the growing p sharpens the ratio a
        // little beyond the bare √4 = 2)
        let hi = PhysicalParams::new(100, 400.0).with_stored(2);
        let i3 = step(&hi).unwrap().i_step;
        let r = i1 / i3;
        assert!(r > 1.7 && r < 3.0, "r = {r}");
    }

    #[test]
    fn budget_conserves_probability() {
        let n_m = 60;
        let p1d = 80.0;
        let b = jump_budget(
            n_m,
            p1d,
            optimal_ratio(n_m),
            optimal_omega(n_m, p1d, 1.0),
            optimal_time(p1d, 1.0),
        )
        .unwrap();
        assert_relative_eq!(b.total(), 1.0, epsilon = 1e-6);
        // the damaging target channel is close to the quoted √3π/(2 N_m √P)
        let quote = 3f64.sqrt() * PI / (2.0 * n_m as f64 * p1d.sqrt());
        assert!(
            b.free_space_target > 0.3 * quote && b.free_space_target < 2.0 * quote,
            "{} vs {}",
            b.free_space_target,
            quote
        );
    }
}
