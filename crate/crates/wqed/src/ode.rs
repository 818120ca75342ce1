//! Adaptive Dormand–Prince 4(5) integration for matrix-valued linear ODEs.

use crate::linalg::CMat;
use crate::{Error, Result};

/// State vector abstraction so the stepper works on single matrices and on
/// stacks of matrices (the jump-resolved hierarchy).
pub trait OdeState: Clone {
    fn axpy_state(&mut self, a: f64, other: &Self);
    fn scale_state(&mut self, a: f64);
    fn max_abs(&self) -> f64;
    fn zeros_like(&self) -> Self;
}

impl OdeState for CMat {
    fn axpy_state(&mut self, a: f64, other: &Self) {
        *self += other * crate::c64(a, 0.0);
    }
    fn scale_state(&mut self, a: f64) {
        *self *= crate::c64(a, 0.0);
    }
    fn max_abs(&self) -> f64 {
        crate::linalg::max_abs(self)
    }
    fn zeros_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
}

impl OdeState for Vec<CMat> {
    fn axpy_state(&mut self, a: f64, other: &Self) {
        for (s, o) in self.iter_mut().zip(other) {
            s.axpy_state(a, o);
        }
    }
    fn scale_state(&mut self, a: f64) {
        for s in self.iter_mut() {
            s.scale_state(a);
        }
    }
    fn max_abs(&self) -> f64 {
        self.iter().map(|m| OdeState::max_abs(m)).fold(0.0, f64::max)
    }
    fn zeros_like(&self) -> Self {
        self.iter().map(|m| m.zeros_like()).collect()
    }
}

// Dormand–Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0,
    187.0 / 2100.0, 1.0 / 40.0,
];

/// Integrate dX/dt = f(X) from 0 to `t_end` with adaptive step control.
///
/// `atol` is an absolute per-entry error target per unit time. Signals
/// [`Error::StepSizeUnderflow`] when the controller collapses the step, which
/// in practice means the problem is stiff at the requested tolerance.
pub fn integrate_adaptive<S, F>(rhs: F, x0: &S, t_end: f64, atol: f64) -> Result<S>
where
    S: OdeState,
    F: Fn(&S) -> S,
{
    if t_end < 0.0 {
        return Err(Error::InvalidInput("negative integration time".into()));
    }
    if t_end == 0.0 {
        return Ok(x0.clone());
    }
    let mut x = x0.clone();
    let mut t = 0.0_f64;
    let scale0 = x.max_abs().max(1.0);
    let mut dt = (t_end / 16.0).min(0.1 / (rhs(&x).max_abs() / scale0 + 1e-12));
    dt = dt.min(t_end).max(t_end * 1e-12);
    let min_step = t_end * 1e-14;

    let mut k: Vec<S> = Vec::with_capacity(7);
    while t < t_end {
        if dt < min_step {
            return Err(Error::StepSizeUnderflow { t });
        }
        if t + dt > t_end {
            dt = t_end - t;
        }
        k.clear();
        k.push(rhs(&x));
        for i in 0..6 {
            let mut xi = x.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[i][j];
                if a != 0.0 {
                    xi.axpy_state(dt * a, kj);
                }
            }
            k.push(rhs(&xi));
        }
        let mut x5 = x.clone();
        let mut err = x.zeros_like();
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                x5.axpy_state(dt * B5[j], kj);
            }
            let d = B5[j] - B4[j];
            if d != 0.0 {
                err.axpy_state(dt * d, kj);
            }
        }
        let scale = x.max_abs().max(x5.max_abs()).max(1e-30);
        let e = err.max_abs() / (atol * (1.0 + scale));
        if e <= 1.0 {
            x = x5;
            t += dt;
            dt *= (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.3, 5.0);
        } else {
            dt *= (0.9 * e.powf(-0.25)).clamp(0.1, 0.9);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_decay() {
        let x0 = CMat::from_row_slice(1, 1, &[c64(1.0, 0.0)]);
        let x = integrate_adaptive(|x: &CMat| x * c64(-1.0, 0.0), &x0, 3.0, 1e-12).unwrap();
        assert_relative_eq!(x[(0, 0)].re, (-3.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn rotation_preserves_norm() {
        // dx/dt = i x: |x| conserved
        let x0 = CMat::from_row_slice(1, 1, &[c64(1.0, 0.0)]);
        let x = integrate_adaptive(|x: &CMat| x * c64(0.0, 1.0), &x0, 10.0, 1e-12).unwrap();
        assert_relative_eq!(x[(0, 0)].norm(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(x[(0, 0)].re, 10.0f64.cos(), epsilon = 1e-8);
    }

    #[test]
    fn stacked_states_independent() {
        let x0 = vec![
            CMat::from_row_slice(1, 1, &[c64(1.0, 0.0)]),
            CMat::from_row_slice(1, 1, &[c64(2.0, 0.0)]),
        ];
        let rhs = |x: &Vec<CMat>| vec![&x[0] * c64(-1.0, 0.0), &x[1] * c64(-2.0, 0.0)];
        let x = integrate_adaptive(rhs, &x0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(x[0][(0, 0)].re, (-1.0f64).exp(), epsilon = 1e-9);
        assert_relative_eq!(x[1][(0, 0)].re, 2.0 * (-2.0f64).exp(), epsilon = 1e-9);
    }
}
