//! Small dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Matrix exponential of a general complex square matrix.
///
/// Scaling-and-squaring Padé via nalgebra; valid for non-Hermitian input,
/// including defective matrices (no eigendecomposition involved).
pub fn expm(m: &CMat) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    Ok(m.exp())
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let d = m[(i, j)] - m[(j, i)].conj();
            if d.norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Eigendecomposition of a Hermitian matrix: (eigenvalues, column eigenvectors).
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    (vals, eig.eigenvectors)
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Trace distance ½‖a − b‖₁ between two Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let d = a - b;
    // rescale so tiny differences don't hit denormals inside the eigensolver
    let scale = max_abs(&d);
    if scale == 0.0 {
        return 0.0;
    }
    let d = d / c64(scale, 0.0);
    0.5 * scale * hermitian_eigenvalues(&d).iter().map(|x| x.abs()).sum::<f64>()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)[0]
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Hermitian part ½(m + m†).
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_matches_scalar_exponential() {
        // diag(-γ/2) exponentiates entrywise
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c64(0.0, -0.5), c64(0.0, -1.5)]));
        let e = expm(&m).unwrap();
        assert_relative_eq!(e[(0, 0)].im, -0.5f64.sin(), epsilon = 1e-14);
        assert_relative_eq!(e[(0, 0)].re, 0.5f64.cos(), epsilon = 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_nonhermitian_decay() {
        // H = -(i/2) [[1, 1], [1, 1]]: eigenvalues 0 and -i, so exp(-iHt) at
        // t=1 has eigenvalues 1 and e^{-1} on the ± basis.
        let h = CMat::from_row_slice(2, 2, &[
            c64(0.0, -0.5), c64(0.0, -0.5),
            c64(0.0, -0.5), c64(0.0, -0.5),
        ]);
        let u = expm(&(h * c64(0.0, -1.0))).unwrap();
        let plus = CVec::from_vec(vec![c64(1.0 / 2f64.sqrt(), 0.0), c64(1.0 / 2f64.sqrt(), 0.0)]);
        let v = &u * &plus;
        // |+⟩ carries the full decay rate 2·(1/2) = 1
        assert_relative_eq!(v.norm(), (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn expm_rejects_nonfinite() {
        let m = CMat::from_row_slice(1, 1, &[c64(f64::NAN, 0.0)]);
        assert!(expm(&m).is_err());
    }

    #[test]
    fn hermitian_eigen_and_trace_distance() {
        let a = CMat::from_row_slice(2, 2, &[
            c64(1.0, 0.0), c64(0.0, 0.0),
            c64(0.0, 0.0), c64(0.0, 0.0),
        ]);
        let b = CMat::from_row_slice(2, 2, &[
            c64(0.0, 0.0), c64(0.0, 0.0),
            c64(0.0, 0.0), c64(1.0, 0.0),
        ]);
        // orthogonal pure states are at trace distance 1
        assert_relative_eq!(trace_distance(&a, &b), 1.0, epsilon = 1e-12);
        assert_relative_eq!(trace_distance(&a, &a), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [0.5, 2.5, 4.5, 6.5];
        assert_relative_eq!(fit_slope(&x, &y), 2.0, epsilon = 1e-12);
    }
}
