//! Exact beam-splitter detection combinatorics and repetition-count
//! recursions.
//!
//! The alternating binomial sums here suffer catastrophic cancellation in
//! floating point, so the sums are always evaluated exactly in big integers.
//! Probabilities are exact rationals up to moderate sizes; beyond that only
//! the positive factorial prefactor moves to log space, never the
//! cancellation-prone sum.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::optimize::golden_max;

/// Size (m+n) up to which probabilities are returned from exact rationals.
const EXACT_LIMIT: u64 = 60;

/// Cached tables cover every size the schedulers touch; beyond them the code
/// falls back to direct evaluation.
const TABLE_ROWS: usize = 600;

fn factorial_table() -> &'static Vec<BigUint> {
    static TABLE: OnceLock<Vec<BigUint>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_ROWS + 1);
        t.push(BigUint::one());
        for i in 1..=TABLE_ROWS {
            let next = &t[i - 1] * i;
            t.push(next);
        }
        t
    })
}

fn factorial(n: u64) -> BigUint {
    let table = factorial_table();
    if (n as usize) < table.len() {
        return table[n as usize].clone();
    }
    let mut acc = table[table.len() - 1].clone();
    for i in table.len() as u64..=n {
        acc *= i;
    }
    acc
}

fn pascal_table() -> &'static Vec<Vec<BigUint>> {
    static TABLE: OnceLock<Vec<Vec<BigUint>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(TABLE_ROWS + 1);
        rows.push(vec![BigUint::one()]);
        for n in 1..=TABLE_ROWS {
            let prev = &rows[n - 1];
            let mut row = Vec::with_capacity(n + 1);
            row.push(BigUint::one());
            for k in 1..n {
                row.push(&prev[k - 1] + &prev[k]);
            }
            row.push(BigUint::one());
            rows.push(row);
        }
        rows
    })
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let table = pascal_table();
    if (n as usize) < table.len() {
        return table[n as usize][k as usize].clone();
    }
    let k = k.min(n - k);
    let mut num = BigUint::one();
    for i in 0..k {
        num *= n - i;
    }
    num / factorial(k)
}

/// Natural logarithm of a positive big integer.
fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_factorial(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; 4096];
        for i in 2..t.len() {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if (n as usize) < table.len() {
        table[n as usize]
    } else {
        (table.len() as u64..=n).map(|i| (i as f64).ln()).sum::<f64>()
            + table[table.len() - 1]
    }
}

/// The alternating sum in the 50/50 detection amplitude, exactly:
/// Σ_k (−1)^{m−k} C(m,k) C(n, m+n−p−k).
fn alternating_sum(m: u64, n: u64, p: u64) -> BigInt {
    let mut acc = BigInt::zero();
    for k in 0..=m {
        let rest = m + n - p;
        if rest < k || rest - k > n {
            continue;
        }
        let term = BigInt::from(binomial(m, k) * binomial(n, rest - k));
        if (m - k) % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// |f_p(m,n)|² as an exact rational: S² p!(m+n−p)! / (m! n! 2^{m+n}).
pub fn detection_probability_exact(m: u64, n: u64, p: u64) -> BigRational {
    if p > m + n {
        return BigRational::zero();
    }
    let s = alternating_sum(m, n, p);
    let num = s.magnitude() * s.magnitude() * factorial(p) * factorial(m + n - p);
    let den = factorial(m) * factorial(n) * (BigUint::one() << (m + n));
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Amplitude f_p(m,n) for detecting p quanta in the second output of a
/// 50/50 beam splitter fed with |m, n⟩. Real in this convention.
pub fn detection_amplitude(m: u64, n: u64, p: u64) -> f64 {
    if p > m + n {
        return 0.0;
    }
    let s = alternating_sum(m, n, p);
    if s.is_zero() {
        return 0.0;
    }
    if m + n <= EXACT_LIMIT {
        let prob = detection_probability_exact(m, n, p).to_f64().unwrap();
        let sign = if s.is_negative() { -1.0 } else { 1.0 };
        return sign * prob.sqrt();
    }
    // |f_p| = |S| √(p!(m+n−p)!/(m!n!)) / 2^{(m+n)/2}, assembled in log space;
    // the sign comes from the exact sum
    let ln_abs = ln_big(s.magnitude())
        + 0.5 * (ln_factorial(p) + ln_factorial(m + n - p) - ln_factorial(m) - ln_factorial(n))
        - 0.5 * (m + n) as f64 * std::f64::consts::LN_2;
    let sign = if s.is_negative() { -1.0 } else { 1.0 };
    sign * ln_abs.exp()
}

/// |f_p(m,n)|² for p = 0..=m+n.
pub fn detection_distribution(m: u64, n: u64) -> Vec<f64> {
    (0..=m + n)
        .map(|p| {
            let a = detection_amplitude(m, n, p);
            a * a
        })
        .collect()
}

/// Exact Σ_p |f_p(m,n)|²; equals one by unitarity. Accumulated over the
/// common denominator m! n! 2^{m+n}, so the check is a pure integer identity.
pub fn detection_probability_sum_exact(m: u64, n: u64) -> BigRational {
    let mut numerator = BigUint::zero();
    for p in 0..=m + n {
        let s = alternating_sum(m, n, p);
        if s.is_zero() {
            continue;
        }
        numerator += s.magnitude() * s.magnitude() * factorial(p) * factorial(m + n - p);
    }
    let denominator = factorial(m) * factorial(n) * (BigUint::one() << (m + n));
    BigRational::new(BigInt::from(numerator), BigInt::from(denominator))
}

/// Optimal single-addition success probability q_n and the transmittance
/// that attains it.
///
/// The merge |n⟩⊗|1⟩ → |n+1⟩ postselected on an empty second mode succeeds
/// with probability (n+1)|T|^{2n}|R|²; the maximization over |T|² is done
/// numerically and lands on |T|² = n/(n+1), q_n = (n/(n+1))^n.
pub fn one_by_one_q(n: u64) -> (f64, f64) {
    if n == 0 {
        // empty register: the merge is just the fresh excitation
        return (1.0, 0.0);
    }
    let f = |tau: f64| (n as f64 + 1.0) * tau.powi(n as i32) * (1.0 - tau);
    let (tau, q) = golden_max(f, 0.0, 1.0, 1e-12);
    (q, tau)
}

/// Closed form q_n = (n/(n+1))^n, with q_0 = 1.
pub fn one_by_one_q_closed(n: u64) -> f64 {
    if n == 0 {
        1.0
    } else {
        (n as f64 / (n as f64 + 1.0)).powi(n as i32)
    }
}

/// ln R_m for the one-by-one scheme: R_m = (1 + R_{m−1})/q_{m−1}, q_0 = p.
///
/// Computed in log space so bounds can be checked far past f64 overflow.
pub fn one_by_one_ln_rm(m: u64, p: f64) -> f64 {
    assert!(m >= 1 && p > 0.0 && p <= 1.0);
    // ln R_1 = -ln p
    let mut ln_r = -p.ln();
    for n in 1..m {
        // ln R_{n+1} = ln(1 + R_n) - ln q_n
        let ln_1p = if ln_r > 40.0 {
            ln_r + (-ln_r).exp().ln_1p()
        } else {
            ln_r.exp().ln_1p()
        };
        ln_r = ln_1p - one_by_one_q_closed(n).ln();
    }
    ln_r
}

/// R_m for the one-by-one scheme (overflows to ∞ for very large m).
pub fn one_by_one_rm(m: u64, p: f64) -> f64 {
    one_by_one_ln_rm(m, p).exp()
}

/// Central-binomial doubling probability d_n = (2n)!/(2^{2n} (n!)²).
pub fn doubling_d(n: u64) -> f64 {
    doubling_d_exact(n).to_f64().unwrap()
}

pub fn doubling_d_exact(n: u64) -> BigRational {
    let num = BigInt::from(binomial(2 * n, n));
    let den = BigInt::from(BigUint::one() << (2 * n));
    BigRational::new(num, den)
}

/// How to handle targets that are not a power of two.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DoublingPadding {
    /// Double up to the largest power of two below m, then add the remainder
    /// one by one.
    #[default]
    HybridOneByOne,
    /// Build the next power of two above m (and stop there).
    NextPowerOfTwo,
}

/// ln R_m for the doubling scheme; exact recursion
/// R_m = (1 + 2 R_{m/2})/d_{m/2} for powers of two, padded per `padding`
/// otherwise.
pub fn doubling_ln_rm(m: u64, p: f64, padding: DoublingPadding) -> f64 {
    assert!(m >= 1 && p > 0.0 && p <= 1.0);
    fn pow2_ln_rm(m: u64, p: f64) -> f64 {
        if m == 1 {
            return -p.ln();
        }
        let half = pow2_ln_rm(m / 2, p);
        // ln(1 + 2 R_{m/2}) − ln d_{m/2}
        let ln_num = if half > 40.0 {
            half + std::f64::consts::LN_2
        } else {
            (1.0 + 2.0 * half.exp()).ln()
        };
        ln_num - doubling_d(m / 2).ln()
    }
    if m.is_power_of_two() {
        return pow2_ln_rm(m, p);
    }
    match padding {
        DoublingPadding::NextPowerOfTwo => pow2_ln_rm(m.next_power_of_two(), p),
        DoublingPadding::HybridOneByOne => {
            let base = 1u64 << (63 - m.leading_zeros() as u64);
            let mut ln_r = pow2_ln_rm(base, p);
            for n in base..m {
                let ln_1p = if ln_r > 40.0 {
                    ln_r
                } else {
                    ln_r.exp().ln_1p()
                };
                ln_r = ln_1p - one_by_one_q_closed(n).ln();
            }
            ln_r
        }
    }
}

pub fn doubling_rm(m: u64, p: f64) -> f64 {
    doubling_ln_rm(m, p, DoublingPadding::default()).exp()
}

/// Probability that a number-resolved merge of |k1⟩⊗|k2⟩ detects fewer than
/// (k1+k2)/4 quanta, i.e. keeps more than ¾ of the total in one mode.
pub fn merge_success_below_half(k1: u64, k2: u64) -> f64 {
    let total = k1 + k2;
    let mut s = 0.0;
    let mut p = 0;
    while 4 * p < total {
        let a = detection_amplitude(k1, k2, p);
        s += a * a;
        p += 1;
    }
    s
}

/// s = Σ_{p<m/2} |f_p(m+α, m−α)|², the number-resolved success probability;
/// approaches 1/3 for large m, for any moderate asymmetry α.
pub fn number_resolved_success(m: u64, alpha_shift: i64) -> f64 {
    assert!(m >= 2, "need at least two excitations per mode");
    let k1 = (m as i64 + alpha_shift) as u64;
    let k2 = (m as i64 - alpha_shift) as u64;
    let mut s = 0.0;
    let mut p = 0u64;
    while 2 * p < m {
        let a = detection_amplitude(k1, k2, p);
        s += a * a;
        p += 1;
    }
    s
}

/// Smallest input size k whose worst-case merge output 2k − (⌈k/2⌉ − 1)
/// reaches m.
pub fn number_resolved_input_size(m: u64) -> u64 {
    if m <= 1 {
        return 1;
    }
    let mut k = 1u64;
    loop {
        let guaranteed = 2 * k - (k.div_ceil(2) - 1);
        if guaranteed >= m {
            return k;
        }
        k += 1;
    }
}

/// Tree depth (levels of merging) used by the worst-case number-resolved
/// scheduler to reach m.
pub fn number_resolved_levels(m: u64) -> u32 {
    let mut depth = 0;
    let mut size = m;
    while size > 1 {
        size = number_resolved_input_size(size);
        depth += 1;
    }
    depth
}

/// Expected operations R_m of the worst-case number-resolved scheme:
/// R_m = (1 + 2 R_k)/s_k with k the smallest input guaranteeing m after the
/// trim, and s_k the below-half detection probability.
pub fn number_resolved_rm(m: u64, p: f64) -> f64 {
    assert!(p > 0.0 && p <= 1.0);
    fn rec(m: u64, p: f64, memo: &mut std::collections::HashMap<u64, f64>) -> f64 {
        if m <= 1 {
            return 1.0 / p;
        }
        if let Some(&v) = memo.get(&m) {
            return v;
        }
        let k = number_resolved_input_size(m);
        let s = merge_success_below_half(k, k);
        let v = (1.0 + 2.0 * rec(k, p, memo)) / s;
        memo.insert(m, v);
        v
    }
    rec(m, p, &mut std::collections::HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_traits::FromPrimitive;

    #[test]
    fn amplitude_base_cases() {
        assert_relative_eq!(detection_amplitude(0, 0, 0), 1.0, epsilon = 1e-15);
        // |f_0(1,1)|² = 1/2 and Hong–Ou–Mandel suppression of f_1
        assert_relative_eq!(detection_amplitude(1, 1, 0).powi(2), 0.5, epsilon = 1e-15);
        assert_eq!(detection_amplitude(1, 1, 1), 0.0);
        // single particle splits evenly
        let d = detection_distribution(1, 0);
        assert_relative_eq!(d[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(d[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn odd_detections_vanish_for_equal_inputs() {
        for m in [2u64, 3, 5, 8, 13] {
            for p in (1..2 * m).step_by(2) {
                assert_eq!(detection_amplitude(m, m, p), 0.0, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn even_detection_closed_form() {
        // |f_{2n}(m,m)|² = (2m−2n)!(2n)!/(2^{2m}(m!)²)·C(m,n)², checked
        // exactly in rationals for all m ≤ 30
        for m in 1..=30u64 {
            for n in 0..=m / 2 {
                let lhs = detection_probability_exact(m, m, 2 * n);
                let num = BigInt::from(
                    factorial(2 * m - 2 * n)
                        * factorial(2 * n)
                        * binomial(m, n)
                        * binomial(m, n),
                );
                let den = BigInt::from(
                    (BigUint::one() << (2 * m)) * factorial(m) * factorial(m),
                );
                let rhs = BigRational::new(num, den);
                assert_eq!(lhs, rhs, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn unitarity_exact() {
        for (m, n) in [(3u64, 4u64), (10, 7), (25, 25), (30, 30)] {
            assert_eq!(detection_probability_sum_exact(m, n), BigRational::one());
        }
    }

    #[test]
    fn log_domain_path_consistent_with_exact() {
        // straddle the switchover: compare scaled-down exact vs log path
        let m = 40u64;
        let n = 25u64; // m+n = 65 > EXACT_LIMIT: log path
        let dist = detection_distribution(m, n);
        let total: f64 = dist.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        // spot value against exact rational
        let p = 7u64;
        let exact = detection_probability_exact(m, n, p).to_f64().unwrap();
        assert_relative_eq!(dist[p as usize], exact, epsilon = 1e-10 * exact.max(1e-10));
    }

    #[test]
    fn q_values() {
        // numeric maximization matches the closed form to 1e-8
        for n in [0u64, 1, 2, 3, 10, 100] {
            let (q, tau) = one_by_one_q(n);
            assert!((q - one_by_one_q_closed(n)).abs() < 1e-8, "n={n}");
            if n > 0 {
                assert!((tau - n as f64 / (n as f64 + 1.0)).abs() < 1e-5, "n={n}");
            }
        }
        assert_relative_eq!(one_by_one_q_closed(1), 0.5, epsilon = 1e-15);
        assert!((one_by_one_q_closed(100) - 0.3697).abs() < 1e-4);
        // monotone decreasing, bounded below by 1/e
        let e_inv = (-1.0f64).exp();
        let mut prev = one_by_one_q_closed(1);
        for n in 2..200 {
            let q = one_by_one_q_closed(n);
            assert!(q < prev && q > e_inv, "n={n}");
            prev = q;
        }
    }

    #[test]
    fn one_by_one_recursion_values() {
        assert_relative_eq!(one_by_one_rm(1, 0.25), 4.0, epsilon = 1e-12);
        // R_2 = (1 + 1/p)/q_1 with q_1 = 1/2
        assert_relative_eq!(one_by_one_rm(2, 0.5), 6.0, epsilon = 1e-10);
        // exponential growth: consecutive ratio at least 2
        for m in 2..15u64 {
            let ratio = one_by_one_rm(m, 0.3) / one_by_one_rm(m - 1, 0.3);
            assert!(ratio >= 2.0, "m={m}");
        }
    }

    #[test]
    fn one_by_one_bounds_large_m() {
        // 2^{m−1}/p ≤ R_m ≤ m e^m / p, checked in log space up to 1024
        for &p in &[0.1, 0.5, 0.9] {
            for m in [2u64, 16, 128, 1024] {
                let ln_r = one_by_one_ln_rm(m, p);
                let lo = (m - 1) as f64 * std::f64::consts::LN_2 - p.ln();
                let hi = (m as f64).ln() + m as f64 - p.ln();
                assert!(ln_r >= lo - 1e-9 && ln_r <= hi + 1e-9, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn doubling_values_and_bounds() {
        assert_eq!(doubling_d_exact(1), BigRational::from_f64(0.5).unwrap());
        assert_eq!(doubling_d_exact(2), BigRational::new(BigInt::from(3), BigInt::from(8)));
        // Stirling comparison at n = 50: within 1%
        let d50 = doubling_d(50);
        let stirling = 1.0 / (50.0 * std::f64::consts::PI).sqrt();
        assert!((d50 - stirling).abs() / stirling < 0.01);
        // bounds m²/(4p) ≤ R_m ≤ m^{(log₂ m)/2 + 1} log₂(m)/(2p); the upper
        // bound is asymptotic (Stirling) and only kicks in from m = 8
        for &p in &[0.1, 0.5, 0.9] {
            for m in [2u64, 8, 64, 256, 1024] {
                let ln_r = doubling_ln_rm(m, p, DoublingPadding::default());
                let lo = 2.0 * (m as f64).ln() - (4.0 * p).ln();
                assert!(ln_r >= lo - 1e-9, "lower m={m} p={p}");
                if m >= 8 {
                    let lg = (m as f64).log2();
                    let hi = (lg / 2.0 + 1.0) * (m as f64).ln() + lg.ln() - (2.0 * p).ln();
                    assert!(ln_r <= hi + 1e-9, "upper m={m} p={p}");
                }
            }
        }
        // R_2 = (1 + 2/p)/d_1
        assert_relative_eq!(doubling_rm(2, 0.5), 10.0, epsilon = 1e-10);
    }

    #[test]
    fn hybrid_padding_between_powers() {
        let p = 0.5;
        let r12 = doubling_ln_rm(12, p, DoublingPadding::HybridOneByOne);
        let r8 = doubling_ln_rm(8, p, DoublingPadding::HybridOneByOne);
        let r16 = doubling_ln_rm(16, p, DoublingPadding::NextPowerOfTwo);
        assert!(r12 > r8);
        // padding to 16 does at least as much work as hybrid to 12
        assert!(doubling_ln_rm(12, p, DoublingPadding::NextPowerOfTwo) >= r16 - 1e-12);
        assert!(r12 < r16 + 30.0); // sanity scale
    }

    #[test]
    fn number_resolved_success_values() {
        // m = 2: only p = 0 contributes, equals d_2 = 3/8
        assert_relative_eq!(number_resolved_success(2, 0), 0.375, epsilon = 1e-12);
        // converges near 1/3 and is insensitive to asymmetry
        let s100 = number_resolved_success(100, 0);
        assert!(s100 > 0.31 && s100 < 0.35, "s(100) = {s100}");
        for shift in [0i64, 5, 10] {
            let s = number_resolved_success(60, shift);
            assert!((s - 1.0 / 3.0).abs() < 0.04, "shift={shift} s={s}");
        }
    }

    #[test]
    fn number_resolved_recursion_chain() {
        // hand chain at p = 0.5: T(2) = (1+2·2)/s(1,1), s(1,1) = 1/2 → 10
        assert_relative_eq!(number_resolved_rm(2, 0.5), 10.0, epsilon = 1e-10);
        // T(3): k = 2, s(2,2) = 3/8 → (1+20)/0.375 = 56
        assert_relative_eq!(number_resolved_rm(3, 0.5), 56.0, epsilon = 1e-9);
        // T(8): k = 5, s(5,5) = d_5 + |f_2(5,5)|²
        let s5 = merge_success_below_half(5, 5);
        assert_relative_eq!(s5, 0.24609375 + 0.13671875, epsilon = 1e-10);
        let t5 = (1.0 + 2.0 * 56.0) / 0.3125;
        let t8 = (1.0 + 2.0 * t5) / s5;
        assert_relative_eq!(number_resolved_rm(8, 0.5), t8, epsilon = 1e-8);
    }

    #[test]
    fn level_counts_logarithmic() {
        // doubling: ⌈log₂ m⌉ levels of merging; number-resolved within
        // ⌈log_{3/2} m⌉ + 1
        for m in [8u64, 27, 100, 128] {
            let nr = number_resolved_levels(m);
            let bound = ((m as f64).ln() / 1.5f64.ln()).ceil() as u32 + 1;
            assert!(nr <= bound, "m={m}: {nr} > {bound}");
        }
    }
}
