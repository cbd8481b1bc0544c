//! Gamma-function family restricted to integer shape parameters.
//!
//! For integer `a` the incomplete Gamma functions have exact finite-sum
//! forms,
//!
//! ```text
//! Γ(a, x) = (a−1)! · e^(−x) · Σ_{k<a} x^k / k!
//! γ(a, x) = (a−1)! − Γ(a, x)
//! ```
//!
//! which stay valid for negative `x` (the analytic continuation needed when
//! an exponential rate difference is negative). Evaluation switches between
//! the finite sum and positive-term power series so that no branch subtracts
//! nearly equal quantities.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest shape for which `(a−1)!` fits in an `f64`.
pub const MAX_SHAPE: u32 = 170;

const SERIES_MAX_TERMS: usize = 10_000;

fn check_shape(a: u32) -> Result<()> {
    if a == 0 || a > MAX_SHAPE {
        Err(Error::OutOfRange(format!(
            "integer Gamma shape must be in 1..={MAX_SHAPE}, got {a}"
        )))
    } else {
        Ok(())
    }
}

/// `Γ(a) = (a−1)!` for integer `a`.
pub fn gamma_int<T: Real>(a: u32) -> Result<T> {
    check_shape(a)?;
    Ok(factorial(a - 1))
}

/// `k!` accumulated in the target type.
pub(crate) fn factorial<T: Real>(k: u32) -> T {
    (2..=k).fold(T::one(), |acc, i| acc * T::lit(f64::from(i)))
}

/// `Σ_{k<a} x^k / k!` with a running term.
fn truncated_exp_sum<T: Real>(a: u32, x: T) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..a {
        term = term * x / T::lit(f64::from(k));
        sum = sum + term;
    }
    sum
}

/// Upper incomplete Gamma `Γ(a, x) = ∫ₓ^∞ t^(a−1) e^(−t) dt`, any finite `x`.
pub fn upper_gamma_int<T: Real>(a: u32, x: T) -> Result<T> {
    check_shape(a)?;
    if x < T::zero() {
        // Finite sum alternates for negative x; complement of the positive series instead.
        return Ok(factorial::<T>(a - 1) - lower_series(a, x));
    }
    Ok(factorial::<T>(a - 1) * (-x).exp() * truncated_exp_sum(a, x))
}

/// Lower incomplete Gamma `γ(a, x) = ∫₀ˣ t^(a−1) e^(−t) dt`, any finite `x`.
pub fn lower_gamma_int<T: Real>(a: u32, x: T) -> Result<T> {
    check_shape(a)?;
    let a_t = T::lit(f64::from(a));
    if x <= T::zero() || x < a_t + T::one() {
        Ok(lower_series(a, x))
    } else {
        Ok(factorial::<T>(a - 1) - upper_gamma_int(a, x)?)
    }
}

/// Regularised upper incomplete Gamma `Γ(a, x) / Γ(a)` for `x ≥ 0`,
/// computed without forming `(a−1)!`.
pub fn upper_gamma_regularized<T: Real>(a: u32, x: T) -> Result<T> {
    check_shape(a)?;
    if x < T::zero() {
        return Ok(upper_gamma_int(a, x)? / factorial::<T>(a - 1));
    }
    // e^(−x) Σ_{k<a} x^k/k!, the Poisson(x) CDF at a−1.
    Ok((-x).exp() * truncated_exp_sum(a, x))
}

/// `γ(a, x) / x^a`, an entire function of `x` equal to `1/a` at the origin.
///
/// This is the quantity that appears as `γ(j+1, (β₂−β₃)c) / (β₂−β₃)^(j+1)`;
/// evaluating the ratio directly removes the `0/0` at `β₂ = β₃`.
pub fn lower_gamma_ratio<T: Real>(a: u32, x: T) -> Result<T> {
    check_shape(a)?;
    let a_t = T::lit(f64::from(a));
    if x <= T::zero() {
        // Σ (−x)^k / (k! (a+k)): every term is non-negative.
        let y = -x;
        let mut term = T::one();
        let mut sum = T::one() / a_t;
        for k in 1..SERIES_MAX_TERMS {
            let k_t = T::lit(k as f64);
            term = term * y / k_t;
            let add = term / (a_t + k_t);
            sum = sum + add;
            if add <= sum * T::epsilon() {
                break;
            }
        }
        Ok(sum)
    } else if x < a_t + T::one() {
        // e^(−x) Σ x^k / (a (a+1) … (a+k)): positive terms.
        let mut term = T::one() / a_t;
        let mut sum = term;
        for k in 1..SERIES_MAX_TERMS {
            term = term * x / (a_t + T::lit(k as f64));
            sum = sum + term;
            if term <= sum * T::epsilon() {
                break;
            }
        }
        Ok((-x).exp() * sum)
    } else {
        Ok((factorial::<T>(a - 1) - upper_gamma_int(a, x)?) / x.powi(a as i32))
    }
}

fn lower_series<T: Real>(a: u32, x: T) -> T {
    // Shape already checked by callers.
    let ratio = lower_gamma_ratio(a, x).expect("shape validated");
    ratio * x.powi(a as i32)
}

/// Binomial coefficient `C(n, k)` as a float, built multiplicatively.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::count(n - i) / T::count(i + 1);
    }
    acc
}

/// Probability mass function of `Binomial(n, p)` over `0..=n`.
///
/// Exact products up to `n = 64`; beyond that terms are accumulated in the
/// log domain to keep `C(n, k)` from overflowing.
pub fn binomial_pmf<T: Real>(n: usize, p: T) -> Vec<T> {
    let one = T::one();
    if p <= T::zero() {
        let mut v = vec![T::zero(); n + 1];
        v[0] = one;
        return v;
    }
    if p >= one {
        let mut v = vec![T::zero(); n + 1];
        v[n] = one;
        return v;
    }
    if n <= 64 {
        (0..=n)
            .map(|k| binomial::<T>(n, k) * p.powi(k as i32) * (one - p).powi((n - k) as i32))
            .collect()
    } else {
        let lp = p.ln();
        let lq = (one - p).ln();
        let mut log_c = T::zero();
        (0..=n)
            .map(|k| {
                if k > 0 {
                    log_c = log_c + (T::count(n - k + 1) / T::count(k)).ln();
                }
                (log_c + T::count(k) * lp + T::count(n - k) * lq).exp()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_int_examples() {
        assert_eq!(gamma_int::<f64>(1).unwrap(), 1.0);
        assert_eq!(gamma_int::<f64>(3).unwrap(), 2.0);
        assert_eq!(gamma_int::<f64>(6).unwrap(), 120.0);
        assert!(gamma_int::<f64>(0).is_err());
        assert!(gamma_int::<f64>(171).is_err());
        assert!(gamma_int::<f64>(170).unwrap().is_finite());
    }

    #[test]
    fn upper_gamma_examples() {
        for x in [-2.0, -0.3, 0.0, 0.7, 4.0, 30.0] {
            let v: f64 = upper_gamma_int(1, x).unwrap();
            assert!(rel(v, (-x).exp()) < 1e-14, "x={x}");
        }
        assert!((upper_gamma_int(2, 0.0_f64).unwrap() - 1.0).abs() < 1e-15);
        let v: f64 = upper_gamma_int(3, 1.0).unwrap();
        assert!((v - 2.0 * (-1.0_f64).exp() * 2.5).abs() < 1e-14);
        assert!((v - 1.839_397_205_857_211_6).abs() < 1e-12);
    }

    #[test]
    fn lower_gamma_examples() {
        let v: f64 = lower_gamma_int(1, 2.0).unwrap();
        assert!((v - (1.0 - (-2.0_f64).exp())).abs() < 1e-15);
        for a in 1..=8 {
            assert_eq!(lower_gamma_int(a, 0.0_f64).unwrap(), 0.0);
        }
        let v: f64 = lower_gamma_int(1, -0.995_26).unwrap();
        assert!((v - (1.0 - 0.995_26_f64.exp())).abs() < 1e-14);
        assert!((v + 1.705_46).abs() < 5e-5);
    }

    #[test]
    fn finite_sum_form_agrees_everywhere() {
        // Literal finite-sum definition vs the switched evaluation.
        for a in 1..=12u32 {
            for i in -40..=80 {
                let x = f64::from(i) * 0.125;
                let fact: f64 = factorial(a - 1);
                let literal_upper = fact * (-x).exp() * truncated_exp_sum(a, x);
                let literal_lower = fact - literal_upper;
                let up: f64 = upper_gamma_int(a, x).unwrap();
                let lo: f64 = lower_gamma_int(a, x).unwrap();
                assert!((up - literal_upper).abs() <= 1e-11 * fact.max(literal_upper.abs()));
                assert!((lo - literal_lower).abs() <= 1e-11 * fact.max(literal_upper.abs()));
            }
        }
    }

    #[test]
    fn complement_identity() {
        for a in 1..=20u32 {
            let g: f64 = gamma_int(a).unwrap();
            let mut x = -5.0;
            while x <= 50.0 {
                let s = upper_gamma_int(a, x).unwrap() + lower_gamma_int(a, x).unwrap();
                assert!(rel(s, g) < 1e-12, "a={a} x={x}: {s} vs {g}");
                x += 0.37;
            }
        }
    }

    #[test]
    fn upper_recurrence() {
        for a in 1..=15u32 {
            let mut x = -3.0_f64;
            while x <= 40.0 {
                let lhs: f64 = upper_gamma_int(a + 1, x).unwrap();
                let rhs =
                    f64::from(a) * upper_gamma_int(a, x).unwrap() + x.powi(a as i32) * (-x).exp();
                assert!(rel(lhs, rhs) < 1e-11, "a={a} x={x}");
                x += 0.41;
            }
        }
    }

    #[test]
    fn ratio_is_continuous_through_zero() {
        for a in 1..=6u32 {
            let at_zero: f64 = lower_gamma_ratio(a, 0.0).unwrap();
            assert!((at_zero - 1.0 / f64::from(a)).abs() < 1e-15);
            for eps in [1e-12, 1e-9, 1e-6, 1e-4] {
                let l: f64 = lower_gamma_ratio(a, -eps).unwrap();
                let r: f64 = lower_gamma_ratio(a, eps).unwrap();
                assert!((l - at_zero).abs() < 2.0 * eps, "a={a} eps={eps}");
                assert!((r - at_zero).abs() < 2.0 * eps, "a={a} eps={eps}");
            }
            // Agreement with the direct quotient away from zero.
            for x in [-3.0, -0.5, 0.5, 3.0, 12.0] {
                let direct = lower_gamma_int::<f64>(a, x).unwrap() / x.powi(a as i32);
                assert!(rel(lower_gamma_ratio(a, x).unwrap(), direct) < 1e-12);
            }
        }
    }

    #[test]
    fn regularized_upper() {
        for a in 1..=10u32 {
            for x in [0.0, 0.3, 2.0, 9.0] {
                let direct = upper_gamma_int::<f64>(a, x).unwrap() / gamma_int::<f64>(a).unwrap();
                assert!(rel(upper_gamma_regularized(a, x).unwrap(), direct) < 1e-13);
            }
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial::<f64>(5, 2), 10.0);
        assert_eq!(binomial::<f64>(4, 7), 0.0);
        assert_eq!(binomial::<f64>(60, 30), 118_264_581_564_861_424.0);
        for (n, p) in [(3usize, 0.8f64), (15, 0.3), (100, 0.42), (7, 0.0), (7, 1.0)] {
            let pmf = binomial_pmf(n, p);
            let s: f64 = pmf.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
            assert!((mean - n as f64 * p).abs() < 1e-9);
        }
        // Log-domain branch agrees with the product branch at the switch.
        let small: Vec<f64> = binomial_pmf(64, 0.37);
        let c = binomial::<f64>(64, 20) * 0.37f64.powi(20) * 0.63f64.powi(44);
        assert!(rel(small[20], c) < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let v: f32 = upper_gamma_int(3, 1.0f32).unwrap();
        assert!((v - 1.839_397_2).abs() < 1e-5);
        let r: f32 = lower_gamma_ratio(2, -0.5f32).unwrap();
        let d = lower_gamma_int::<f64>(2, -0.5).unwrap() / 0.25;
        assert!((f64::from(r) - d).abs() < 1e-5);
    }
}
