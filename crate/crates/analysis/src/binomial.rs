//! Binomial probabilities by direct summation in log space.

use statrs::function::factorial::{ln_binomial, ln_factorial};

/// `k ln x` with `0 ln 0 = 0`.
pub(crate) fn ln_pow(x: f64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * x.ln()
    }
}

/// `P[Bin(n, p) = k]`.
pub fn pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (ln_binomial(n, k) + ln_pow(p, k) + ln_pow(1.0 - p, n - k)).exp()
}

/// The full pmf of `Bin(n, p)`.
pub fn pmf_vec(n: u64, p: f64) -> Vec<f64> {
    (0..=n).map(|k| pmf(n, p, k)).collect()
}

/// `P[Bin(n, p) >= k]`.
pub fn tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    (k..=n).map(|i| pmf(n, p, i)).sum::<f64>().min(1.0)
}

/// `P[Bin(n, p) < k]`, summed directly so small values keep their precision.
pub fn head(n: u64, p: f64, k: u64) -> f64 {
    (0..k.min(n + 1)).map(|i| pmf(n, p, i)).sum::<f64>().min(1.0)
}

/// `ln(n! / prod(k_i!))`.
pub(crate) fn ln_multinomial(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    ln_factorial(n) - counts.iter().map(|&k| ln_factorial(k)).sum::<f64>()
}

/// `1 - x^n` without cancellation for `x` close to 1.
pub(crate) fn one_minus_pow(x: f64, n: usize) -> f64 {
    if x <= 0.0 {
        return if n == 0 { 0.0 } else { 1.0 };
    }
    -(n as f64 * x.ln()).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert!((tail(4, 0.5, 4) - 0.0625).abs() < 1e-15);
        assert!((tail(3, 0.5, 2) - 0.5).abs() < 1e-15);
        assert_eq!(tail(5, 0.0, 1), 0.0);
        assert_eq!(tail(5, 1.0, 5), 1.0);
        assert!((head(4, 0.5, 4) + tail(4, 0.5, 4) - 1.0).abs() < 1e-15);
        assert!((one_minus_pow(0.5, 3) - 0.875).abs() < 1e-15);
        assert!((ln_multinomial(&[1, 1, 1]).exp() - 6.0).abs() < 1e-12);
    }
}
