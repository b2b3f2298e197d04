//! One-sample Kolmogorov-Smirnov test.

use crate::error::{Error, Result};

/// `sup |F_n - F|` for the empirical CDF of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("K-S test needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max))
}

/// Upper tail of the Kolmogorov distribution, `P(K > lambda)`.
///
/// The alternating series converges slowly for small `lambda`; there the
/// equivalent Jacobi-theta form is summed instead.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        use std::f64::consts::PI;
        let t = -PI * PI / (8.0 * lambda * lambda);
        let sum: f64 = (1..=50)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                (odd * odd * t).exp()
            })
            .sum();
        1.0 - (2.0 * PI).sqrt() / lambda * sum
    } else {
        let sum: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// P-value for a statistic `d` observed on `n` samples.
///
/// `n = 1` uses the exact law `P(D >= d) = 2(1 - d)` on [1/2, 1]; larger
/// samples use the asymptotic Kolmogorov distribution at `sqrt(n) d`.
pub fn ks_pvalue_from_statistic(d: f64, n: usize) -> f64 {
    if n == 1 {
        return (2.0 * (1.0 - d)).clamp(0.0, 1.0);
    }
    kolmogorov_survival((n as f64).sqrt() * d)
}

/// Two-sided one-sample K-S p-value of `samples` against `cdf`.
pub fn ks_pvalue_against(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let d = ks_statistic(samples, cdf)?;
    Ok(ks_pvalue_from_statistic(d, samples.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_sample_law() {
        let identity = |x: f64| x;
        assert_relative_eq!(ks_statistic(&[0.5], identity).unwrap(), 0.5);
        assert_relative_eq!(ks_pvalue_against(&[0.5], identity).unwrap(), 1.0);
        assert_relative_eq!(ks_pvalue_against(&[0.99], identity).unwrap(), 0.02, epsilon = 1e-12);
        assert_relative_eq!(ks_pvalue_against(&[0.01], identity).unwrap(), 0.02, epsilon = 1e-12);
        assert_eq!(ks_pvalue_against(&[0.0], identity).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(ks_pvalue_against(&[], |x| x).is_err());
    }

    #[test]
    fn survival_branches_agree() {
        // The two series represent the same function; compare near the switch.
        for &lambda in &[0.8f64, 0.95, 1.0, 1.05, 1.2] {
            let alt: f64 = 2.0
                * (1..=200)
                    .map(|k| {
                        let k = k as f64;
                        (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
                    })
                    .sum::<f64>();
            assert_relative_eq!(kolmogorov_survival(lambda), alt, epsilon = 1e-12);
        }
    }

    #[test]
    fn survival_reference_values() {
        // Kolmogorov critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert_relative_eq!(kolmogorov_survival(1.358_098_8), 0.05, epsilon = 1e-5);
        assert_relative_eq!(kolmogorov_survival(1.627_618_7), 0.01, epsilon = 1e-5);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(0.1) > 0.999_999);
    }

    #[test]
    fn multi_sample_statistic() {
        // sorted {0.1, 0.4, 0.8} vs uniform: the largest gap is 2/3 - 0.4
        let d = ks_statistic(&[0.8, 0.1, 0.4], |x| x).unwrap();
        assert_relative_eq!(d, 2.0 / 3.0 - 0.4, epsilon = 1e-15);
    }
}
