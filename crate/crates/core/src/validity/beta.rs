//! Beta distribution: regularized incomplete beta and moment fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples are clamped into `[SAMPLE_CLAMP, 1 - SAMPLE_CLAMP]` before fitting.
pub const SAMPLE_CLAMP: f64 = 1e-6;

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(alpha) || !ok(beta) {
            return Err(Error::domain(format!(
                "beta parameters must be finite and positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        beta_cdf(*self, x)
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(alpha, beta)`, the Beta CDF.
///
/// `x` outside [0, 1] is clamped.
pub fn beta_cdf(params: BetaParams, x: f64) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let front = ln_front.exp();
    // The fraction converges fastest below the mean; use the reflection above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        (front * continued_fraction(a, b, x) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - front * continued_fraction(b, a, 1.0 - x) / b).clamp(0.0, 1.0)
    }
}

/// Method-of-moments Beta fit.
///
/// Uses the population (1/n) variance of the clamped samples; with mean `m`
/// and variance `v`, `k = m(1-m)/v - 1`, `alpha = m k`, `beta = (1-m) k`.
pub fn fit_beta(samples: &[f64]) -> Result<BetaParams> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::Fit(format!("non-finite sample {bad}")));
    }
    let clamped: Vec<f64> = samples
        .iter()
        .map(|&v| v.clamp(SAMPLE_CLAMP, 1.0 - SAMPLE_CLAMP))
        .collect();
    let n = clamped.len() as f64;
    let mean = clamped.iter().sum::<f64>() / n;
    let var = clamped.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let spread = clamped.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - clamped.iter().copied().fold(f64::INFINITY, f64::min);
    if spread == 0.0 || var <= 0.0 {
        return Err(Error::Fit("samples have zero variance".into()));
    }
    let k = mean * (1.0 - mean) / var - 1.0;
    if k <= 0.0 {
        return Err(Error::Fit(format!(
            "variance {var} too large for mean {mean}; no Beta matches these moments"
        )));
    }
    BetaParams::new(mean * k, (1.0 - mean) * k).map_err(|e| Error::Fit(e.to_string()))
}
