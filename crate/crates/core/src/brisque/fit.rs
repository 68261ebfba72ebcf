//! Moment-matching fits of generalized Gaussian distributions.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const ALPHA_MIN: f64 = 0.2;
const ALPHA_MAX: f64 = 10.0;
const ALPHA_STEP: f64 = 1e-3;
const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgdFit {
    pub alpha: f64,
    /// Standard deviation of the samples.
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub sigma_l: f64,
    pub sigma_r: f64,
    /// Mean of the fitted distribution, `(β_r − β_l)·Γ(2/α)/Γ(1/α)`.
    pub mean: f64,
}

/// `Γ(2/α)² / (Γ(1/α)·Γ(3/α))`, increasing in `α`.
pub fn moment_ratio(alpha: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / alpha) - ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha)).exp()
}

fn ratio_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let steps = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize;
        (0..=steps)
            .map(|i| moment_ratio(ALPHA_MIN + i as f64 * ALPHA_STEP))
            .collect()
    })
}

/// Inverts [`moment_ratio`]: grid lookup over `[0.2, 10]`, then bisection
/// inside the bracketing cell. Ratios outside the grid clamp to its ends.
pub fn invert_ratio(target: f64) -> f64 {
    let table = ratio_table();
    if target <= table[0] {
        return ALPHA_MIN;
    }
    if target >= table[table.len() - 1] {
        return ALPHA_MAX;
    }
    let hi = table.partition_point(|&r| r < target);
    let mut lo_a = ALPHA_MIN + (hi - 1) as f64 * ALPHA_STEP;
    let mut hi_a = ALPHA_MIN + hi as f64 * ALPHA_STEP;
    for _ in 0..60 {
        let mid = 0.5 * (lo_a + hi_a);
        if moment_ratio(mid) < target {
            lo_a = mid;
        } else {
            hi_a = mid;
        }
    }
    0.5 * (lo_a + hi_a)
}

pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Degenerate(format!(
            "ggd fit needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean_abs = samples.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mean_sq = samples.iter().map(|v| v * v).sum::<f64>() / n;
    if mean_sq == 0.0 || !mean_sq.is_finite() {
        return Err(Error::Degenerate("ggd fit on all-zero samples".into()));
    }
    Ok(GgdFit {
        alpha: invert_ratio(mean_abs * mean_abs / mean_sq),
        sigma: mean_sq.sqrt(),
    })
}

pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Degenerate(format!(
            "aggd fit needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let (mut left_sq, mut left_n, mut right_sq, mut right_n) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for &v in samples {
        let sq = v * v;
        if v < 0.0 {
            left_sq += sq;
            left_n += 1;
        } else if v > 0.0 {
            right_sq += sq;
            right_n += 1;
        }
        abs_sum += v.abs();
        sq_sum += sq;
    }
    if left_n == 0 || right_n == 0 {
        return Err(Error::Degenerate(
            "aggd fit needs samples of both signs".into(),
        ));
    }
    let n = samples.len() as f64;
    let sigma_l = (left_sq / left_n as f64).sqrt();
    let sigma_r = (right_sq / right_n as f64).sqrt();
    let gamma = sigma_l / sigma_r;
    let r_hat = (abs_sum / n).powi(2) / (sq_sum / n);
    let big_r = r_hat * (gamma.powi(3) + 1.0) * (gamma + 1.0) / (gamma * gamma + 1.0).powi(2);
    let alpha = invert_ratio(big_r);

    let lg1 = ln_gamma(1.0 / alpha);
    let lg2 = ln_gamma(2.0 / alpha);
    let lg3 = ln_gamma(3.0 / alpha);
    let shape = (0.5 * (lg1 - lg3)).exp();
    let mean = (sigma_r - sigma_l) * shape * (lg2 - lg1).exp();
    Ok(AggdFit {
        alpha,
        sigma_l,
        sigma_r,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_ratio_is_two_over_pi() {
        assert!((moment_ratio(2.0) - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((invert_ratio(2.0 / std::f64::consts::PI) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ratio_is_increasing() {
        let t = ratio_table();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_ggd(&[0.0; 200]).is_err());
        assert!(fit_ggd(&[1.0; 50]).is_err());
        let positive: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        assert!(fit_aggd(&positive).is_err());
    }
}
