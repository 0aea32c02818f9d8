//! Importance weights: normalization, effective sample size, resampling.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// ln Σ e^{x_k}, max-shifted; −∞ when every entry is −∞.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log weights in place so Σ exp = 1; errors when no weight is
/// above −∞ (nothing left to normalize).
pub fn normalize_log_weights(log_weights: &mut [f64]) -> Result<()> {
    let lse = log_sum_exp(log_weights);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    for w in log_weights.iter_mut() {
        *w -= lse;
    }
    Ok(())
}

/// ESS = 1/Σ w² on normalized weights; ranges from 1 (one particle carries
/// everything) to N (uniform).
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64> {
    let lse = log_sum_exp(log_weights);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let sum_sq: f64 = log_weights.iter().map(|&w| (2.0 * (w - lse)).exp()).sum();
    Ok(1.0 / sum_sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleScheme {
    /// Independent draws proportional to weight (the default).
    Multinomial,
    /// Stratified single-offset selection; lower variance, provided as an
    /// alternative behind this switch.
    Systematic,
}

impl Default for ResampleScheme {
    fn default() -> Self {
        ResampleScheme::Multinomial
    }
}

/// Indices of the survivors: `n_out` picks proportional to the normalized
/// weights. Duplicates are expected.
pub fn resample_indices(
    log_weights: &[f64],
    n_out: usize,
    scheme: ResampleScheme,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let lse = log_sum_exp(log_weights);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let n = log_weights.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in log_weights {
        acc += (w - lse).exp();
        cumulative.push(acc);
    }
    let total = acc;
    let pick = |u: f64, cumulative: &[f64]| -> usize {
        match cumulative.binary_search_by(|c| c.partial_cmp(&u).expect("finite cumulative")) {
            Ok(i) | Err(i) => i.min(n - 1),
        }
    };
    let indices = match scheme {
        ResampleScheme::Multinomial => (0..n_out)
            .map(|_| pick(rng.random::<f64>() * total, &cumulative))
            .collect(),
        ResampleScheme::Systematic => {
            let offset: f64 = rng.random();
            (0..n_out)
                .map(|k| pick((k as f64 + offset) / n_out as f64 * total, &cumulative))
                .collect()
        }
    };
    Ok(indices)
}
