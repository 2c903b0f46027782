//! Log-domain helpers for exponential-weights probabilities.

use crate::error::{BwkError, Result};
use crate::types::ProbVector;

/// `ln Σ exp(v)`, shifted by the maximum so large entries do not overflow.
///
/// Entries may be `-inf`; the result is `-inf` iff every entry is.
pub fn log_sum_exp(log_values: &[f64]) -> Result<f64> {
    if log_values.is_empty() {
        return Err(BwkError::EmptyCollection);
    }
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let shifted: f64 = log_values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + shifted.ln())
}

/// Normalizes log-weights into a probability vector, `p_i = exp(w_i - lse(w))`.
pub fn normalized_probs_from_log_weights(log_weights: &[f64]) -> Result<ProbVector> {
    if let Some(bad) = log_weights.iter().find(|w| !w.is_finite()) {
        return Err(BwkError::InvalidWeight(*bad));
    }
    let lse = log_sum_exp(log_weights)?;
    let mut probs: Vec<f64> = log_weights.iter().map(|w| (w - lse).exp()).collect();
    // exp rounding leaves the sum within a few ulps of 1; rescale so
    // downstream mixtures start from an exact simplex point.
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    ProbVector::new(probs)
}
