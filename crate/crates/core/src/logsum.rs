//! Log-domain scalar arithmetic. Every weight and likelihood in this crate is
//! carried in nats; nothing is ever exponentiated except inside these folds.

use crate::error::{Error, Result};

/// A log-domain weight. Negative infinity encodes weight zero; positive
/// infinity and NaN are rejected.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    /// Weight one (0 nats).
    pub const UNIT: LogWeight = LogWeight(0.0);
    /// Weight zero.
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::InvalidParameter(format!(
                "log weight must be finite or -inf, got {value}"
            )));
        }
        Ok(LogWeight(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Multiplies the underlying weight by exp(delta).
    pub fn accumulate(&mut self, delta: f64) {
        let v = self.0 + delta;
        assert!(
            !v.is_nan() && v != f64::INFINITY,
            "log weight accumulation produced {v} from {} + {delta}",
            self.0
        );
        self.0 = v;
    }
}

/// log(sum_i exp(v_i)) via max-shift. Exact for lists containing -inf entries.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyAggregation);
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(!max.is_nan(), "NaN in log_sum_exp input");
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// log of the arithmetic mean of exp(v_i).
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(values)? - (values.len() as f64).ln())
}

/// log of the harmonic mean of exp(v_i). Entries of -inf (weight zero) make
/// the harmonic mean undefined and are rejected.
pub fn log_harmonic_mean_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyAggregation);
    }
    if values.iter().any(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::ZeroWeightInHarmonicMean);
    }
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    Ok(-log_mean_exp(&negated)?)
}

/// Effective sample size of a set of log weights: (sum w)^2 / sum w^2.
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64> {
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    let ess = 2.0 * log_sum_exp(log_weights)? - log_sum_exp(&doubled)?;
    Ok(ess.exp())
}
