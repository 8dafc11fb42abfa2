//! Binary attribute model internals: prior draws, joint terms, the collapsed
//! feature-matrix posterior, and 2^K predictive enumerations.

use super::{BinarySpec, Dataset, LatentState};
use crate::dist::{gaussian_log_density, LN_2PI};
use crate::error::{Error, Result};
use crate::logsum::log_sum_exp;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Enumerating the next attribute row costs 2^K terms; refuse beyond this.
pub const MAX_ENUM_K: usize = 15;

pub fn prior_draw(spec: &BinarySpec, rng: &mut ChaCha8Rng) -> LatentState {
    let z = DMatrix::from_fn(spec.n, spec.k, |_, k| {
        if rng.random::<f64>() < spec.attr_probs[k] {
            1.0
        } else {
            0.0
        }
    });
    let sa = spec.a_var.sqrt();
    let a = DMatrix::from_fn(spec.k, spec.d, |_, _| sa * rng.sample::<f64, _>(StandardNormal));
    LatentState::Binary { z, a }
}

pub fn log_prior(spec: &BinarySpec, z: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let mut z_term = 0.0;
    for i in 0..spec.n {
        for k in 0..spec.k {
            let p = spec.attr_probs[k];
            z_term += if z[(i, k)] == 1.0 { p.ln() } else { (1.0 - p).ln() };
        }
    }
    let a_term: f64 = a.iter().map(|x| gaussian_log_density(*x, 0.0, spec.a_var)).sum();
    z_term + a_term
}

pub fn log_attr_prior_mask(spec: &BinarySpec, mask: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..spec.k {
        let p = spec.attr_probs[k];
        total += if mask >> k & 1 == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    total
}

/// Conjugate posterior over the feature matrix A given binary rows Z and the
/// matching observations: columns of A are independent Gaussians with a
/// shared K x K precision.
pub struct FeaturePosterior {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// Posterior means, K x D.
    pub means: DMatrix<f64>,
}

impl FeaturePosterior {
    /// Posterior from the first `n_rows` rows of z and data.
    pub fn new(spec: &BinarySpec, z: &DMatrix<f64>, data: &Dataset, n_rows: usize) -> Self {
        let k = spec.k;
        let mut precision = DMatrix::identity(k, k) / spec.a_var;
        let mut zty = DMatrix::zeros(k, spec.d);
        for i in 0..n_rows {
            for a in 0..k {
                if z[(i, a)] == 1.0 {
                    for b in 0..k {
                        if z[(i, b)] == 1.0 {
                            precision[(a, b)] += 1.0 / spec.noise_var;
                        }
                    }
                    for j in 0..spec.d {
                        zty[(a, j)] += data.y[(i, j)] / spec.noise_var;
                    }
                }
            }
        }
        let chol = nalgebra::Cholesky::new(precision).expect("positive definite");
        let means = chol.solve(&zty);
        FeaturePosterior { chol, means }
    }

    /// Predictive mean vector and shared variance for a new row with
    /// attribute mask `mask`.
    pub fn predictive(&self, spec: &BinarySpec, mask: usize) -> (DVector<f64>, f64) {
        let k = spec.k;
        let zvec = DVector::from_iterator(k, (0..k).map(|b| ((mask >> b) & 1) as f64));
        let solved = self.chol.solve(&zvec);
        let var = zvec.dot(&solved) + spec.noise_var;
        let mean = self.means.transpose() * zvec;
        (mean, var)
    }
}

/// log p(y_row | z_{0..row}, y_{0..row}) with A collapsed and the next
/// attribute row summed over all 2^K configurations.
pub fn predictive_loglik(
    spec: &BinarySpec,
    z: &DMatrix<f64>,
    data: &Dataset,
    row: usize,
) -> Result<f64> {
    if spec.k > MAX_ENUM_K {
        return Err(Error::EnumerationTooLarge(format!(
            "2^{} attribute configurations (cap 2^{MAX_ENUM_K})",
            spec.k
        )));
    }
    let post = FeaturePosterior::new(spec, z, data, row);
    let mut terms = Vec::with_capacity(1 << spec.k);
    for mask in 0..(1usize << spec.k) {
        let (mean, var) = post.predictive(spec, mask);
        let norm = -0.5 * (LN_2PI + var.ln());
        let mut ll = log_attr_prior_mask(spec, mask);
        for j in 0..spec.d {
            let r = data.y[(row, j)] - mean[j];
            ll += norm - 0.5 * r * r / var;
        }
        terms.push(ll);
    }
    log_sum_exp(&terms)
}

/// log p(y_row | A) with the attribute row summed over all 2^K configurations
/// and A explicit, the posterior-proposal weight used by sequential
/// estimators on this model.
pub fn row_loglik_given_a(spec: &BinarySpec, a: &DMatrix<f64>, y_row: &DVector<f64>) -> Result<f64> {
    if spec.k > MAX_ENUM_K {
        return Err(Error::EnumerationTooLarge(format!(
            "2^{} attribute configurations (cap 2^{MAX_ENUM_K})",
            spec.k
        )));
    }
    let norm = -0.5 * (LN_2PI + spec.noise_var.ln());
    let mut terms = Vec::with_capacity(1 << spec.k);
    let mut mean = vec![0.0; spec.d];
    for mask in 0..(1usize << spec.k) {
        // Gray-code walk: exactly one attribute toggles between steps.
        let gray = mask ^ (mask >> 1);
        if mask > 0 {
            let prev_gray = (mask - 1) ^ ((mask - 1) >> 1);
            let flipped = (gray ^ prev_gray).trailing_zeros() as usize;
            let sign = if gray >> flipped & 1 == 1 { 1.0 } else { -1.0 };
            for j in 0..spec.d {
                mean[j] += sign * a[(flipped, j)];
            }
        }
        let mut ll = log_attr_prior_mask(spec, gray);
        for j in 0..spec.d {
            let r = y_row[j] - mean[j];
            ll += norm - 0.5 * r * r / spec.noise_var;
        }
        terms.push(ll);
    }
    log_sum_exp(&terms)
}

/// Per-configuration log masses of p(z_row | y_row, A), for posterior proposals.
pub fn row_posterior_logits_given_a(
    spec: &BinarySpec,
    a: &DMatrix<f64>,
    y_row: &DVector<f64>,
) -> Result<Vec<f64>> {
    if spec.k > MAX_ENUM_K {
        return Err(Error::EnumerationTooLarge(format!(
            "2^{} attribute configurations (cap 2^{MAX_ENUM_K})",
            spec.k
        )));
    }
    let norm = -0.5 * (LN_2PI + spec.noise_var.ln());
    let mut logits = vec![0.0; 1 << spec.k];
    let mut mean = vec![0.0; spec.d];
    for mask in 0..(1usize << spec.k) {
        let gray = mask ^ (mask >> 1);
        if mask > 0 {
            let prev_gray = (mask - 1) ^ ((mask - 1) >> 1);
            let flipped = (gray ^ prev_gray).trailing_zeros() as usize;
            let sign = if gray >> flipped & 1 == 1 { 1.0 } else { -1.0 };
            for j in 0..spec.d {
                mean[j] += sign * a[(flipped, j)];
            }
        }
        let mut ll = log_attr_prior_mask(spec, gray);
        for j in 0..spec.d {
            let r = y_row[j] - mean[j];
            ll += norm - 0.5 * r * r / spec.noise_var;
        }
        logits[gray] = ll;
    }
    Ok(logits)
}
