//! Low-rank model internals: prior draws, joint terms, and the row predictive
//! with the new U row marginalized analytically.

use super::{LatentState, LowRankSpec};
use crate::dist::{gaussian_log_density, LN_2PI};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn prior_draw(spec: &LowRankSpec, rng: &mut ChaCha8Rng) -> LatentState {
    let su = spec.u_var.sqrt();
    let sv = spec.v_var.sqrt();
    let u = DMatrix::from_fn(spec.n, spec.k, |_, _| su * rng.sample::<f64, _>(StandardNormal));
    let v = DMatrix::from_fn(spec.k, spec.d, |_, _| sv * rng.sample::<f64, _>(StandardNormal));
    LatentState::LowRank { u, v }
}

pub fn log_prior(spec: &LowRankSpec, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let u_term: f64 = u.iter().map(|x| gaussian_log_density(*x, 0.0, spec.u_var)).sum();
    let v_term: f64 = v.iter().map(|x| gaussian_log_density(*x, 0.0, spec.v_var)).sum();
    u_term + v_term
}

/// log p(y_row | V) with the row's U marginalized: y_row is Gaussian with
/// mean zero and covariance u_var * V^T V + noise_var * I.
pub fn row_predictive_logdens(spec: &LowRankSpec, v: &DMatrix<f64>, y_row: &DVector<f64>) -> f64 {
    let d = spec.d;
    let mut cov = v.transpose() * v * spec.u_var;
    for j in 0..d {
        cov[(j, j)] += spec.noise_var;
    }
    let chol = nalgebra::Cholesky::new(cov).expect("covariance is positive definite");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let solved = chol.solve(y_row);
    let quad = y_row.dot(&solved);
    -0.5 * (d as f64) * LN_2PI - 0.5 * log_det - 0.5 * quad
}
