//! Constrained-prior moves for nested sampling: single-site Metropolis with
//! prior-conditional proposals, accepted exactly when the proposed state
//! keeps the log-likelihood above the cutoff (the prior ratio cancels).

use crate::dist::Categorical;
use crate::error::{Error, Result};
use crate::model::{Dataset, LatentState, ModelSpec};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One full sweep of constrained-prior Metropolis moves. The state must
/// satisfy log_likelihood > cutoff on entry and is guaranteed to on exit.
/// Returns the updated log-likelihood.
pub fn constrained_prior_step(
    spec: &ModelSpec,
    state: &mut LatentState,
    data: &Dataset,
    cutoff: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    state.validate_shape(spec)?;
    let mut loglik = crate::model::log_likelihood(spec, state, data)?;
    if !(loglik > cutoff) {
        return Err(Error::InfeasibleStart);
    }
    match (spec, state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, centers }) => {
            let row_ll = |assignments: &[usize], centers: &DMatrix<f64>, i: usize| -> f64 {
                let mut ll = 0.0;
                let c = centers.row(assignments[i]);
                for j in 0..s.d {
                    ll += crate::dist::gaussian_log_density(data.y[(i, j)], c[j], s.noise_var);
                }
                ll
            };
            let cat = Categorical::new(s.mix_probs.clone()).expect("spec validated");
            for i in 0..s.n {
                let proposal = cat.sample(rng);
                if proposal == assignments[i] {
                    continue;
                }
                let old = row_ll(assignments, centers, i);
                let prev = assignments[i];
                assignments[i] = proposal;
                let new = row_ll(assignments, centers, i);
                if loglik - old + new > cutoff {
                    loglik += new - old;
                } else {
                    assignments[i] = prev;
                }
            }
            let sd = s.between_var.sqrt();
            for k in 0..s.k {
                let members: Vec<usize> = (0..s.n).filter(|i| assignments[*i] == k).collect();
                let proposal: Vec<f64> =
                    (0..s.d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
                let mut delta = 0.0;
                for &i in &members {
                    for j in 0..s.d {
                        delta += crate::dist::gaussian_log_density(data.y[(i, j)], proposal[j], s.noise_var)
                            - crate::dist::gaussian_log_density(data.y[(i, j)], centers[(k, j)], s.noise_var);
                    }
                }
                if loglik + delta > cutoff {
                    for j in 0..s.d {
                        centers[(k, j)] = proposal[j];
                    }
                    loglik += delta;
                }
            }
        }
        (ModelSpec::LowRank(s), LatentState::LowRank { u, v }) => {
            let su = s.u_var.sqrt();
            for i in 0..s.n {
                let proposal: Vec<f64> =
                    (0..s.k).map(|_| su * rng.sample::<f64, _>(StandardNormal)).collect();
                let mut delta = 0.0;
                for j in 0..s.d {
                    let old_mean = u.row(i).dot(&v.column(j).transpose());
                    let new_mean: f64 = (0..s.k).map(|k| proposal[k] * v[(k, j)]).sum();
                    delta += crate::dist::gaussian_log_density(data.y[(i, j)], new_mean, s.noise_var)
                        - crate::dist::gaussian_log_density(data.y[(i, j)], old_mean, s.noise_var);
                }
                if loglik + delta > cutoff {
                    for k in 0..s.k {
                        u[(i, k)] = proposal[k];
                    }
                    loglik += delta;
                }
            }
            let sv = s.v_var.sqrt();
            for j in 0..s.d {
                let proposal: Vec<f64> =
                    (0..s.k).map(|_| sv * rng.sample::<f64, _>(StandardNormal)).collect();
                let mut delta = 0.0;
                for i in 0..s.n {
                    let old_mean = u.row(i).dot(&v.column(j).transpose());
                    let new_mean: f64 = (0..s.k).map(|k| u[(i, k)] * proposal[k]).sum();
                    delta += crate::dist::gaussian_log_density(data.y[(i, j)], new_mean, s.noise_var)
                        - crate::dist::gaussian_log_density(data.y[(i, j)], old_mean, s.noise_var);
                }
                if loglik + delta > cutoff {
                    for k in 0..s.k {
                        v[(k, j)] = proposal[k];
                    }
                    loglik += delta;
                }
            }
        }
        (ModelSpec::Binary(s), LatentState::Binary { z, a }) => {
            let mut means = &*z * &*a;
            for i in 0..s.n {
                for k in 0..s.k {
                    let cur = z[(i, k)];
                    let proposal = if rng.random::<f64>() < s.attr_probs[k] { 1.0 } else { 0.0 };
                    if proposal == cur {
                        continue;
                    }
                    let sign = proposal - cur;
                    let mut delta = 0.0;
                    for j in 0..s.d {
                        let old_mean = means[(i, j)];
                        let new_mean = old_mean + sign * a[(k, j)];
                        delta += crate::dist::gaussian_log_density(data.y[(i, j)], new_mean, s.noise_var)
                            - crate::dist::gaussian_log_density(data.y[(i, j)], old_mean, s.noise_var);
                    }
                    if loglik + delta > cutoff {
                        z[(i, k)] = proposal;
                        for j in 0..s.d {
                            means[(i, j)] += sign * a[(k, j)];
                        }
                        loglik += delta;
                    }
                }
            }
            let sa = s.a_var.sqrt();
            for k in 0..s.k {
                let proposal: Vec<f64> =
                    (0..s.d).map(|_| sa * rng.sample::<f64, _>(StandardNormal)).collect();
                let mut delta = 0.0;
                for i in 0..s.n {
                    if z[(i, k)] == 1.0 {
                        for j in 0..s.d {
                            let old_mean = means[(i, j)];
                            let new_mean = old_mean - a[(k, j)] + proposal[j];
                            delta +=
                                crate::dist::gaussian_log_density(data.y[(i, j)], new_mean, s.noise_var)
                                    - crate::dist::gaussian_log_density(data.y[(i, j)], old_mean, s.noise_var);
                        }
                    }
                }
                if loglik + delta > cutoff {
                    for i in 0..s.n {
                        if z[(i, k)] == 1.0 {
                            for j in 0..s.d {
                                means[(i, j)] += proposal[j] - a[(k, j)];
                            }
                        }
                    }
                    for j in 0..s.d {
                        a[(k, j)] = proposal[j];
                    }
                    loglik += delta;
                }
            }
        }
        _ => unreachable!("shape validated"),
    }
    debug_assert!(loglik > cutoff);
    Ok(loglik)
}
