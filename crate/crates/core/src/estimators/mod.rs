//! The non-bridging estimator catalogue: likelihood weighting, harmonic
//! mean, BIC, Chib-Murray-Salakhutdinov, nested sampling, and variational
//! Bayes with symmetry correction.

mod cms;
mod ns;
mod vb;

pub use cms::cms;
pub use ns::{nested_sampling, NestedSamplingTrace, NsConfig};
pub use vb::{
    evaluate_bound, local_maximum_worst_increase, variational_bayes, VariationalPosterior,
    VbResult,
};

use crate::error::Result;
use crate::estimate::{EstimatorId, LogEstimate};
use crate::logsum::{log_harmonic_mean_exp, log_mean_exp};
use crate::model::{self, Dataset, ExactSample, LatentState, ModelSpec};
use crate::rng::RngStream;
use crate::schedule::AnnealingSchedule;
use crate::sweep::gibbs_sweep;
use rand_chacha::ChaCha8Rng;

/// Simple importance sampling with the prior as the proposal: the weight of
/// each prior draw is its data likelihood.
pub fn likelihood_weighting(
    spec: &ModelSpec,
    data: &Dataset,
    n_samples: usize,
    stream: &RngStream,
) -> Result<LogEstimate> {
    let mut rng = stream.rng();
    let mut weights = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let state = model::prior_draw(spec, &mut rng);
        weights.push(model::log_likelihood(spec, &state, data)?);
    }
    let value = log_mean_exp(&weights)?;
    Ok(LogEstimate::new(
        value,
        EstimatorId::LikelihoodWeighting,
        stream,
        1,
        format!("n_samples={n_samples}"),
    ))
}

/// Harmonic mean of likelihood values along a posterior chain started from
/// the exact sample.
pub fn harmonic_mean(
    spec: &ModelSpec,
    data: &Dataset,
    exact: &ExactSample,
    n_samples: usize,
    sweeps_between: usize,
    stream: &RngStream,
) -> Result<LogEstimate> {
    exact.check_provenance(spec)?;
    let mut rng = stream.rng();
    let mut state = exact.state.clone();
    let mut values = Vec::with_capacity(n_samples);
    values.push(model::log_likelihood(spec, &state, data)?);
    for _ in 1..n_samples {
        for _ in 0..sweeps_between {
            gibbs_sweep(spec, &mut state, data, 1.0, &mut rng)?;
        }
        values.push(model::log_likelihood(spec, &state, data)?);
    }
    let value = log_harmonic_mean_exp(&values)?;
    Ok(LogEstimate::new(
        value,
        EstimatorId::HarmonicMean,
        stream,
        1,
        format!("n_samples={n_samples},sweeps_between={sweeps_between}"),
    ))
}

/// Approximate MAP search: annealed Gibbs up the sigmoid ladder, then
/// iterated conditional modes until a fixed point.
pub fn map_search(
    spec: &ModelSpec,
    data: &Dataset,
    n_sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LatentState> {
    let mut state = model::prior_draw(spec, rng);
    if n_sweeps >= 2 {
        let schedule = AnnealingSchedule::sigmoid(n_sweeps, 4.0)?;
        for t in 1..schedule.len() {
            gibbs_sweep(spec, &mut state, data, schedule.betas()[t], rng)?;
        }
    }
    for _ in 0..100 {
        let changed = icm_pass(spec, &mut state, data)?;
        if !changed {
            break;
        }
    }
    Ok(state)
}

/// One pass of iterated conditional modes: every site set to the mode of its
/// full conditional at beta = 1. Returns whether anything moved.
fn icm_pass(spec: &ModelSpec, state: &mut LatentState, data: &Dataset) -> Result<bool> {
    let before = model::log_joint(spec, state, data)?;
    match (spec, &mut *state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, centers }) => {
            for i in 0..s.n {
                let logits =
                    crate::sweep::assignment_logits(s, centers, data, i, 1.0, s.noise_var);
                let best = logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap();
                assignments[i] = best;
            }
            let mut counts = vec![0usize; s.k];
            let mut sums = nalgebra::DMatrix::zeros(s.k, s.d);
            for i in 0..s.n {
                counts[assignments[i]] += 1;
                for j in 0..s.d {
                    sums[(assignments[i], j)] += data.y[(i, j)];
                }
            }
            for k in 0..s.k {
                let (mean, _) =
                    crate::sweep::center_conditional(s, &counts, &sums, k, 1.0, s.noise_var);
                for j in 0..s.d {
                    centers[(k, j)] = mean[j];
                }
            }
        }
        (ModelSpec::LowRank(s), LatentState::LowRank { u, v }) => {
            let fu = crate::sweep::u_block_factor(s, v, 1.0, s.noise_var)?;
            for i in 0..s.n {
                let rhs = crate::sweep::u_row_rhs(s, v, data, i, 1.0, s.noise_var);
                let mean = fu.mean_from_rhs(&rhs);
                u.row_mut(i).copy_from(&mean.transpose());
            }
            let fv = crate::sweep::v_block_factor(s, u, s.n, 1.0)?;
            for j in 0..s.d {
                let rhs = crate::sweep::v_col_rhs(s, u, data, s.n, j, 1.0);
                let mean = fv.mean_from_rhs(&rhs);
                v.column_mut(j).copy_from(&mean);
            }
        }
        (ModelSpec::Binary(s), LatentState::Binary { z, a }) => {
            let mut means = &*z * &*a;
            let mut mean_minus = vec![0.0; s.d];
            for i in 0..s.n {
                for k in 0..s.k {
                    let cur = z[(i, k)];
                    for j in 0..s.d {
                        mean_minus[j] = means[(i, j)] - cur * a[(k, j)];
                    }
                    let logodds =
                        crate::sweep::attr_logodds(s, a, data, i, k, &mean_minus, 1.0, s.noise_var);
                    let new = if logodds > 0.0 { 1.0 } else { 0.0 };
                    if new != cur {
                        z[(i, k)] = new;
                        let sign = new - cur;
                        for j in 0..s.d {
                            means[(i, j)] += sign * a[(k, j)];
                        }
                    }
                }
            }
            for k in 0..s.k {
                let mut on_count = 0.0;
                let mut residual_sums = vec![0.0; s.d];
                for i in 0..s.n {
                    if z[(i, k)] == 1.0 {
                        on_count += 1.0;
                        for j in 0..s.d {
                            residual_sums[j] += data.y[(i, j)] - means[(i, j)] + a[(k, j)];
                        }
                    }
                }
                let (cond_means, _) =
                    crate::sweep::feature_row_conditional(s, on_count, &residual_sums, 1.0);
                for j in 0..s.d {
                    let delta = cond_means[j] - a[(k, j)];
                    a[(k, j)] = cond_means[j];
                    if delta != 0.0 {
                        for i in 0..s.n {
                            if z[(i, k)] == 1.0 {
                                means[(i, j)] += delta;
                            }
                        }
                    }
                }
            }
        }
        _ => unreachable!("shape validated upstream"),
    }
    let after = model::log_joint(spec, state, data)?;
    Ok(after > before + 1e-12)
}

/// Free-parameter count for the BIC penalty: continuous parameter dimensions
/// only for the clustering and binary models; for low rank both factors are
/// continuous, so both count.
pub fn bic_parameter_count(spec: &ModelSpec) -> usize {
    match spec {
        ModelSpec::Clustering(s) => s.k * s.d,
        ModelSpec::Binary(s) => s.k * s.d,
        ModelSpec::LowRank(s) => s.k * (s.n + s.d),
    }
}

/// Bayesian information criterion at an approximate MAP:
/// log p(y | theta_hat, z_hat) - (d/2) ln N.
pub fn bic(
    spec: &ModelSpec,
    data: &Dataset,
    n_map_sweeps: usize,
    stream: &RngStream,
) -> Result<LogEstimate> {
    let mut rng = stream.rng();
    let value = if spec.n() == 0 {
        0.0
    } else {
        let state = map_search(spec, data, n_map_sweeps, &mut rng)?;
        let loglik = model::log_likelihood(spec, &state, data)?;
        let d = bic_parameter_count(spec) as f64;
        loglik - 0.5 * d * (spec.n() as f64).ln()
    };
    Ok(LogEstimate::new(
        value,
        EstimatorId::Bic,
        stream,
        1,
        format!("map_sweeps={n_map_sweeps}"),
    ))
}
