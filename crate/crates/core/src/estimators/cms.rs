//! Chib-Murray-Salakhutdinov estimator: the Chib identity
//! p(y) = p(x*, y) / p(x* | y) with the denominator estimated from sweep
//! transition probabilities along a posterior chain anchored at the star
//! point through the reverse operator.

use crate::error::{Error, Result};
use crate::estimate::{EstimatorId, LogEstimate};
use crate::logsum::log_mean_exp;
use crate::model::{self, Dataset, ModelSpec};
use crate::rng::RngStream;
use crate::sweep::{gibbs_sweep, reverse_sweep, sweep_transition_logprob};
use rand::Rng;

/// Annealed-Gibbs budget for locating the star point.
const MAP_SEARCH_SWEEPS: usize = 500;

/// The chain is anchored by drawing one reverse-operator step from the star
/// point at a uniformly random position, then extending forward (with the
/// sweep) above it and backward (with the reverse sweep) below it, which
/// makes the whole trajectory a stationary chain and the estimator an
/// unbiased estimator of Z.
pub fn cms(
    spec: &ModelSpec,
    data: &Dataset,
    n_transitions: usize,
    stream: &RngStream,
) -> Result<LogEstimate> {
    if n_transitions == 0 {
        return Err(Error::InvalidParameter(
            "CMS needs at least one transition".into(),
        ));
    }
    let mut rng = stream.rng();
    let star = super::map_search(spec, data, MAP_SEARCH_SWEEPS, &mut rng)?;
    let log_joint_star = model::log_joint(spec, &star, data)?;

    let anchor = rng.random_range(0..n_transitions);
    let mut states: Vec<Option<model::LatentState>> = vec![None; n_transitions];
    let mut seed_state = star.clone();
    reverse_sweep(spec, &mut seed_state, data, &mut rng)?;
    states[anchor] = Some(seed_state);
    for k in anchor + 1..n_transitions {
        let mut next = states[k - 1].clone().expect("filled in order");
        gibbs_sweep(spec, &mut next, data, 1.0, &mut rng)?;
        states[k] = Some(next);
    }
    for k in (0..anchor).rev() {
        let mut prev = states[k + 1].clone().expect("filled in order");
        reverse_sweep(spec, &mut prev, data, &mut rng)?;
        states[k] = Some(prev);
    }

    let mut log_probs = Vec::with_capacity(n_transitions);
    for state in states.iter().flatten() {
        log_probs.push(sweep_transition_logprob(spec, state, &star, data, 1.0)?);
    }
    let denominator = log_mean_exp(&log_probs)?;
    if denominator == f64::NEG_INFINITY {
        return Err(Error::StarPointUnreachable);
    }
    Ok(LogEstimate::new(
        log_joint_star - denominator,
        EstimatorId::Cms,
        stream,
        1,
        format!("n_transitions={n_transitions}"),
    ))
}
