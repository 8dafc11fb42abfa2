//! MCMC transition operators: deterministic-scan Gibbs sweeps leaving the
//! tempered target invariant, transition-density evaluation and reverse
//! operators for Chib-style estimation, and constrained-prior moves for
//! nested sampling.
//!
//! The scan order is fixed: latent rows first, then parameter blocks. The
//! reverse operator of the sweep is exactly the reversed-order sweep, since
//! every site update is an exact conditional draw.

mod binary;
mod clustering;
mod constrained;
mod lowrank;

pub use clustering::{
    collapsed_assignment_sweep, collapsed_scan_logprob, CollapsedChain,
};
pub use constrained::constrained_prior_step;

use crate::error::{Error, Result};
use crate::model::{Dataset, LatentState, ModelKind, ModelSpec};
use rand_chacha::ChaCha8Rng;

/// Deliberately-injected bugs for the validation suites. `InflateNoiseVar`
/// multiplies the observation variance by 1.1 inside the latent-site
/// conditionals of the sweep, leaving the joint untouched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMutation {
    None,
    InflateNoiseVar,
}

impl SweepMutation {
    pub(crate) fn noise_factor(self) -> f64 {
        match self {
            SweepMutation::None => 1.0,
            SweepMutation::InflateNoiseVar => 1.1,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    Ok(())
}

/// One full deterministic-scan Gibbs sweep targeting f_beta.
pub fn gibbs_sweep(
    spec: &ModelSpec,
    state: &mut LatentState,
    data: &Dataset,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    gibbs_sweep_prefix(spec, state, data, beta, spec.n(), SweepMutation::None, rng)
}

/// Sweep restricted to the first `n_rows` observations, targeting the partial
/// tempered posterior. Latent rows beyond the prefix are left untouched.
pub fn gibbs_sweep_prefix(
    spec: &ModelSpec,
    state: &mut LatentState,
    data: &Dataset,
    beta: f64,
    n_rows: usize,
    mutation: SweepMutation,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    check_beta(beta)?;
    state.validate_shape(spec)?;
    match (spec, state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, centers }) => {
            clustering::sweep_prefix(s, assignments, centers, data, beta, n_rows, mutation, false, rng)
        }
        (ModelSpec::LowRank(s), LatentState::LowRank { u, v }) => {
            lowrank::sweep_prefix(s, u, v, data, beta, n_rows, mutation, false, rng)
        }
        (ModelSpec::Binary(s), LatentState::Binary { z, a }) => {
            binary::sweep_prefix(s, z, a, data, beta, n_rows, mutation, false, rng)
        }
        _ => unreachable!("shape validated"),
    }
}

/// One reverse-scan Gibbs sweep targeting the posterior (beta = 1): the exact
/// reverse operator of `gibbs_sweep` at beta = 1.
pub fn reverse_sweep(
    spec: &ModelSpec,
    state: &mut LatentState,
    data: &Dataset,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    reverse_sweep_prefix(spec, state, data, spec.n(), rng)
}

pub fn reverse_sweep_prefix(
    spec: &ModelSpec,
    state: &mut LatentState,
    data: &Dataset,
    n_rows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    state.validate_shape(spec)?;
    match (spec, state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, centers }) => {
            clustering::sweep_prefix(s, assignments, centers, data, 1.0, n_rows, SweepMutation::None, true, rng)
        }
        (ModelSpec::LowRank(s), LatentState::LowRank { u, v }) => {
            lowrank::sweep_prefix(s, u, v, data, 1.0, n_rows, SweepMutation::None, true, rng)
        }
        (ModelSpec::Binary(s), LatentState::Binary { z, a }) => {
            binary::sweep_prefix(s, z, a, data, 1.0, n_rows, SweepMutation::None, true, rng)
        }
        _ => unreachable!("shape validated"),
    }
}

/// Log probability (density) of producing `to` from `from` in one forward
/// sweep at the given beta: the product of each site's conditional evaluated
/// at `to`'s value, conditioning on the mixed intermediate state.
pub fn sweep_transition_logprob(
    spec: &ModelSpec,
    from: &LatentState,
    to: &LatentState,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    from.validate_shape(spec)?;
    to.validate_shape(spec)?;
    match (spec, from, to) {
        (
            ModelSpec::Clustering(s),
            LatentState::Clustering { assignments: fz, centers: fc },
            LatentState::Clustering { assignments: tz, centers: tc },
        ) => clustering::transition_logprob(s, fz, fc, tz, tc, data, beta),
        (
            ModelSpec::LowRank(s),
            LatentState::LowRank { v: fv, .. },
            LatentState::LowRank { u: tu, v: tv },
        ) => lowrank::transition_logprob(s, fv, tu, tv, data, beta),
        (
            ModelSpec::Binary(s),
            LatentState::Binary { z: fz, a: fa },
            LatentState::Binary { z: tz, a: ta },
        ) => binary::transition_logprob(s, fz, fa, tz, ta, data, beta),
        _ => unreachable!("shapes validated"),
    }
}

/// Log density of one reverse-scan sweep from `from` to `to`. Together with
/// the forward density this satisfies the exact reversal identity
/// f(x) T(x'|x) = f(x') T~(x|x') for every state pair.
pub fn reverse_sweep_transition_logprob(
    spec: &ModelSpec,
    from: &LatentState,
    to: &LatentState,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    from.validate_shape(spec)?;
    to.validate_shape(spec)?;
    match (spec, from, to) {
        (
            ModelSpec::Clustering(s),
            LatentState::Clustering { assignments: fz, centers: fc },
            LatentState::Clustering { assignments: tz, centers: tc },
        ) => clustering::reverse_transition_logprob(s, fz, fc, tz, tc, data, beta),
        (
            ModelSpec::LowRank(s),
            LatentState::LowRank { u: fu, .. },
            LatentState::LowRank { u: tu, v: tv },
        ) => lowrank::reverse_transition_logprob(s, fu, tu, tv, data, beta),
        (
            ModelSpec::Binary(s),
            LatentState::Binary { z: fz, a: fa },
            LatentState::Binary { z: tz, a: ta },
        ) => binary::reverse_transition_logprob(s, fz, fa, tz, ta, data, beta),
        _ => unreachable!("shapes validated"),
    }
}

/// Names of every site conditional the sweeps use, per model. The
/// conditional-consistency suite must register all of them.
pub fn conditional_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Clustering => &[
            "clustering/assignment",
            "clustering/center",
            "clustering/collapsed_assignment",
        ],
        ModelKind::LowRank => &["lowrank/u_row", "lowrank/v_col"],
        ModelKind::Binary => &["binary/attr", "binary/feature_row"],
    }
}

pub(crate) use binary::{attr_logodds, feature_row_conditional};
pub(crate) use clustering::{assignment_logits, center_conditional};
pub(crate) use lowrank::{u_block_factor, u_row_rhs, v_block_factor, v_col_rhs};
