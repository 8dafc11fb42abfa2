//! Nested sampling: shrink the prior volume through rising likelihood
//! cutoffs, replacing the worst particle with a constrained-prior move each
//! step. Volumes follow the deterministic (K/(K+1))^t rule.

use crate::error::{Error, Result};
use crate::estimate::{EstimatorId, LogEstimate};
use crate::logsum::log_sum_exp;
use crate::model::{self, Dataset, ModelSpec};
use crate::rng::RngStream;
use crate::sweep::constrained_prior_step;
use rand::Rng;

const STEP_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct NsConfig {
    /// At least 2; the smallest count for which the algorithm is defined.
    pub n_particles: usize,
    /// Constrained-prior MCMC moves per replacement.
    pub mcmc_steps: usize,
    /// Stop once one more term grows the total by less than this ratio.
    pub stop_ratio: f64,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            n_particles: 2,
            mcmc_steps: 20,
            stop_ratio: 1.0 + 1e-10,
        }
    }
}

/// The cutoff/volume ladder walked by one run, plus the two bound variants:
/// each likelihood shell can be priced at the cutoff above it (`sum_high`,
/// the returned estimate) or below it (`sum_low`).
#[derive(Clone, Debug)]
pub struct NestedSamplingTrace {
    pub cutoffs: Vec<f64>,
    pub volumes: Vec<f64>,
    pub n_particles: usize,
    pub stop_ratio: f64,
    pub sum_low: f64,
    pub sum_high: f64,
}

pub fn nested_sampling(
    spec: &ModelSpec,
    data: &Dataset,
    cfg: &NsConfig,
    stream: &RngStream,
) -> Result<(LogEstimate, NestedSamplingTrace)> {
    if cfg.n_particles < 2 {
        return Err(Error::InvalidParameter(
            "nested sampling needs at least 2 particles".into(),
        ));
    }
    if !(cfg.stop_ratio > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stop ratio must exceed 1, got {}",
            cfg.stop_ratio
        )));
    }
    let mut rng = stream.rng();
    let k = cfg.n_particles;
    let shrink = k as f64 / (k + 1) as f64;
    let log_shrink = shrink.ln();
    let log_gap = (1.0 - shrink).ln();

    let mut particles = Vec::with_capacity(k);
    let mut logliks = Vec::with_capacity(k);
    for _ in 0..k {
        let state = model::prior_draw(spec, &mut rng);
        logliks.push(model::log_likelihood(spec, &state, data)?);
        particles.push(state);
    }

    let mut cutoffs = Vec::new();
    let mut volumes = Vec::new();
    // log of sum_t (V_{t-1} - V_t) C_t, accumulated incrementally
    let mut total_high = f64::NEG_INFINITY;
    let mut total_low = f64::NEG_INFINITY;
    let stop_log = cfg.stop_ratio.ln();

    let mut step = 0usize;
    loop {
        step += 1;
        if step > STEP_CAP {
            return Err(Error::StopCriterionNeverMet);
        }
        let worst = (0..k)
            .min_by(|a, b| logliks[*a].partial_cmp(&logliks[*b]).unwrap())
            .unwrap();
        let cutoff = logliks[worst];
        cutoffs.push(cutoff);
        volumes.push(shrink.powi(step as i32));

        // shell between V_{t-1} and V_t priced at this cutoff
        let term_high = (step as f64 - 1.0) * log_shrink + log_gap + cutoff;
        let term_low = step as f64 * log_shrink + log_gap + cutoff;
        let new_high = log_sum_exp(&[total_high, term_high])?;
        total_low = log_sum_exp(&[total_low, term_low])?;
        let increment_small = total_high.is_finite() && new_high - total_high < stop_log;
        total_high = new_high;
        if increment_small {
            break;
        }

        // replace the worst particle: copy a surviving one, then move it
        // under the constraint
        let mut donor = rng.random_range(0..k - 1);
        if donor >= worst {
            donor += 1;
        }
        let mut replacement = particles[donor].clone();
        // fresh evaluation: running values can sit a rounding error away
        // from the cutoff when particles coincide
        let mut rep_ll = model::log_likelihood(spec, &replacement, data)?;
        if rep_ll > cutoff {
            for _ in 0..cfg.mcmc_steps {
                match constrained_prior_step(spec, &mut replacement, data, cutoff, &mut rng) {
                    Ok(ll) => rep_ll = ll,
                    // boundary-degenerate state: leave the copy where it is
                    Err(Error::InfeasibleStart) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        particles[worst] = replacement;
        logliks[worst] = rep_ll;
    }

    let trace = NestedSamplingTrace {
        cutoffs,
        volumes,
        n_particles: k,
        stop_ratio: cfg.stop_ratio,
        sum_low: total_low,
        sum_high: total_high,
    };
    let estimate = LogEstimate::new(
        total_high,
        EstimatorId::NestedSampling,
        stream,
        1,
        format!("particles={k},mcmc_steps={},stop_ratio={}", cfg.mcmc_steps, cfg.stop_ratio),
    );
    Ok((estimate, trace))
}
