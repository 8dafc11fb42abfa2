//! Sequential Monte Carlo over data points (particle learning) and its
//! reverse, the sequential harmonic mean estimator, which starts from an
//! exact posterior sample and deletes one observation at a time.

use crate::dist::{gaussian_log_density, sample_from_logits, Categorical};
use crate::error::{Error, Result};
use crate::logsum::{effective_sample_size, log_harmonic_mean_exp, log_mean_exp, log_sum_exp, LogWeight};
use crate::model::binary::{row_loglik_given_a, row_posterior_logits_given_a};
use crate::model::clustering::ClusterStats;
use crate::model::lowrank::row_predictive_logdens;
use crate::model::{Dataset, ExactSample, LatentState, ModelSpec};
use crate::sweep::{
    collapsed_assignment_sweep, gibbs_sweep_prefix, CollapsedChain, SweepMutation,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    /// Propose the new latent row from the prior; weight by the observation
    /// likelihood.
    Prior,
    /// Propose from the per-point posterior; weight by the predictive
    /// likelihood with the new row's latent variables marginalized.
    Posterior,
}

#[derive(Clone, Debug)]
pub struct SmcConfig {
    pub n_particles: usize,
    pub sweeps_per_point: usize,
    pub proposal: ProposalKind,
    /// Resample when ESS < threshold * n_particles; in [0, 1].
    pub resample_threshold: f64,
}

impl SmcConfig {
    pub fn single_particle(sweeps_per_point: usize, proposal: ProposalKind) -> Self {
        SmcConfig {
            n_particles: 1,
            sweeps_per_point,
            proposal,
            resample_threshold: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter("need at least one particle".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::InvalidParameter(format!(
                "resample threshold {} outside [0, 1]",
                self.resample_threshold
            )));
        }
        Ok(())
    }
}

/// Particle state: the clustering model is Rao-Blackwellized (assignments
/// only, centers collapsed); the other models carry explicit parameters.
enum Particle {
    Clustering(CollapsedChain),
    Full(LatentState),
}

fn init_particle_from_prior(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Particle {
    match spec {
        ModelSpec::Clustering(s) => Particle::Clustering(CollapsedChain {
            assignments: vec![0; s.n],
            stats: ClusterStats::empty(s.k, s.d),
        }),
        _ => Particle::Full(crate::model::prior_draw(spec, rng)),
    }
}

fn init_particle_from_exact(spec: &ModelSpec, exact: &ExactSample, data: &Dataset) -> Particle {
    match (spec, &exact.state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, .. }) => {
            Particle::Clustering(CollapsedChain::new(s, assignments.clone(), data, s.n))
        }
        _ => Particle::Full(exact.state.clone()),
    }
}

/// Extends one particle with data row `row` and returns the log-weight
/// increment. For SHME the same increments are computed without moving the
/// state (`advance` = false).
fn row_step(
    spec: &ModelSpec,
    particle: &mut Particle,
    data: &Dataset,
    row: usize,
    proposal: ProposalKind,
    advance: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    match (spec, particle) {
        (ModelSpec::Clustering(s), Particle::Clustering(chain)) => {
            let y_row: Vec<f64> = (0..s.d).map(|j| data.y[(row, j)]).collect();
            match proposal {
                ProposalKind::Prior => {
                    let zi = if advance {
                        let cat = Categorical::new(s.mix_probs.clone()).expect("valid spec");
                        let zi = cat.sample(rng);
                        chain.assignments[row] = zi;
                        zi
                    } else {
                        chain.assignments[row]
                    };
                    let inc = chain.stats.predictive_logdens(s, zi, &y_row);
                    if advance {
                        chain.stats.add(zi, data, row);
                    }
                    Ok(inc)
                }
                ProposalKind::Posterior => {
                    let logits: Vec<f64> = (0..s.k)
                        .map(|k| s.mix_probs[k].ln() + chain.stats.predictive_logdens(s, k, &y_row))
                        .collect();
                    let inc = log_sum_exp(&logits)?;
                    if advance {
                        let zi = sample_from_logits(&logits, rng)?;
                        chain.assignments[row] = zi;
                        chain.stats.add(zi, data, row);
                    }
                    Ok(inc)
                }
            }
        }
        (ModelSpec::LowRank(s), Particle::Full(LatentState::LowRank { u, v })) => {
            match proposal {
                ProposalKind::Prior => {
                    if advance {
                        let sd = s.u_var.sqrt();
                        for k in 0..s.k {
                            u[(row, k)] = sd * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    let mut inc = 0.0;
                    for j in 0..s.d {
                        let mean = u.row(row).dot(&v.column(j).transpose());
                        inc += gaussian_log_density(data.y[(row, j)], mean, s.noise_var);
                    }
                    Ok(inc)
                }
                ProposalKind::Posterior => {
                    let y_row = data.y.row(row).transpose();
                    if advance {
                        let factor = crate::sweep::u_block_factor(s, v, 1.0, s.noise_var)?;
                        let rhs = crate::sweep::u_row_rhs(s, v, data, row, 1.0, s.noise_var);
                        let mean = factor.mean_from_rhs(&rhs);
                        let draw = factor.sample(&mean, rng);
                        u.row_mut(row).copy_from(&draw.transpose());
                    }
                    Ok(row_predictive_logdens(s, v, &y_row))
                }
            }
        }
        (ModelSpec::Binary(s), Particle::Full(LatentState::Binary { z, a })) => {
            let y_row = data.y.row(row).transpose();
            match proposal {
                ProposalKind::Prior => {
                    if advance {
                        for k in 0..s.k {
                            z[(row, k)] = if rng.random::<f64>() < s.attr_probs[k] { 1.0 } else { 0.0 };
                        }
                    }
                    let mut inc = 0.0;
                    for j in 0..s.d {
                        let mean = z.row(row).dot(&a.column(j).transpose());
                        inc += gaussian_log_density(data.y[(row, j)], mean, s.noise_var);
                    }
                    Ok(inc)
                }
                ProposalKind::Posterior => {
                    if advance {
                        let logits = row_posterior_logits_given_a(s, a, &y_row)?;
                        let mask = sample_from_logits(&logits, rng)?;
                        for k in 0..s.k {
                            z[(row, k)] = ((mask >> k) & 1) as f64;
                        }
                        log_sum_exp(&logits)
                    } else {
                        row_loglik_given_a(s, a, &y_row)
                    }
                }
            }
        }
        _ => Err(Error::ShapeMismatch("particle does not match spec".into())),
    }
}

fn rejuvenate(
    spec: &ModelSpec,
    particle: &mut Particle,
    data: &Dataset,
    n_rows: usize,
    sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    for _ in 0..sweeps {
        match (spec, &mut *particle) {
            (ModelSpec::Clustering(s), Particle::Clustering(chain)) => {
                collapsed_assignment_sweep(s, chain, data, n_rows, rng)?;
            }
            (_, Particle::Full(state)) => {
                gibbs_sweep_prefix(spec, state, data, 1.0, n_rows, SweepMutation::None, rng)?;
            }
            _ => unreachable!(),
        }
    }
    Ok(())
}

fn clone_particle(p: &Particle) -> Particle {
    match p {
        Particle::Clustering(c) => Particle::Clustering(c.clone()),
        Particle::Full(s) => Particle::Full(s.clone()),
    }
}

/// Multinomial resampling proportional to exp(logits).
fn resample_indices(logits: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let norm = log_sum_exp(logits)?;
    let probs: Vec<f64> = logits.iter().map(|l| (l - norm).exp()).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        out.push(chosen);
    }
    Ok(out)
}

/// Particle learning over the data rows in order. Returns the log of the
/// arithmetic mean of the final weights, an unbiased estimator of Z.
pub fn smc_run(
    spec: &ModelSpec,
    data: &Dataset,
    cfg: &SmcConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LogWeight> {
    cfg.validate()?;
    let n = spec.n();
    let mut particles: Vec<Particle> = (0..cfg.n_particles)
        .map(|_| init_particle_from_prior(spec, rng))
        .collect();
    let mut weights = vec![0.0f64; cfg.n_particles];

    for row in 0..n {
        for (k, particle) in particles.iter_mut().enumerate() {
            weights[k] += row_step(spec, particle, data, row, cfg.proposal, true, rng)?;
            rejuvenate(spec, particle, data, row + 1, cfg.sweeps_per_point, rng)?;
        }
        if cfg.n_particles > 1 {
            let ess = effective_sample_size(&weights)?;
            if ess < cfg.resample_threshold * cfg.n_particles as f64 {
                let idx = resample_indices(&weights, cfg.n_particles, rng)?;
                particles = idx.iter().map(|i| clone_particle(&particles[*i])).collect();
                let reset = log_mean_exp(&weights)?;
                weights.fill(reset);
            }
        }
    }
    LogWeight::new(log_mean_exp(&weights)?)
}

/// Sequential harmonic mean estimator: SMC run in reverse from an exact
/// posterior sample, deleting one observation per step. The reciprocals of
/// the returned weights are unbiased estimators of 1/Z, so the combined
/// estimate is the harmonic mean. With several particles all start at the
/// single exact sample, so they are correlated.
pub fn shme_run(
    spec: &ModelSpec,
    data: &Dataset,
    exact: &ExactSample,
    cfg: &SmcConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LogWeight> {
    cfg.validate()?;
    exact.check_provenance(spec)?;
    let n = spec.n();
    let mut particles: Vec<Particle> = (0..cfg.n_particles)
        .map(|_| init_particle_from_exact(spec, exact, data))
        .collect();
    let mut weights = vec![0.0f64; cfg.n_particles];

    for row in (0..n).rev() {
        for (k, particle) in particles.iter_mut().enumerate() {
            rejuvenate(spec, particle, data, row + 1, cfg.sweeps_per_point, rng)?;
            // weight ratio for row `row`, evaluated before deleting it; for
            // the clustering chain the row leaves the sufficient statistics
            // so the predictive conditions on the remaining prefix
            if let Particle::Clustering(chain) = particle {
                chain.stats.remove(chain.assignments[row], data, row);
            }
            weights[k] += row_step(spec, particle, data, row, cfg.proposal, false, rng)?;
        }
        if cfg.n_particles > 1 {
            let reciprocal: Vec<f64> = weights.iter().map(|w| -w).collect();
            let ess = effective_sample_size(&reciprocal)?;
            if ess < cfg.resample_threshold * cfg.n_particles as f64 {
                let idx = resample_indices(&reciprocal, cfg.n_particles, rng)?;
                particles = idx.iter().map(|i| clone_particle(&particles[*i])).collect();
                // w_k <- K / sum(1/w)
                let reset = -(log_mean_exp(&reciprocal)?);
                weights.fill(reset);
            }
        }
    }
    LogWeight::new(log_harmonic_mean_exp(&weights)?)
}
