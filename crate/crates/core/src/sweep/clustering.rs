//! Clustering sweeps. Tempered sweeps keep the centers explicit; the
//! collapsed assignment scan (centers integrated out) is posterior-only and
//! drives the Rao-Blackwellized sequential estimators.

use super::SweepMutation;
use crate::dist::{gaussian_log_density, sample_from_logits};
use crate::error::Result;
use crate::logsum::log_sum_exp;
use crate::model::clustering::ClusterStats;
use crate::model::{ClusteringSpec, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Unnormalized log conditional of one assignment given explicit centers.
pub(crate) fn assignment_logits(
    spec: &ClusteringSpec,
    centers: &DMatrix<f64>,
    data: &Dataset,
    row: usize,
    beta: f64,
    eff_noise: f64,
) -> Vec<f64> {
    (0..spec.k)
        .map(|k| {
            let mut l = spec.mix_probs[k].ln();
            if beta > 0.0 {
                let mut ll = 0.0;
                for j in 0..spec.d {
                    ll += gaussian_log_density(data.y[(row, j)], centers[(k, j)], eff_noise);
                }
                l += beta * ll;
            }
            l
        })
        .collect()
}

/// Tempered Gaussian conditional of one center block: per-coordinate mean and
/// the shared variance. A likelihood tempered by beta is a Gaussian with
/// variance noise_var / beta, so conjugacy survives tempering.
pub(crate) fn center_conditional(
    spec: &ClusteringSpec,
    counts: &[usize],
    sums: &DMatrix<f64>,
    k: usize,
    beta: f64,
    eff_noise: f64,
) -> (DVector<f64>, f64) {
    let precision = 1.0 / spec.between_var + beta * counts[k] as f64 / eff_noise;
    let var = 1.0 / precision;
    let mean = DVector::from_iterator(
        spec.d,
        (0..spec.d).map(|j| beta * sums[(k, j)] / eff_noise * var),
    );
    (mean, var)
}

fn prefix_counts_sums(
    spec: &ClusteringSpec,
    assignments: &[usize],
    data: &Dataset,
    n_rows: usize,
) -> (Vec<usize>, DMatrix<f64>) {
    let mut counts = vec![0usize; spec.k];
    let mut sums = DMatrix::zeros(spec.k, spec.d);
    for i in 0..n_rows {
        counts[assignments[i]] += 1;
        for j in 0..spec.d {
            sums[(assignments[i], j)] += data.y[(i, j)];
        }
    }
    (counts, sums)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_prefix(
    spec: &ClusteringSpec,
    assignments: &mut [usize],
    centers: &mut DMatrix<f64>,
    data: &Dataset,
    beta: f64,
    n_rows: usize,
    mutation: SweepMutation,
    reverse: bool,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let eff_noise = spec.noise_var * mutation.noise_factor();

    let update_assignments = |assignments: &mut [usize],
                              centers: &DMatrix<f64>,
                              rng: &mut ChaCha8Rng,
                              reverse: bool|
     -> Result<()> {
        let order: Vec<usize> = if reverse {
            (0..n_rows).rev().collect()
        } else {
            (0..n_rows).collect()
        };
        for i in order {
            let logits = assignment_logits(spec, centers, data, i, beta, eff_noise);
            assignments[i] = sample_from_logits(&logits, rng)?;
        }
        Ok(())
    };

    let update_centers = |assignments: &[usize],
                          centers: &mut DMatrix<f64>,
                          rng: &mut ChaCha8Rng,
                          reverse: bool| {
        let (counts, sums) = prefix_counts_sums(spec, assignments, data, n_rows);
        let order: Vec<usize> = if reverse {
            (0..spec.k).rev().collect()
        } else {
            (0..spec.k).collect()
        };
        for k in order {
            let (mean, var) = center_conditional(spec, &counts, &sums, k, beta, spec.noise_var);
            let sd = var.sqrt();
            for j in 0..spec.d {
                centers[(k, j)] = mean[j] + sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    };

    if reverse {
        update_centers(assignments, centers, rng, true);
        update_assignments(assignments, centers, rng, true)?;
    } else {
        update_assignments(assignments, centers, rng, false)?;
        update_centers(assignments, centers, rng, false);
    }
    Ok(())
}

pub(crate) fn transition_logprob(
    spec: &ClusteringSpec,
    _from_assignments: &[usize],
    from_centers: &DMatrix<f64>,
    to_assignments: &[usize],
    to_centers: &DMatrix<f64>,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    // Assignment sites condition on the incoming centers; assignments are
    // mutually independent given the centers, so the mixed state is just
    // (from centers).
    for i in 0..spec.n {
        let logits = assignment_logits(spec, from_centers, data, i, beta, spec.noise_var);
        let norm = log_sum_exp(&logits)?;
        total += logits[to_assignments[i]] - norm;
    }
    // Center blocks condition on the fully-updated assignments.
    let (counts, sums) = prefix_counts_sums(spec, to_assignments, data, spec.n);
    for k in 0..spec.k {
        let (mean, var) = center_conditional(spec, &counts, &sums, k, beta, spec.noise_var);
        for j in 0..spec.d {
            total += gaussian_log_density(to_centers[(k, j)], mean[j], var);
        }
    }
    Ok(total)
}

pub(crate) fn reverse_transition_logprob(
    spec: &ClusteringSpec,
    from_assignments: &[usize],
    _from_centers: &DMatrix<f64>,
    to_assignments: &[usize],
    to_centers: &DMatrix<f64>,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    // Reversed scan: center blocks first, conditioned on the incoming assignments.
    let (counts, sums) = prefix_counts_sums(spec, from_assignments, data, spec.n);
    for k in 0..spec.k {
        let (mean, var) = center_conditional(spec, &counts, &sums, k, beta, spec.noise_var);
        for j in 0..spec.d {
            total += gaussian_log_density(to_centers[(k, j)], mean[j], var);
        }
    }
    // Then assignment sites, conditioned on the updated centers.
    for i in 0..spec.n {
        let logits = assignment_logits(spec, to_centers, data, i, beta, spec.noise_var);
        let norm = log_sum_exp(&logits)?;
        total += logits[to_assignments[i]] - norm;
    }
    Ok(total)
}

/// A chain over assignments only, with centers integrated out. Used by the
/// Rao-Blackwellized sequential estimators on the clustering model.
#[derive(Clone, Debug)]
pub struct CollapsedChain {
    pub assignments: Vec<usize>,
    pub stats: ClusterStats,
}

impl CollapsedChain {
    pub fn new(spec: &ClusteringSpec, assignments: Vec<usize>, data: &Dataset, n_rows: usize) -> Self {
        let stats = ClusterStats::from_assignments(spec.k, spec.d, &assignments, data, n_rows);
        CollapsedChain { assignments, stats }
    }
}

/// One collapsed Gibbs scan over the first `n_rows` assignments, targeting
/// p(z | y) with centers integrated out.
pub fn collapsed_assignment_sweep(
    spec: &ClusteringSpec,
    chain: &mut CollapsedChain,
    data: &Dataset,
    n_rows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut y_row = vec![0.0; spec.d];
    for i in 0..n_rows {
        chain.stats.remove(chain.assignments[i], data, i);
        for j in 0..spec.d {
            y_row[j] = data.y[(i, j)];
        }
        let logits: Vec<f64> = (0..spec.k)
            .map(|k| spec.mix_probs[k].ln() + chain.stats.predictive_logdens(spec, k, &y_row))
            .collect();
        let zi = sample_from_logits(&logits, rng)?;
        chain.assignments[i] = zi;
        chain.stats.add(zi, data, i);
    }
    Ok(())
}

/// Density of one collapsed scan from `from` to `to` over the first `n_rows`
/// sites: each site's conditional is evaluated against the mixed state
/// (already-scanned sites at `to`, pending sites at `from`).
pub fn collapsed_scan_logprob(
    spec: &ClusteringSpec,
    from: &[usize],
    to: &[usize],
    data: &Dataset,
    n_rows: usize,
) -> Result<f64> {
    let mut working = CollapsedChain::new(spec, from.to_vec(), data, n_rows);
    let mut y_row = vec![0.0; spec.d];
    let mut total = 0.0;
    for i in 0..n_rows {
        working.stats.remove(working.assignments[i], data, i);
        for j in 0..spec.d {
            y_row[j] = data.y[(i, j)];
        }
        let logits: Vec<f64> = (0..spec.k)
            .map(|k| spec.mix_probs[k].ln() + working.stats.predictive_logdens(spec, k, &y_row))
            .collect();
        let norm = log_sum_exp(&logits)?;
        total += logits[to[i]] - norm;
        working.assignments[i] = to[i];
        working.stats.add(to[i], data, i);
    }
    Ok(total)
}
