//! Clustering model internals: prior draws, joint terms, and the collapsed
//! conjugate bookkeeping (per-cluster counts and sums) behind predictive
//! likelihoods and Rao-Blackwellized sweeps.

use super::{ClusteringSpec, Dataset, LatentState};
use crate::dist::{gaussian_log_density, Categorical, LN_2PI};
use crate::error::Result;
use crate::logsum::log_sum_exp;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn prior_draw(spec: &ClusteringSpec, rng: &mut ChaCha8Rng) -> LatentState {
    let cat = Categorical::new(spec.mix_probs.clone()).expect("spec validated");
    let assignments: Vec<usize> = (0..spec.n).map(|_| cat.sample(rng)).collect();
    let sd = spec.between_var.sqrt();
    let centers = DMatrix::from_fn(spec.k, spec.d, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    LatentState::Clustering {
        assignments,
        centers,
    }
}

pub fn log_prior(spec: &ClusteringSpec, assignments: &[usize], centers: &DMatrix<f64>) -> f64 {
    let z_term: f64 = assignments.iter().map(|z| spec.mix_probs[*z].ln()).sum();
    let theta_term: f64 = centers
        .iter()
        .map(|t| gaussian_log_density(*t, 0.0, spec.between_var))
        .sum();
    z_term + theta_term
}

/// Per-cluster sufficient statistics for the collapsed center posterior.
#[derive(Clone, Debug)]
pub struct ClusterStats {
    pub counts: Vec<usize>,
    pub sums: DMatrix<f64>,
}

impl ClusterStats {
    pub fn empty(k: usize, d: usize) -> Self {
        ClusterStats {
            counts: vec![0; k],
            sums: DMatrix::zeros(k, d),
        }
    }

    /// Statistics of the first `n_rows` points under the given assignments.
    pub fn from_assignments(
        k: usize,
        d: usize,
        assignments: &[usize],
        data: &Dataset,
        n_rows: usize,
    ) -> Self {
        let mut stats = ClusterStats::empty(k, d);
        for i in 0..n_rows {
            stats.add(assignments[i], data, i);
        }
        stats
    }

    pub fn add(&mut self, cluster: usize, data: &Dataset, row: usize) {
        self.counts[cluster] += 1;
        for j in 0..self.sums.ncols() {
            self.sums[(cluster, j)] += data.y[(row, j)];
        }
    }

    pub fn remove(&mut self, cluster: usize, data: &Dataset, row: usize) {
        debug_assert!(self.counts[cluster] > 0);
        self.counts[cluster] -= 1;
        for j in 0..self.sums.ncols() {
            self.sums[(cluster, j)] -= data.y[(row, j)];
        }
    }

    /// Posterior over the cluster center given its members: per-coordinate
    /// mean and the variance shared across coordinates.
    pub fn center_posterior(&self, spec: &ClusteringSpec, cluster: usize) -> (DVector<f64>, f64) {
        let precision = 1.0 / spec.between_var + self.counts[cluster] as f64 / spec.noise_var;
        let var = 1.0 / precision;
        let mean = DVector::from_iterator(
            spec.d,
            (0..spec.d).map(|j| self.sums[(cluster, j)] / spec.noise_var * var),
        );
        (mean, var)
    }

    /// log p(y_row | members of `cluster`) with the center integrated out.
    pub fn predictive_logdens(&self, spec: &ClusteringSpec, cluster: usize, y_row: &[f64]) -> f64 {
        let (mean, var) = self.center_posterior(spec, cluster);
        let pred_var = var + spec.noise_var;
        let norm = -0.5 * (LN_2PI + pred_var.ln());
        let mut total = 0.0;
        for j in 0..spec.d {
            let r = y_row[j] - mean[j];
            total += norm - 0.5 * r * r / pred_var;
        }
        total
    }
}

/// log p(y_row | z_{0..row}, y_{0..row}) with centers collapsed and the new
/// assignment summed out.
pub fn predictive_loglik(
    spec: &ClusteringSpec,
    assignments: &[usize],
    data: &Dataset,
    row: usize,
) -> Result<f64> {
    let stats = ClusterStats::from_assignments(spec.k, spec.d, assignments, data, row);
    let y_row: Vec<f64> = (0..spec.d).map(|j| data.y[(row, j)]).collect();
    predictive_from_stats(spec, &stats, &y_row)
}

pub fn predictive_from_stats(
    spec: &ClusteringSpec,
    stats: &ClusterStats,
    y_row: &[f64],
) -> Result<f64> {
    let terms: Vec<f64> = (0..spec.k)
        .map(|k| spec.mix_probs[k].ln() + stats.predictive_logdens(spec, k, y_row))
        .collect();
    log_sum_exp(&terms)
}

/// Collapsed log p(z, y): assignment prior plus the per-cluster marginal of
/// the member points with centers integrated out. Built sequentially from the
/// chain of collapsed predictives.
pub fn collapsed_log_joint(
    spec: &ClusteringSpec,
    assignments: &[usize],
    data: &Dataset,
    n_rows: usize,
) -> f64 {
    let mut stats = ClusterStats::empty(spec.k, spec.d);
    let mut total = 0.0;
    for i in 0..n_rows {
        let zi = assignments[i];
        let y_row: Vec<f64> = (0..spec.d).map(|j| data.y[(i, j)]).collect();
        total += spec.mix_probs[zi].ln() + stats.predictive_logdens(spec, zi, &y_row);
        stats.add(zi, data, i);
    }
    total
}
