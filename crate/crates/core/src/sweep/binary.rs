//! Binary attribute sweeps: each z entry resampled from its tempered
//! Bernoulli conditional, then each feature row as a block. A running mean
//! matrix Z*A is maintained through the scan.

use super::SweepMutation;
use crate::error::Result;
use crate::model::{BinarySpec, Dataset};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Log-odds of z[row, k] = 1 given everything else. `mean_minus_k` holds the
/// row mean with attribute k's contribution removed.
pub(crate) fn attr_logodds(
    spec: &BinarySpec,
    a: &DMatrix<f64>,
    data: &Dataset,
    row: usize,
    k: usize,
    mean_minus_k: &[f64],
    beta: f64,
    eff_noise: f64,
) -> f64 {
    let p = spec.attr_probs[k];
    let mut logodds = (p / (1.0 - p)).ln();
    if beta > 0.0 {
        let mut delta = 0.0;
        for j in 0..spec.d {
            let r0 = data.y[(row, j)] - mean_minus_k[j];
            let r1 = r0 - a[(k, j)];
            delta += r0 * r0 - r1 * r1;
        }
        logodds += beta * delta / (2.0 * eff_noise);
    }
    logodds
}

/// Tempered Gaussian conditional of feature row k given Z and the other rows:
/// independent per column with a shared variance. `residual_sums[j]` must
/// hold sum_i z[i,k] * (y[i,j] - mean_without_k[i,j]) over the prefix.
pub(crate) fn feature_row_conditional(
    spec: &BinarySpec,
    on_count: f64,
    residual_sums: &[f64],
    beta: f64,
) -> (Vec<f64>, f64) {
    let precision = 1.0 / spec.a_var + beta * on_count / spec.noise_var;
    let var = 1.0 / precision;
    let means = residual_sums
        .iter()
        .map(|s| beta * s / spec.noise_var * var)
        .collect();
    (means, var)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_prefix(
    spec: &BinarySpec,
    z: &mut DMatrix<f64>,
    a: &mut DMatrix<f64>,
    data: &Dataset,
    beta: f64,
    n_rows: usize,
    mutation: SweepMutation,
    reverse: bool,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let eff_noise = spec.noise_var * mutation.noise_factor();
    // Running mean of the prefix under the current state.
    let mut means = z.rows(0, n_rows) * &*a;
    let mut mean_minus = vec![0.0; spec.d];

    let mut update_z = |z: &mut DMatrix<f64>,
                        a: &DMatrix<f64>,
                        means: &mut DMatrix<f64>,
                        rng: &mut ChaCha8Rng,
                        rev: bool| {
        let rows: Vec<usize> = if rev { (0..n_rows).rev().collect() } else { (0..n_rows).collect() };
        for i in rows {
            let cols: Vec<usize> = if rev { (0..spec.k).rev().collect() } else { (0..spec.k).collect() };
            for k in cols {
                let cur = z[(i, k)];
                for j in 0..spec.d {
                    mean_minus[j] = means[(i, j)] - cur * a[(k, j)];
                }
                let logodds = attr_logodds(spec, a, data, i, k, &mean_minus, beta, eff_noise);
                let p1 = 1.0 / (1.0 + (-logodds).exp());
                let new = if rng.random::<f64>() < p1 { 1.0 } else { 0.0 };
                if new != cur {
                    z[(i, k)] = new;
                    let sign = new - cur;
                    for j in 0..spec.d {
                        means[(i, j)] += sign * a[(k, j)];
                    }
                }
            }
        }
    };

    let update_a = |z: &DMatrix<f64>,
                    a: &mut DMatrix<f64>,
                    means: &mut DMatrix<f64>,
                    rng: &mut ChaCha8Rng,
                    rev: bool| {
        let rows: Vec<usize> = if rev { (0..spec.k).rev().collect() } else { (0..spec.k).collect() };
        for k in rows {
            let mut on_count = 0.0;
            let mut residual_sums = vec![0.0; spec.d];
            for i in 0..n_rows {
                if z[(i, k)] == 1.0 {
                    on_count += 1.0;
                    for j in 0..spec.d {
                        residual_sums[j] += data.y[(i, j)] - means[(i, j)] + a[(k, j)];
                    }
                }
            }
            let (cond_means, var) = feature_row_conditional(spec, on_count, &residual_sums, beta);
            let sd = var.sqrt();
            for j in 0..spec.d {
                let new = cond_means[j] + sd * rng.sample::<f64, _>(StandardNormal);
                let delta = new - a[(k, j)];
                a[(k, j)] = new;
                if delta != 0.0 {
                    for i in 0..n_rows {
                        if z[(i, k)] == 1.0 {
                            means[(i, j)] += delta;
                        }
                    }
                }
            }
        }
    };

    if reverse {
        update_a(z, a, &mut means, rng, true);
        update_z(z, a, &mut means, rng, true);
    } else {
        update_z(z, a, &mut means, rng, false);
        update_a(z, a, &mut means, rng, false);
    }
    Ok(())
}

pub(crate) fn reverse_transition_logprob(
    spec: &BinarySpec,
    from_z: &DMatrix<f64>,
    from_a: &DMatrix<f64>,
    to_z: &DMatrix<f64>,
    to_a: &DMatrix<f64>,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    // Reversed scan: feature rows first (descending), conditioned on the
    // incoming Z and the mixed A.
    let mut a = from_a.clone();
    let mut means = from_z * &a;
    for k in (0..spec.k).rev() {
        let mut on_count = 0.0;
        let mut residual_sums = vec![0.0; spec.d];
        for i in 0..spec.n {
            if from_z[(i, k)] == 1.0 {
                on_count += 1.0;
                for j in 0..spec.d {
                    residual_sums[j] += data.y[(i, j)] - means[(i, j)] + a[(k, j)];
                }
            }
        }
        let (cond_means, var) = feature_row_conditional(spec, on_count, &residual_sums, beta);
        for j in 0..spec.d {
            total += crate::dist::gaussian_log_density(to_a[(k, j)], cond_means[j], var);
            let delta = to_a[(k, j)] - a[(k, j)];
            a[(k, j)] = to_a[(k, j)];
            if delta != 0.0 {
                for i in 0..spec.n {
                    if from_z[(i, k)] == 1.0 {
                        means[(i, j)] += delta;
                    }
                }
            }
        }
    }
    // Then z sites in descending order, conditioned on the updated A and the
    // mixed Z.
    let mut z = from_z.clone();
    let mut means = &z * to_a;
    let mut mean_minus = vec![0.0; spec.d];
    for i in (0..spec.n).rev() {
        for k in (0..spec.k).rev() {
            let cur = z[(i, k)];
            for j in 0..spec.d {
                mean_minus[j] = means[(i, j)] - cur * to_a[(k, j)];
            }
            let logodds = attr_logodds(spec, to_a, data, i, k, &mean_minus, beta, spec.noise_var);
            let target = to_z[(i, k)];
            total += if target == 1.0 {
                -(1.0 + (-logodds).exp()).ln()
            } else {
                -(1.0 + logodds.exp()).ln()
            };
            if target != cur {
                z[(i, k)] = target;
                let sign = target - cur;
                for j in 0..spec.d {
                    means[(i, j)] += sign * to_a[(k, j)];
                }
            }
        }
    }
    Ok(total)
}

pub(crate) fn transition_logprob(
    spec: &BinarySpec,
    from_z: &DMatrix<f64>,
    from_a: &DMatrix<f64>,
    to_z: &DMatrix<f64>,
    to_a: &DMatrix<f64>,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    // z sites in scan order against the mixed state (scanned sites at `to`).
    let mut z = from_z.clone();
    let mut means = &z * from_a;
    let mut mean_minus = vec![0.0; spec.d];
    for i in 0..spec.n {
        for k in 0..spec.k {
            let cur = z[(i, k)];
            for j in 0..spec.d {
                mean_minus[j] = means[(i, j)] - cur * from_a[(k, j)];
            }
            let logodds = attr_logodds(spec, from_a, data, i, k, &mean_minus, beta, spec.noise_var);
            // log sigmoid(logodds) for 1, log sigmoid(-logodds) for 0
            let target = to_z[(i, k)];
            let lp = if target == 1.0 {
                -(1.0 + (-logodds).exp()).ln()
            } else {
                -(1.0 + logodds.exp()).ln()
            };
            total += lp;
            if target != cur {
                z[(i, k)] = target;
                let sign = target - cur;
                for j in 0..spec.d {
                    means[(i, j)] += sign * from_a[(k, j)];
                }
            }
        }
    }
    // feature rows in scan order against the mixed A (rows < k at `to`).
    let mut a = from_a.clone();
    let mut means = &z * &a;
    for k in 0..spec.k {
        let mut on_count = 0.0;
        let mut residual_sums = vec![0.0; spec.d];
        for i in 0..spec.n {
            if z[(i, k)] == 1.0 {
                on_count += 1.0;
                for j in 0..spec.d {
                    residual_sums[j] += data.y[(i, j)] - means[(i, j)] + a[(k, j)];
                }
            }
        }
        let (cond_means, var) = feature_row_conditional(spec, on_count, &residual_sums, beta);
        for j in 0..spec.d {
            total += crate::dist::gaussian_log_density(to_a[(k, j)], cond_means[j], var);
            let delta = to_a[(k, j)] - a[(k, j)];
            a[(k, j)] = to_a[(k, j)];
            if delta != 0.0 {
                for i in 0..spec.n {
                    if z[(i, k)] == 1.0 {
                        means[(i, j)] += delta;
                    }
                }
            }
        }
    }
    Ok(total)
}
