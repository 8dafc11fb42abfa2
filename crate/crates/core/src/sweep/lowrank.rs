//! Low-rank sweeps: each factor resampled as a block from its tempered
//! matrix-Gaussian conditional. Rows of U (and columns of V) are independent
//! given the other factor and share one precision matrix.

use super::SweepMutation;
use crate::dist::PrecisionFactor;
use crate::error::Result;
use crate::model::{Dataset, LowRankSpec};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

/// Shared precision of every U row conditional: I/u_var + (beta/noise) V V^T.
pub(crate) fn u_block_factor(
    spec: &LowRankSpec,
    v: &DMatrix<f64>,
    beta: f64,
    eff_noise: f64,
) -> Result<PrecisionFactor> {
    let mut prec = DMatrix::identity(spec.k, spec.k) / spec.u_var;
    if beta > 0.0 {
        prec += v * v.transpose() * (beta / eff_noise);
    }
    PrecisionFactor::new(prec)
}

pub(crate) fn u_row_rhs(
    spec: &LowRankSpec,
    v: &DMatrix<f64>,
    data: &Dataset,
    row: usize,
    beta: f64,
    eff_noise: f64,
) -> DVector<f64> {
    if beta == 0.0 {
        return DVector::zeros(spec.k);
    }
    let y_row = data.y.row(row).transpose();
    v * y_row * (beta / eff_noise)
}

/// Shared precision of every V column conditional over the first `n_rows`
/// rows of U: I/v_var + (beta/noise) U^T U.
pub(crate) fn v_block_factor(
    spec: &LowRankSpec,
    u: &DMatrix<f64>,
    n_rows: usize,
    beta: f64,
) -> Result<PrecisionFactor> {
    let mut prec = DMatrix::identity(spec.k, spec.k) / spec.v_var;
    if beta > 0.0 && n_rows > 0 {
        let u_prefix = u.rows(0, n_rows);
        prec += u_prefix.transpose() * u_prefix * (beta / spec.noise_var);
    }
    PrecisionFactor::new(prec)
}

pub(crate) fn v_col_rhs(
    spec: &LowRankSpec,
    u: &DMatrix<f64>,
    data: &Dataset,
    n_rows: usize,
    col: usize,
    beta: f64,
) -> DVector<f64> {
    let mut rhs = DVector::zeros(spec.k);
    if beta == 0.0 {
        return rhs;
    }
    for i in 0..n_rows {
        let yij = data.y[(i, col)];
        for k in 0..spec.k {
            rhs[k] += u[(i, k)] * yij;
        }
    }
    rhs * (beta / spec.noise_var)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_prefix(
    spec: &LowRankSpec,
    u: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    data: &Dataset,
    beta: f64,
    n_rows: usize,
    mutation: SweepMutation,
    reverse: bool,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let eff_noise = spec.noise_var * mutation.noise_factor();

    let update_u = |u: &mut DMatrix<f64>, v: &DMatrix<f64>, rng: &mut ChaCha8Rng, rev: bool| -> Result<()> {
        let factor = u_block_factor(spec, v, beta, eff_noise)?;
        let order: Vec<usize> = if rev { (0..n_rows).rev().collect() } else { (0..n_rows).collect() };
        for i in order {
            let rhs = u_row_rhs(spec, v, data, i, beta, eff_noise);
            let mean = factor.mean_from_rhs(&rhs);
            let draw = factor.sample(&mean, rng);
            u.row_mut(i).copy_from(&draw.transpose());
        }
        Ok(())
    };

    let update_v = |u: &DMatrix<f64>, v: &mut DMatrix<f64>, rng: &mut ChaCha8Rng, rev: bool| -> Result<()> {
        let factor = v_block_factor(spec, u, n_rows, beta)?;
        let order: Vec<usize> = if rev { (0..spec.d).rev().collect() } else { (0..spec.d).collect() };
        for j in order {
            let rhs = v_col_rhs(spec, u, data, n_rows, j, beta);
            let mean = factor.mean_from_rhs(&rhs);
            let draw = factor.sample(&mean, rng);
            v.column_mut(j).copy_from(&draw);
        }
        Ok(())
    };

    if reverse {
        update_v(u, v, rng, true)?;
        update_u(u, v, rng, true)?;
    } else {
        update_u(u, v, rng, false)?;
        update_v(u, v, rng, false)?;
    }
    Ok(())
}

pub(crate) fn reverse_transition_logprob(
    spec: &LowRankSpec,
    from_u: &DMatrix<f64>,
    to_u: &DMatrix<f64>,
    to_v: &DMatrix<f64>,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    // Reversed scan: V block first, conditioned on the incoming U.
    let fv = v_block_factor(spec, from_u, spec.n, beta)?;
    for j in 0..spec.d {
        let rhs = v_col_rhs(spec, from_u, data, spec.n, j, beta);
        let mean = fv.mean_from_rhs(&rhs);
        total += fv.log_density(&mean, &to_v.column(j).into_owned());
    }
    // Then the U block, conditioned on the updated V.
    let fu = u_block_factor(spec, to_v, beta, spec.noise_var)?;
    for i in 0..spec.n {
        let rhs = u_row_rhs(spec, to_v, data, i, beta, spec.noise_var);
        let mean = fu.mean_from_rhs(&rhs);
        total += fu.log_density(&mean, &to_u.row(i).transpose());
    }
    Ok(total)
}

pub(crate) fn transition_logprob(
    spec: &LowRankSpec,
    from_v: &DMatrix<f64>,
    to_u: &DMatrix<f64>,
    to_v: &DMatrix<f64>,
    data: &Dataset,
    beta: f64,
) -> Result<f64> {
    let mut total = 0.0;
    // U block conditions on the incoming V.
    let fu = u_block_factor(spec, from_v, beta, spec.noise_var)?;
    for i in 0..spec.n {
        let rhs = u_row_rhs(spec, from_v, data, i, beta, spec.noise_var);
        let mean = fu.mean_from_rhs(&rhs);
        total += fu.log_density(&mean, &to_u.row(i).transpose());
    }
    // V block conditions on the fully-updated U.
    let fv = v_block_factor(spec, to_u, spec.n, beta)?;
    for j in 0..spec.d {
        let rhs = v_col_rhs(spec, to_u, data, spec.n, j, beta);
        let mean = fv.mean_from_rhs(&rhs);
        total += fv.log_density(&mean, &to_v.column(j).into_owned());
    }
    Ok(total)
}
