//! Brute-force log marginal likelihood on tiny instances: exact enumeration
//! of discrete latents with conjugate parameters integrated analytically, and
//! deterministic adaptive quadrature for the low-rank model.
//!
//! These routes are deliberately independent of the sequential predictive
//! machinery so the two can cross-check each other.

use super::{BinarySpec, ClusteringSpec, Dataset, LowRankSpec, ModelSpec};
use crate::dist::{gaussian_log_density, LN_2PI};
use crate::error::{Error, Result};
use crate::logsum::log_sum_exp;
use nalgebra::DMatrix;

pub fn brute_force_log_ml(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    if data.n() != spec.n() || data.d() != spec.d() {
        return Err(Error::ShapeMismatch(format!(
            "dataset is {}x{}, spec wants {}x{}",
            data.n(),
            data.d(),
            spec.n(),
            spec.d()
        )));
    }
    if spec.n() == 0 {
        return Ok(0.0);
    }
    match spec {
        ModelSpec::Clustering(s) => clustering_log_ml(s, data),
        ModelSpec::Binary(s) => binary_log_ml(s, data),
        ModelSpec::LowRank(s) => lowrank_log_ml(s, data),
    }
}

/// Exact sum over all K^N assignments with centers integrated out via the
/// closed-form marginal of each cluster's members.
fn clustering_log_ml(spec: &ClusteringSpec, data: &Dataset) -> Result<f64> {
    let configs = (spec.k as u64)
        .checked_pow(spec.n as u32)
        .filter(|c| *c <= 1_000_000)
        .ok_or_else(|| {
            Error::EnumerationTooLarge(format!(
                "clustering brute force needs K^N <= 1e6, got {}^{}",
                spec.k, spec.n
            ))
        })?;
    let mut terms = Vec::with_capacity(configs as usize);
    let mut assignment = vec![0usize; spec.n];
    loop {
        terms.push(collapsed_assignment_marginal(spec, &assignment, data));
        // odometer increment over K^N assignments
        let mut pos = 0;
        loop {
            if pos == spec.n {
                return log_sum_exp(&terms);
            }
            assignment[pos] += 1;
            if assignment[pos] < spec.k {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

/// log p(z) + log p(y | z) with centers collapsed, using the determinant form
/// of the cluster marginal: cov = noise_var I + between_var 11^T.
pub fn collapsed_assignment_marginal(
    spec: &ClusteringSpec,
    assignment: &[usize],
    data: &Dataset,
) -> f64 {
    let mut total: f64 = assignment.iter().map(|z| spec.mix_probs[*z].ln()).sum();
    for k in 0..spec.k {
        let members: Vec<usize> = (0..spec.n).filter(|i| assignment[*i] == k).collect();
        let m = members.len();
        if m == 0 {
            continue;
        }
        let mf = m as f64;
        let denom = spec.noise_var + mf * spec.between_var;
        let log_det = (mf - 1.0) * spec.noise_var.ln() + denom.ln();
        for j in 0..spec.d {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for &i in &members {
                sum += data.y[(i, j)];
                sum_sq += data.y[(i, j)] * data.y[(i, j)];
            }
            let quad = (sum_sq - spec.between_var * sum * sum / denom) / spec.noise_var;
            total += -0.5 * mf * LN_2PI - 0.5 * log_det - 0.5 * quad;
        }
    }
    total
}

/// Exact sum over all 2^(NK) binary matrices with the feature matrix
/// integrated out column-wise: cov = a_var Z Z^T + noise_var I.
fn binary_log_ml(spec: &BinarySpec, data: &Dataset) -> Result<f64> {
    let bits = spec.n * spec.k;
    if bits > 63 || (1u64 << bits) > 1_000_000 {
        return Err(Error::EnumerationTooLarge(format!(
            "binary brute force needs 2^(NK) <= 1e6, got 2^{bits}"
        )));
    }
    let mut terms = Vec::with_capacity(1usize << bits);
    for mask in 0u64..(1u64 << bits) {
        let mut prior = 0.0;
        let mut z = DMatrix::zeros(spec.n, spec.k);
        for i in 0..spec.n {
            for k in 0..spec.k {
                let on = mask >> (i * spec.k + k) & 1 == 1;
                let p = spec.attr_probs[k];
                prior += if on { p.ln() } else { (1.0 - p).ln() };
                z[(i, k)] = if on { 1.0 } else { 0.0 };
            }
        }
        let mut cov = &z * z.transpose() * spec.a_var;
        for i in 0..spec.n {
            cov[(i, i)] += spec.noise_var;
        }
        let chol = nalgebra::Cholesky::new(cov).expect("positive definite");
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let mut lik = (spec.d as f64) * (-0.5 * (spec.n as f64) * LN_2PI - 0.5 * log_det);
        for j in 0..spec.d {
            let col = data.y.column(j).into_owned();
            let solved = chol.solve(&col);
            lik -= 0.5 * col.dot(&solved);
        }
        terms.push(prior + lik);
    }
    log_sum_exp(&terms)
}

/// Deterministic nested adaptive quadrature over the (N+D)-dimensional (U, V)
/// space, K = 1 only. Every dimension is integrated numerically; given a
/// fixed V the U rows factorize, so the nesting is D outer levels over V with
/// N independent one-dimensional U integrals at the core.
fn lowrank_log_ml(spec: &LowRankSpec, data: &Dataset) -> Result<f64> {
    if spec.k != 1 || spec.n + spec.d > 4 {
        return Err(Error::EnumerationTooLarge(format!(
            "low-rank quadrature needs K = 1 and N + D <= 4, got K = {}, N + D = {}",
            spec.k,
            spec.n + spec.d
        )));
    }
    let max_abs_y = data.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = 8.0 * spec.u_var.max(spec.v_var).sqrt() + 2.0 * max_abs_y;

    // log of prod_i  int N(u; 0, u_var) prod_j N(y_ij; u v_j, noise) du,
    // each factor a one-dimensional quadrature
    let log_u_factors = |v: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..spec.n {
            let row_log = |u: f64| -> f64 {
                let mut lf = gaussian_log_density(u, 0.0, spec.u_var);
                for (j, vj) in v.iter().enumerate() {
                    lf += gaussian_log_density(data.y[(i, j)], u * vj, spec.noise_var);
                }
                lf
            };
            // center the shift on the row maximizer along a coarse scan
            let mut shift = f64::NEG_INFINITY;
            let scan = 33;
            for s in 0..=scan {
                let u = -bound + 2.0 * bound * s as f64 / scan as f64;
                shift = shift.max(row_log(u));
            }
            let f = |u: f64| (row_log(u) - shift).exp();
            let integral = adaptive_simpson(&f, -bound, bound, 1e-11);
            total += integral.ln() + shift;
        }
        total
    };

    let log_f_v = |v: &[f64]| -> f64 {
        let mut total = log_u_factors(v);
        for vj in v {
            total += gaussian_log_density(*vj, 0.0, spec.v_var);
        }
        total
    };

    // Coarse grid scan over V for the outer max shift.
    let grid = 9usize;
    let mut shift = f64::NEG_INFINITY;
    let mut point = vec![0.0; spec.d];
    let mut idx = vec![0usize; spec.d];
    loop {
        for (d, i) in idx.iter().enumerate() {
            point[d] = -bound + 2.0 * bound * (*i as f64) / (grid as f64 - 1.0);
        }
        shift = shift.max(log_f_v(&point));
        let mut pos = 0;
        loop {
            if pos == spec.d {
                break;
            }
            idx[pos] += 1;
            if idx[pos] < grid {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == spec.d {
            break;
        }
    }

    let tols: Vec<f64> = (0..spec.d).map(|lvl| 1e-8 * 0.1f64.powi(lvl as i32)).collect();
    let mut fixed = vec![0.0; spec.d];
    let integral = nested_integrate(&log_f_v, shift, -bound, bound, &tols, &mut fixed, 0, spec.d);
    Ok(integral.ln() + shift)
}

fn nested_integrate(
    log_f: &dyn Fn(&[f64]) -> f64,
    shift: f64,
    lo: f64,
    hi: f64,
    tols: &[f64],
    fixed: &mut Vec<f64>,
    level: usize,
    dims: usize,
) -> f64 {
    if level == dims {
        return (log_f(fixed) - shift).exp();
    }
    let f = |x: f64| -> f64 {
        let mut inner_fixed = fixed.clone();
        inner_fixed[level] = x;
        nested_integrate(log_f, shift, lo, hi, tols, &mut inner_fixed, level + 1, dims)
    };
    adaptive_simpson(&f, lo, hi, tols[level])
}

/// Recursive adaptive Simpson quadrature with absolute tolerance `eps`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(f, a, b, fa, fb, fc, whole, eps, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, c, fa, fc, fd, left, 0.5 * eps, depth - 1)
        + simpson_rec(f, c, b, fc, fb, fe, right, 0.5 * eps, depth - 1)
}
