//! Distributional checks of the transition operators on tiny instances:
//! exact tempered initialization (closed-form marginals in test code) plus a
//! single sweep per replica, compared against the enumerated law by
//! chi-square at significance 1e-3.

mod common;

use bdmc::model::{self, BinarySpec, ClusteringSpec, Dataset, LowRankSpec, ModelSpec};
use bdmc::sweep::{constrained_prior_step, gibbs_sweep, reverse_sweep};
use bdmc::RngStream;
use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

const REPLICAS: usize = 10_000;
const SIGNIFICANCE: f64 = 1e-3;

fn clustering_setup() -> (ClusteringSpec, ModelSpec, Dataset) {
    let spec = ClusteringSpec::new(3, 1, 2, vec![0.4, 0.6], 1.8, 0.5).unwrap();
    let model_spec = ModelSpec::Clustering(spec.clone());
    let (_, data) = model::simulate(&model_spec, &RngStream::new(100, 0));
    (spec, model_spec, data)
}

// matches the odometer order of all_assignments: z[0] is least significant
fn config_index(z: &[usize], k: usize) -> usize {
    z.iter().rev().fold(0, |acc, zi| acc * k + zi)
}

/// Draws an exact sample from the tempered clustering joint using only
/// test-side formulas.
fn exact_clustering_draw(
    spec: &ClusteringSpec,
    data: &Dataset,
    probs: &[f64],
    configs: &[Vec<usize>],
    beta: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> model::LatentState {
    let idx = draw_categorical(probs, rng.random());
    let z = configs[idx].clone();
    let mut centers = DMatrix::zeros(spec.k, spec.d);
    for k in 0..spec.k {
        let (mean, var) = clustering_tempered_center_cond(spec, &z, data, k, beta);
        for j in 0..spec.d {
            centers[(k, j)] = mean[j] + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        }
    }
    model::LatentState::Clustering { assignments: z, centers }
}

#[test]
fn clustering_sweep_preserves_tempered_law() {
    let (spec, model_spec, data) = clustering_setup();
    let configs = all_assignments(spec.k, spec.n);
    for (case, beta) in [(0usize, 0.0f64), (1, 0.5), (2, 1.0)] {
        let logmass: Vec<f64> = configs
            .iter()
            .map(|z| clustering_tempered_z_logmass(&spec, z, &data, beta))
            .collect();
        let probs = normalize_logmass(&logmass);
        let mut counts = vec![0usize; configs.len()];
        let mut rng = RngStream::new(200 + case as u64, 0).rng();
        for _ in 0..REPLICAS {
            let mut state = exact_clustering_draw(&spec, &data, &probs, &configs, beta, &mut rng);
            gibbs_sweep(&model_spec, &mut state, &data, beta, &mut rng).unwrap();
            if let model::LatentState::Clustering { assignments, .. } = &state {
                counts[config_index(assignments, spec.k)] += 1;
            }
        }
        let p = chi_square_gof(&counts, &probs);
        assert!(p > SIGNIFICANCE, "beta {beta}: chi-square p = {p}");
    }
}

#[test]
fn reverse_sweep_preserves_posterior() {
    let (spec, model_spec, data) = clustering_setup();
    let configs = all_assignments(spec.k, spec.n);
    let logmass: Vec<f64> = configs
        .iter()
        .map(|z| clustering_tempered_z_logmass(&spec, z, &data, 1.0))
        .collect();
    let probs = normalize_logmass(&logmass);
    let mut counts = vec![0usize; configs.len()];
    let mut rng = RngStream::new(300, 0).rng();
    for _ in 0..REPLICAS {
        let mut state = exact_clustering_draw(&spec, &data, &probs, &configs, 1.0, &mut rng);
        reverse_sweep(&model_spec, &mut state, &data, &mut rng).unwrap();
        if let model::LatentState::Clustering { assignments, .. } = &state {
            counts[config_index(assignments, spec.k)] += 1;
        }
    }
    let p = chi_square_gof(&counts, &probs);
    assert!(p > SIGNIFICANCE, "chi-square p = {p}");
}

#[test]
fn reverse_sweep_is_distributional_reverse_of_forward() {
    // (X, T(X)) must equal (T~(Y), Y) in distribution when X, Y are
    // stationary. Compared on the 8x8 table of assignment-configuration
    // pairs with a two-sample chi-square.
    let (spec, model_spec, data) = clustering_setup();
    let configs = all_assignments(spec.k, spec.n);
    let logmass: Vec<f64> = configs
        .iter()
        .map(|z| clustering_tempered_z_logmass(&spec, z, &data, 1.0))
        .collect();
    let probs = normalize_logmass(&logmass);
    let cells = configs.len() * configs.len();
    let mut counts_fwd = vec![0usize; cells];
    let mut counts_rev = vec![0usize; cells];
    let mut rng = RngStream::new(400, 0).rng();
    for _ in 0..REPLICAS {
        let start = exact_clustering_draw(&spec, &data, &probs, &configs, 1.0, &mut rng);
        let i0 = match &start {
            model::LatentState::Clustering { assignments, .. } => config_index(assignments, spec.k),
            _ => unreachable!(),
        };
        let mut state = start;
        gibbs_sweep(&model_spec, &mut state, &data, 1.0, &mut rng).unwrap();
        let i1 = match &state {
            model::LatentState::Clustering { assignments, .. } => config_index(assignments, spec.k),
            _ => unreachable!(),
        };
        counts_fwd[i0 * configs.len() + i1] += 1;
    }
    for _ in 0..REPLICAS {
        let start = exact_clustering_draw(&spec, &data, &probs, &configs, 1.0, &mut rng);
        let i1 = match &start {
            model::LatentState::Clustering { assignments, .. } => config_index(assignments, spec.k),
            _ => unreachable!(),
        };
        let mut state = start;
        reverse_sweep(&model_spec, &mut state, &data, &mut rng).unwrap();
        let i0 = match &state {
            model::LatentState::Clustering { assignments, .. } => config_index(assignments, spec.k),
            _ => unreachable!(),
        };
        counts_rev[i0 * configs.len() + i1] += 1;
    }
    let p = chi_square_two_sample(&counts_fwd, &counts_rev);
    assert!(p > SIGNIFICANCE, "pair-law chi-square p = {p}");
}

#[test]
fn binary_sweep_preserves_tempered_law() {
    let spec = BinarySpec::new(2, 1, 2, vec![0.35, 0.6], 1.3, 0.5).unwrap();
    let model_spec = ModelSpec::Binary(spec.clone());
    let (_, data) = model::simulate(&model_spec, &RngStream::new(500, 0));
    let n_configs = 1usize << (spec.n * spec.k);
    for (case, beta) in [(0usize, 0.0f64), (1, 0.5), (2, 1.0)] {
        let logmass: Vec<f64> = (0..n_configs as u64)
            .map(|mask| binary_tempered_z_logmass(&spec, mask, &data, beta))
            .collect();
        let probs = normalize_logmass(&logmass);
        let mut counts = vec![0usize; n_configs];
        let mut rng = RngStream::new(600 + case as u64, 0).rng();
        for _ in 0..REPLICAS {
            let mask = draw_categorical(&probs, rng.random()) as u64;
            let (means, chol) = binary_tempered_a_cond(&spec, mask, &data, beta);
            // draw A | Z: per column, mean + L^{-T} eps
            let mut a = DMatrix::zeros(spec.k, spec.d);
            for j in 0..spec.d {
                let eps = nalgebra::DVector::from_iterator(
                    spec.k,
                    (0..spec.k).map(|_| rng.sample::<f64, _>(StandardNormal)),
                );
                let w = chol
                    .l()
                    .transpose()
                    .solve_upper_triangular(&eps)
                    .expect("pd");
                for k in 0..spec.k {
                    a[(k, j)] = means[(k, j)] + w[k];
                }
            }
            let mut z = DMatrix::zeros(spec.n, spec.k);
            for i in 0..spec.n {
                for k in 0..spec.k {
                    z[(i, k)] = (mask >> (i * spec.k + k) & 1) as f64;
                }
            }
            let mut state = model::LatentState::Binary { z, a };
            gibbs_sweep(&model_spec, &mut state, &data, beta, &mut rng).unwrap();
            if let model::LatentState::Binary { z, .. } = &state {
                let mut out = 0u64;
                for i in 0..spec.n {
                    for k in 0..spec.k {
                        if z[(i, k)] == 1.0 {
                            out |= 1 << (i * spec.k + k);
                        }
                    }
                }
                counts[out as usize] += 1;
            }
        }
        let p = chi_square_gof(&counts, &probs);
        assert!(p > SIGNIFICANCE, "beta {beta}: chi-square p = {p}");
    }
}

#[test]
fn lowrank_sweep_preserves_tempered_law() {
    // Scalar instance: the tempered u-marginal has a closed form, so exact
    // initialization uses inverse-CDF sampling on a fine deterministic grid
    // and the sweep output is binned into equiprobable cells.
    let spec = LowRankSpec::new(1, 1, 1, 0.9, 1.4, 0.5).unwrap();
    let model_spec = ModelSpec::LowRank(spec.clone());
    let (_, data) = model::simulate(&model_spec, &RngStream::new(700, 0));
    let y = data.y[(0, 0)];

    for (case, beta) in [(0usize, 0.0f64), (1, 0.5), (2, 1.0)] {
        // log of the tempered u-marginal (v integrated analytically)
        let log_marginal = |u: f64| -> f64 {
            let a = 1.0 / spec.v_var + beta * u * u / spec.noise_var;
            let h = beta * u * y / spec.noise_var;
            gaussian_logpdf(u, 0.0, spec.u_var) - 0.5 * (spec.v_var * a).ln()
                - 0.5 * beta * (bdmc::dist::LN_2PI + spec.noise_var.ln())
                - 0.5 * beta * y * y / spec.noise_var
                + 0.5 * h * h / a
        };
        // grid CDF by the trapezoid rule
        let lim = 9.0 * spec.u_var.sqrt();
        let grid_n = 16_384usize;
        let xs: Vec<f64> = (0..=grid_n)
            .map(|i| -lim + 2.0 * lim * i as f64 / grid_n as f64)
            .collect();
        let dens: Vec<f64> = xs.iter().map(|x| log_marginal(*x).exp()).collect();
        let mut cdf = vec![0.0f64; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let total = *cdf.last().unwrap();
        let inv_cdf = |q: f64| -> f64 {
            let target = q * total;
            let idx = cdf.partition_point(|c| *c < target).min(xs.len() - 1).max(1);
            // linear interpolation inside the bracketing cell
            let (c0, c1) = (cdf[idx - 1], cdf[idx]);
            let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
            xs[idx - 1] + t * (xs[idx] - xs[idx - 1])
        };
        // 8 equiprobable bins
        let n_bins = 8usize;
        let edges: Vec<f64> = (1..n_bins).map(|b| inv_cdf(b as f64 / n_bins as f64)).collect();
        let probs = vec![1.0 / n_bins as f64; n_bins];
        let mut counts = vec![0usize; n_bins];
        let mut rng = RngStream::new(800 + case as u64, 0).rng();
        for _ in 0..REPLICAS {
            let u0 = inv_cdf(rng.random());
            // v | u exactly
            let a = 1.0 / spec.v_var + beta * u0 * u0 / spec.noise_var;
            let mean = beta * u0 * y / spec.noise_var / a;
            let v0 = mean + (1.0 / a).sqrt() * rng.sample::<f64, _>(StandardNormal);
            let mut state = model::LatentState::LowRank {
                u: DMatrix::from_element(1, 1, u0),
                v: DMatrix::from_element(1, 1, v0),
            };
            gibbs_sweep(&model_spec, &mut state, &data, beta, &mut rng).unwrap();
            let u1 = match &state {
                model::LatentState::LowRank { u, .. } => u[(0, 0)],
                _ => unreachable!(),
            };
            let bin = edges.partition_point(|e| *e < u1);
            counts[bin] += 1;
        }
        let p = chi_square_gof(&counts, &probs);
        assert!(p > SIGNIFICANCE, "beta {beta}: chi-square p = {p}");
    }
}

#[test]
fn constrained_step_occupancy_matches_constrained_prior() {
    // Binary scalar instance: the constrained prior is exactly computable
    // with normal CDFs. Exact constrained init, one constrained sweep per
    // replica, chi-square over (z, binned a) cells.
    let spec = BinarySpec::new(1, 1, 1, vec![0.45], 1.0, 0.3).unwrap();
    let model_spec = ModelSpec::Binary(spec.clone());
    let y = 1.2f64;
    let data = dataset(1, 1, &[y]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let pi = spec.attr_probs[0];

    // cutoff: feasible for z = 0, and a window (y - r, y + r) for z = 1
    let l_zero = gaussian_logpdf(y, 0.0, spec.noise_var);
    let cutoff = l_zero - 0.5;
    let r2 = -2.0 * spec.noise_var * (cutoff + 0.5 * (bdmc::dist::LN_2PI + spec.noise_var.ln()));
    assert!(r2 > 0.0);
    let r = r2.sqrt();
    let (lo, hi) = (y - r, y + r);
    let sd = spec.a_var.sqrt();
    let window = normal.cdf(hi / sd) - normal.cdf(lo / sd);
    let w0 = (1.0 - pi) * 1.0;
    let w1 = pi * window;
    let p1 = w1 / (w0 + w1);

    // cells: z = 0 with 4 quartile bins of N(0, a_var); z = 1 with 4
    // equiprobable bins of the truncated normal window
    let z0_edges: Vec<f64> = (1..4).map(|q| sd * normal.inverse_cdf(q as f64 / 4.0)).collect();
    let t_lo = normal.cdf(lo / sd);
    let z1_edges: Vec<f64> = (1..4)
        .map(|q| sd * normal.inverse_cdf(t_lo + window * q as f64 / 4.0))
        .collect();
    let mut probs = vec![(1.0 - p1) / 4.0; 4];
    probs.extend(vec![p1 / 4.0; 4]);
    let mut counts = vec![0usize; 8];

    let mut rng = RngStream::new(900, 0).rng();
    for _ in 0..REPLICAS {
        // exact constrained-prior draw
        let z_on = rng.random::<f64>() < p1;
        let a0 = if z_on {
            sd * normal.inverse_cdf(t_lo + window * rng.random::<f64>())
        } else {
            sd * rng.sample::<f64, _>(StandardNormal)
        };
        let mut state = model::LatentState::Binary {
            z: DMatrix::from_element(1, 1, if z_on { 1.0 } else { 0.0 }),
            a: DMatrix::from_element(1, 1, a0),
        };
        constrained_prior_step(&model_spec, &mut state, &data, cutoff, &mut rng).unwrap();
        let (z_out, a_out) = match &state {
            model::LatentState::Binary { z, a } => (z[(0, 0)] == 1.0, a[(0, 0)]),
            _ => unreachable!(),
        };
        let cell = if z_out {
            4 + z1_edges.partition_point(|e| *e < a_out)
        } else {
            z0_edges.partition_point(|e| *e < a_out)
        };
        counts[cell] += 1;
    }
    let p = chi_square_gof(&counts, &probs);
    assert!(p > SIGNIFICANCE, "chi-square p = {p}");
}
