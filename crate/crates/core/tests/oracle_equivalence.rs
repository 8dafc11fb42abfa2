//! Cross-checks of the brute-force oracles against independent routes, and
//! of the bridging estimators against the oracles on tiny instances.

mod common;

use bdmc::ais::{ais_forward, ais_reverse};
use bdmc::logsum::{log_harmonic_mean_exp, log_mean_exp, log_sum_exp};
use bdmc::model::{
    self, binary, clustering, BinarySpec, ClusteringSpec, Dataset, LowRankSpec, ModelSpec,
};
use bdmc::schedule::AnnealingSchedule;
use bdmc::smc::{shme_run, smc_run, ProposalKind, SmcConfig};
use bdmc::RngStream;
use common::*;
use nalgebra::DMatrix;

fn tiny_clustering() -> (ModelSpec, Dataset) {
    let spec = ClusteringSpec::new(3, 2, 2, vec![0.4, 0.6], 1.5, 0.3).unwrap();
    let model_spec = ModelSpec::Clustering(spec);
    let (_, data) = model::simulate(&model_spec, &RngStream::new(2024, 0));
    (model_spec, data)
}

fn tiny_binary() -> (ModelSpec, Dataset) {
    let spec = BinarySpec::new(2, 1, 2, vec![0.35, 0.6], 1.2, 0.4).unwrap();
    let model_spec = ModelSpec::Binary(spec);
    let (_, data) = model::simulate(&model_spec, &RngStream::new(7, 0));
    (model_spec, data)
}

#[test]
fn clustering_brute_force_matches_enumerated_collapsed_joint() {
    // Sum over all assignments of the collapsed joint (sequential-predictive
    // route) equals the closed-form determinant route inside the oracle.
    let (model_spec, data) = tiny_clustering();
    let spec = match &model_spec {
        ModelSpec::Clustering(s) => s.clone(),
        _ => unreachable!(),
    };
    let truth = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let terms: Vec<f64> = all_assignments(2, 3)
        .iter()
        .map(|z| clustering::collapsed_log_joint(&spec, z, &data, 3))
        .collect();
    let via_chain = log_sum_exp(&terms).unwrap();
    assert!(
        (truth - via_chain).abs() < 1e-8 * truth.abs().max(1.0),
        "{truth} vs {via_chain}"
    );
    // and against the test-side tempered marginal at beta = 1
    let terms2: Vec<f64> = all_assignments(2, 3)
        .iter()
        .map(|z| clustering_tempered_z_logmass(&spec, z, &data, 1.0))
        .collect();
    let via_tempered = log_sum_exp(&terms2).unwrap();
    assert!((truth - via_tempered).abs() < 1e-8 * truth.abs().max(1.0));
}

#[test]
fn clustering_frozen_regression_value() {
    // Frozen output of the enumeration oracle on a fixed instance (N=3, D=2,
    // K=2, seed 2024). Guards against silent regressions in any of the
    // conjugate bookkeeping.
    let (model_spec, data) = tiny_clustering();
    let truth = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let frozen = -10.203274764963165;
    assert!(
        (truth - frozen).abs() < 1e-9,
        "oracle drifted: {truth} vs frozen {frozen}"
    );
}

#[test]
fn predictive_chain_reproduces_brute_force() {
    // p(y_{1:N}) = prod_i p(y_i | y_{1:i-1}), with each predictive computed
    // by marginalizing the enumerated exact partial posterior.
    let (model_spec, data) = tiny_clustering();
    let spec = match &model_spec {
        ModelSpec::Clustering(s) => s.clone(),
        _ => unreachable!(),
    };
    for prefix in 0..3usize {
        let sub_spec = ModelSpec::Clustering(
            ClusteringSpec::new(prefix, spec.d, spec.k, spec.mix_probs.clone(), spec.between_var, spec.noise_var)
                .unwrap(),
        );
        let sub_data = Dataset::new(data.y.rows(0, prefix).into_owned()).unwrap();
        let next_spec = ModelSpec::Clustering(
            ClusteringSpec::new(prefix + 1, spec.d, spec.k, spec.mix_probs.clone(), spec.between_var, spec.noise_var)
                .unwrap(),
        );
        let next_data = Dataset::new(data.y.rows(0, prefix + 1).into_owned()).unwrap();
        let expected = model::brute_force_log_ml(&next_spec, &next_data).unwrap()
            - model::brute_force_log_ml(&sub_spec, &sub_data).unwrap();

        // marginalize the predictive over the enumerated partial posterior
        let configs = all_assignments(spec.k, prefix);
        let logmass: Vec<f64> = configs
            .iter()
            .map(|z| clustering_tempered_z_logmass(&spec, z, &sub_data, 1.0))
            .collect();
        let norm = log_sum_exp(&logmass).unwrap();
        let terms: Vec<f64> = configs
            .iter()
            .zip(&logmass)
            .map(|(z, lm)| {
                let mut assignments = z.clone();
                assignments.resize(prefix + 1, 0);
                let state = model::LatentState::Clustering {
                    assignments,
                    centers: DMatrix::zeros(spec.k, spec.d),
                };
                lm - norm + model::predictive_loglik(&next_spec, &state, &next_data, prefix).unwrap()
            })
            .collect();
        let got = log_sum_exp(&terms).unwrap();
        assert!(
            (got - expected).abs() < 1e-6 * expected.abs().max(1.0),
            "prefix {prefix}: {got} vs {expected}"
        );
    }
}

#[test]
fn binary_brute_force_matches_hand_enumeration() {
    // N=2, K=2, D=1: sixteen explicit 2x2 Gaussian marginals written out with
    // scalar algebra only.
    let (model_spec, data) = tiny_binary();
    let spec = match &model_spec {
        ModelSpec::Binary(s) => s.clone(),
        _ => unreachable!(),
    };
    let (y0, y1) = (data.y[(0, 0)], data.y[(1, 0)]);
    let mut terms = Vec::new();
    for bits in 0..16u32 {
        // row i attributes: (z_i0, z_i1)
        let z = [
            [(bits & 1) as f64, (bits >> 1 & 1) as f64],
            [(bits >> 2 & 1) as f64, (bits >> 3 & 1) as f64],
        ];
        let mut prior = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let p = spec.attr_probs[k];
                prior += if z[i][k] == 1.0 { p.ln() } else { (1.0 - p).ln() };
            }
        }
        // y ~ N(0, C), C = a_var * Z Z^T + noise_var * I (2x2), by hand:
        let c00 = spec.a_var * (z[0][0] * z[0][0] + z[0][1] * z[0][1]) + spec.noise_var;
        let c11 = spec.a_var * (z[1][0] * z[1][0] + z[1][1] * z[1][1]) + spec.noise_var;
        let c01 = spec.a_var * (z[0][0] * z[1][0] + z[0][1] * z[1][1]);
        let det = c00 * c11 - c01 * c01;
        let quad = (c11 * y0 * y0 - 2.0 * c01 * y0 * y1 + c00 * y1 * y1) / det;
        let lik = -(bdmc::dist::LN_2PI) - 0.5 * det.ln() - 0.5 * quad;
        terms.push(prior + lik);
    }
    let hand = log_sum_exp(&terms).unwrap();
    let oracle = model::brute_force_log_ml(&model_spec, &data).unwrap();
    assert!((hand - oracle).abs() < 1e-10, "{hand} vs {oracle}");
}

#[test]
fn binary_predictive_matches_enumeration() {
    // N=1 prefix: predictive of the first row equals the brute-force ML of a
    // single-row instance; also check a nonempty prefix via ratios.
    let (model_spec, data) = tiny_binary();
    let spec = match &model_spec {
        ModelSpec::Binary(s) => s.clone(),
        _ => unreachable!(),
    };
    let one_spec = ModelSpec::Binary(
        BinarySpec::new(1, 1, 2, spec.attr_probs.clone(), spec.a_var, spec.noise_var).unwrap(),
    );
    let one_data = Dataset::new(data.y.rows(0, 1).into_owned()).unwrap();
    let state = model::LatentState::Binary {
        z: DMatrix::zeros(1, 2),
        a: DMatrix::zeros(2, 1),
    };
    let pred = model::predictive_loglik(&one_spec, &state, &one_data, 0).unwrap();
    let bf = model::brute_force_log_ml(&one_spec, &one_data).unwrap();
    assert!((pred - bf).abs() < 1e-10, "{pred} vs {bf}");

    // chain over both rows with enumerated partial posterior
    let full_bf = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let expected_second = full_bf - bf;
    let mut terms = Vec::new();
    for mask in 0..4u64 {
        let lm = binary_tempered_z_logmass(
            &BinarySpec::new(1, 1, 2, spec.attr_probs.clone(), spec.a_var, spec.noise_var).unwrap(),
            mask,
            &one_data,
            1.0,
        );
        let mut z = DMatrix::zeros(2, 2);
        z[(0, 0)] = (mask & 1) as f64;
        z[(0, 1)] = (mask >> 1 & 1) as f64;
        let state = model::LatentState::Binary { z, a: DMatrix::zeros(2, 1) };
        terms.push(lm + model::predictive_loglik(&model_spec, &state, &data, 1).unwrap());
    }
    let got = log_sum_exp(&terms).unwrap() - bf;
    assert!(
        (got - expected_second).abs() < 1e-8 * expected_second.abs().max(1.0),
        "{got} vs {expected_second}"
    );
}

#[test]
fn lowrank_quadrature_matches_analytic_v_route() {
    // K=1, N=2, D=1: the (N+D)-dimensional quadrature oracle against the
    // D-dimensional quadrature with U integrated analytically per row.
    let spec = LowRankSpec::new(2, 1, 1, 0.9, 1.1, 0.5).unwrap();
    let model_spec = ModelSpec::LowRank(spec.clone());
    let (_, data) = model::simulate(&model_spec, &RngStream::new(5, 0));
    let oracle = model::brute_force_log_ml(&model_spec, &data).unwrap();

    // independent route: p(y) = int p(v) prod_i N(y_i; 0, u_var v^2 + noise) dv
    let integrand = |v: f64| -> f64 {
        let mut lf = gaussian_logpdf(v, 0.0, spec.v_var);
        let var = spec.u_var * v * v + spec.noise_var;
        for i in 0..2 {
            lf += gaussian_logpdf(data.y[(i, 0)], 0.0, var);
        }
        lf.exp()
    };
    let lim = 14.0;
    let z = bdmc::model::oracle::adaptive_simpson(&integrand, -lim, lim, 1e-13);
    let independent = z.ln();
    assert!(
        (oracle - independent).abs() < 1e-6 * independent.abs().max(1.0),
        "{oracle} vs {independent}"
    );
}

#[test]
fn ais_forward_converges_to_clustering_oracle() {
    let (model_spec, data) = tiny_clustering();
    let truth = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let schedule = AnnealingSchedule::sigmoid(2000, 4.0).unwrap();
    let stream = RngStream::new(99, 0);
    let weights: Vec<f64> = (0..12)
        .map(|c| {
            let mut rng = stream.child(c).rng();
            ais_forward(&model_spec, &data, &schedule, &mut rng)
                .unwrap()
                .0
                .value()
        })
        .collect();
    let est = log_mean_exp(&weights).unwrap();
    assert!(
        (est - truth).abs() < 0.25,
        "AIS {est} vs truth {truth} (diff {})",
        est - truth
    );
}

#[test]
fn ais_reverse_converges_to_clustering_oracle() {
    let (model_spec, data) = tiny_clustering();
    let (exact, data2) = model::simulate(&model_spec, &RngStream::new(2024, 0));
    assert_eq!(data.y, data2.y);
    let truth = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let schedule = AnnealingSchedule::sigmoid(2000, 4.0).unwrap();
    let stream = RngStream::new(101, 0);
    let estimates: Vec<f64> = (0..12)
        .map(|c| {
            let mut rng = stream.child(c).rng();
            -ais_reverse(&model_spec, &data, &exact, &schedule, &mut rng)
                .unwrap()
                .value()
        })
        .collect();
    let est = log_harmonic_mean_exp(&estimates).unwrap();
    assert!(
        (est - truth).abs() < 0.25,
        "reverse AIS {est} vs truth {truth} (diff {})",
        est - truth
    );
}

#[test]
fn ais_on_empty_data_is_zero_nats() {
    let spec = ModelSpec::Clustering(
        ClusteringSpec::new(0, 2, 2, vec![0.5, 0.5], 1.0, 0.5).unwrap(),
    );
    let data = Dataset::new(DMatrix::zeros(0, 2)).unwrap();
    let schedule = AnnealingSchedule::sigmoid(50, 4.0).unwrap();
    let mut rng = RngStream::new(1, 0).rng();
    let (w, _) = ais_forward(&spec, &data, &schedule, &mut rng).unwrap();
    assert_eq!(w.value(), 0.0);
    let cfg = SmcConfig::single_particle(3, ProposalKind::Posterior);
    let w = smc_run(&spec, &data, &cfg, &mut rng).unwrap();
    assert_eq!(w.value(), 0.0);
}

#[test]
fn ais_t2_reduces_to_likelihood_weighting() {
    // With T = 2 the forward chain is exactly one prior draw weighted by its
    // likelihood; seed-matched equality must be exact in log domain.
    let (model_spec, data) = tiny_clustering();
    let schedule = AnnealingSchedule::sigmoid(2, 4.0).unwrap();
    let stream = RngStream::new(77, 0);
    let mut rng = stream.rng();
    let (w, _) = ais_forward(&model_spec, &data, &schedule, &mut rng).unwrap();
    let mut rng2 = stream.rng();
    let prior_state = model::prior_draw(&model_spec, &mut rng2);
    let lw = model::log_likelihood(&model_spec, &prior_state, &data).unwrap();
    assert_eq!(w.value(), lw);
}

#[test]
fn ais_reverse_t2_reduces_to_exact_sample_hme() {
    let (model_spec, _) = tiny_clustering();
    let (exact, data) = model::simulate(&model_spec, &RngStream::new(2024, 0));
    let schedule = AnnealingSchedule::sigmoid(2, 4.0).unwrap();
    let mut rng = RngStream::new(78, 0).rng();
    let w = ais_reverse(&model_spec, &data, &exact, &schedule, &mut rng).unwrap();
    let loglik = model::log_likelihood(&model_spec, &exact.state, &data).unwrap();
    assert_eq!(-w.value(), loglik);
}

#[test]
fn ais_reverse_refuses_foreign_sample() {
    let (model_spec, data) = tiny_clustering();
    let other_spec = ModelSpec::Clustering(
        ClusteringSpec::new(3, 2, 2, vec![0.5, 0.5], 1.5, 0.3).unwrap(),
    );
    let (foreign, _) = model::simulate(&other_spec, &RngStream::new(4, 0));
    let schedule = AnnealingSchedule::sigmoid(10, 4.0).unwrap();
    let mut rng = RngStream::new(1, 0).rng();
    let err = ais_reverse(&model_spec, &data, &foreign, &schedule, &mut rng);
    assert!(matches!(err, Err(bdmc::Error::MissingProvenance(_))));
}

#[test]
fn smc_single_row_posterior_proposal_is_exact_for_clustering() {
    // N = 1, one particle, posterior proposal: the Rao-Blackwellized weight
    // is the exact one-row predictive, so the estimate is exact per run.
    let cfg = SmcConfig::single_particle(2, ProposalKind::Posterior);
    let spec = ModelSpec::Clustering(
        ClusteringSpec::new(1, 2, 2, vec![0.3, 0.7], 1.1, 0.4).unwrap(),
    );
    let (_, data) = model::simulate(&spec, &RngStream::new(11, 0));
    let truth = model::brute_force_log_ml(&spec, &data).unwrap();
    let est = smc_run(&spec, &data, &cfg, &mut RngStream::new(12, 0).rng()).unwrap();
    assert!((est.value() - truth).abs() < 1e-9, "clustering {} vs {truth}", est.value());
}

#[test]
fn smc_single_row_weights_are_unbiased_for_explicit_parameter_models() {
    // Binary and low-rank particles carry explicit parameters, so the N = 1
    // weight p(y | params) is exact only in expectation over the prior draw.
    let cfg = SmcConfig::single_particle(0, ProposalKind::Posterior);
    let trials = 4000u64;

    let spec = ModelSpec::Binary(BinarySpec::new(1, 2, 2, vec![0.4, 0.5], 1.0, 0.3).unwrap());
    let (_, data) = model::simulate(&spec, &RngStream::new(13, 0));
    let truth = model::brute_force_log_ml(&spec, &data).unwrap();
    let stream = RngStream::new(14, 0);
    let vals: Vec<f64> = (0..trials)
        .map(|t| smc_run(&spec, &data, &cfg, &mut stream.child(t).rng()).unwrap().value())
        .collect();
    let est = log_mean_exp(&vals).unwrap();
    assert!((est - truth).abs() < 0.1, "binary {est} vs {truth}");

    let spec = ModelSpec::LowRank(LowRankSpec::new(1, 1, 1, 0.8, 1.2, 0.5).unwrap());
    let (_, data) = model::simulate(&spec, &RngStream::new(15, 0));
    let truth = model::brute_force_log_ml(&spec, &data).unwrap();
    let stream = RngStream::new(16, 0);
    let vals: Vec<f64> = (0..trials)
        .map(|t| smc_run(&spec, &data, &cfg, &mut stream.child(t).rng()).unwrap().value())
        .collect();
    let est = log_mean_exp(&vals).unwrap();
    assert!((est - truth).abs() < 0.1, "lowrank {est} vs {truth}");
}

#[test]
fn smc_posterior_chain_is_exact_for_k1_clustering() {
    // K = 1: the collapsed predictive is the exact per-row predictive, so the
    // SMC weight telescopes to the exact ML for any N.
    let spec = ModelSpec::Clustering(ClusteringSpec::new(5, 2, 1, vec![1.0], 1.3, 0.6).unwrap());
    let (_, data) = model::simulate(&spec, &RngStream::new(21, 0));
    let truth = model::brute_force_log_ml(&spec, &data).unwrap();
    let cfg = SmcConfig::single_particle(1, ProposalKind::Posterior);
    let est = smc_run(&spec, &data, &cfg, &mut RngStream::new(22, 0).rng()).unwrap();
    assert!((est.value() - truth).abs() < 1e-9, "{} vs {truth}", est.value());
}

#[test]
fn smc_converges_to_binary_oracle() {
    let (model_spec, data) = tiny_binary();
    let truth = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let cfg = SmcConfig::single_particle(15, ProposalKind::Posterior);
    let stream = RngStream::new(31, 0);
    let estimates: Vec<f64> = (0..25)
        .map(|t| {
            smc_run(&model_spec, &data, &cfg, &mut stream.child(t).rng())
                .unwrap()
                .value()
        })
        .collect();
    let est = log_mean_exp(&estimates).unwrap();
    assert!((est - truth).abs() < 0.4, "SMC {est} vs truth {truth}");
}

#[test]
fn shme_single_row_posterior_proposal_is_exact() {
    let spec = ModelSpec::Clustering(
        ClusteringSpec::new(1, 2, 2, vec![0.3, 0.7], 1.1, 0.4).unwrap(),
    );
    let (exact, data) = model::simulate(&spec, &RngStream::new(41, 0));
    let truth = model::brute_force_log_ml(&spec, &data).unwrap();
    let cfg = SmcConfig::single_particle(2, ProposalKind::Posterior);
    let est = shme_run(&spec, &data, &exact, &cfg, &mut RngStream::new(42, 0).rng()).unwrap();
    assert!((est.value() - truth).abs() < 1e-9, "{} vs {truth}", est.value());
}

#[test]
fn smc_and_shme_bracket_clustering_truth() {
    // E[log SMC] <= truth <= E[log SHME], two-standard-error slack.
    let (model_spec, data) = tiny_clustering();
    let (exact, _) = model::simulate(&model_spec, &RngStream::new(2024, 0));
    let truth = model::brute_force_log_ml(&model_spec, &data).unwrap();
    let cfg = SmcConfig::single_particle(3, ProposalKind::Posterior);
    let stream = RngStream::new(55, 0);
    let smc_vals: Vec<f64> = (0..100)
        .map(|t| smc_run(&model_spec, &data, &cfg, &mut stream.child(t).rng()).unwrap().value())
        .collect();
    let shme_vals: Vec<f64> = (0..100)
        .map(|t| {
            shme_run(&model_spec, &data, &exact, &cfg, &mut stream.child(1000 + t).rng())
                .unwrap()
                .value()
        })
        .collect();
    let (smc_mean, smc_se) = mean_and_se(&smc_vals);
    let (shme_mean, shme_se) = mean_and_se(&shme_vals);
    assert!(
        smc_mean <= truth + 2.0 * smc_se,
        "SMC mean {smc_mean} above truth {truth} (se {smc_se})"
    );
    assert!(
        shme_mean >= truth - 2.0 * shme_se,
        "SHME mean {shme_mean} below truth {truth} (se {shme_se})"
    );
}
