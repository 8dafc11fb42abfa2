//! The three fixed-hyperparameter latent-variable models: clustering,
//! low-rank factorization, and binary attributes. Each exposes forward
//! simulation, joint and tempered log-densities, collapsed predictive
//! likelihoods, and a brute-force log-ML oracle at tiny scale.

pub mod binary;
pub mod clustering;
pub mod lowrank;
pub mod oracle;

use crate::dist::PROB_SUM_TOL;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Clustering,
    LowRank,
    Binary,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Clustering => "clustering",
            ModelKind::LowRank => "lowrank",
            ModelKind::Binary => "binary",
        }
    }
}

/// Mixture of spherical Gaussians with fixed mixing probabilities and variances.
#[derive(Clone, Debug)]
pub struct ClusteringSpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub mix_probs: Vec<f64>,
    pub between_var: f64,
    pub noise_var: f64,
}

impl ClusteringSpec {
    pub fn new(
        n: usize,
        d: usize,
        k: usize,
        mix_probs: Vec<f64>,
        between_var: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("clustering needs k >= 1".into()));
        }
        if mix_probs.len() != k {
            return Err(Error::InvalidParameter(format!(
                "mix_probs has length {}, expected k = {k}",
                mix_probs.len()
            )));
        }
        let sum: f64 = mix_probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL || mix_probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "mix_probs must be a probability vector, got {mix_probs:?}"
            )));
        }
        if !(between_var > 0.0) || !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(
                "variances must be strictly positive".into(),
            ));
        }
        Ok(ClusteringSpec {
            n,
            d,
            k,
            mix_probs,
            between_var,
            noise_var,
        })
    }

    pub fn uniform_mix(n: usize, d: usize, k: usize, between_var: f64, noise_var: f64) -> Result<Self> {
        Self::new(n, d, k, vec![1.0 / k as f64; k], between_var, noise_var)
    }
}

/// Low-rank factorization Y ~ UV + noise with spherical Gaussian priors.
#[derive(Clone, Debug)]
pub struct LowRankSpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub u_var: f64,
    pub v_var: f64,
    pub noise_var: f64,
}

impl LowRankSpec {
    pub fn new(n: usize, d: usize, k: usize, u_var: f64, v_var: f64, noise_var: f64) -> Result<Self> {
        if k == 0 || k > n.min(d) {
            return Err(Error::InvalidParameter(format!(
                "low-rank needs 1 <= k <= min(n, d), got k = {k}, n = {n}, d = {d}"
            )));
        }
        if !(u_var > 0.0) || !(v_var > 0.0) || !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(
                "variances must be strictly positive".into(),
            ));
        }
        Ok(LowRankSpec {
            n,
            d,
            k,
            u_var,
            v_var,
            noise_var,
        })
    }
}

/// Binary attribute model Y ~ ZA + noise, Z binary with fixed attribute probabilities.
#[derive(Clone, Debug)]
pub struct BinarySpec {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub attr_probs: Vec<f64>,
    pub a_var: f64,
    pub noise_var: f64,
}

impl BinarySpec {
    pub fn new(
        n: usize,
        d: usize,
        k: usize,
        attr_probs: Vec<f64>,
        a_var: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if k == 0 || attr_probs.len() != k {
            return Err(Error::InvalidParameter(format!(
                "attr_probs has length {}, expected k = {k} >= 1",
                attr_probs.len()
            )));
        }
        if attr_probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "attribute probabilities must lie strictly in (0, 1), got {attr_probs:?}"
            )));
        }
        if !(a_var > 0.0) || !(noise_var > 0.0) {
            return Err(Error::InvalidParameter(
                "variances must be strictly positive".into(),
            ));
        }
        Ok(BinarySpec {
            n,
            d,
            k,
            attr_probs,
            a_var,
            noise_var,
        })
    }

    pub fn shared_prob(n: usize, d: usize, k: usize, p: f64, a_var: f64, noise_var: f64) -> Result<Self> {
        Self::new(n, d, k, vec![p; k], a_var, noise_var)
    }
}

#[derive(Clone, Debug)]
pub enum ModelSpec {
    Clustering(ClusteringSpec),
    LowRank(LowRankSpec),
    Binary(BinarySpec),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Clustering(_) => ModelKind::Clustering,
            ModelSpec::LowRank(_) => ModelKind::LowRank,
            ModelSpec::Binary(_) => ModelKind::Binary,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Clustering(s) => s.n,
            ModelSpec::LowRank(s) => s.n,
            ModelSpec::Binary(s) => s.n,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            ModelSpec::Clustering(s) => s.d,
            ModelSpec::LowRank(s) => s.d,
            ModelSpec::Binary(s) => s.d,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ModelSpec::Clustering(s) => s.k,
            ModelSpec::LowRank(s) => s.k,
            ModelSpec::Binary(s) => s.k,
        }
    }

    pub fn noise_var(&self) -> f64 {
        match self {
            ModelSpec::Clustering(s) => s.noise_var,
            ModelSpec::LowRank(s) => s.noise_var,
            ModelSpec::Binary(s) => s.noise_var,
        }
    }

    /// Canonical single-line description, hashed into file provenance headers.
    pub fn canonical_string(&self) -> String {
        match self {
            ModelSpec::Clustering(s) => format!(
                "clustering n={} d={} k={} mix={} between_var={} noise_var={}",
                s.n,
                s.d,
                s.k,
                join_floats(&s.mix_probs),
                s.between_var,
                s.noise_var
            ),
            ModelSpec::LowRank(s) => format!(
                "lowrank n={} d={} k={} u_var={} v_var={} noise_var={}",
                s.n, s.d, s.k, s.u_var, s.v_var, s.noise_var
            ),
            ModelSpec::Binary(s) => format!(
                "binary n={} d={} k={} attr={} a_var={} noise_var={}",
                s.n,
                s.d,
                s.k,
                join_floats(&s.attr_probs),
                s.a_var,
                s.noise_var
            ),
        }
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_string().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// A full assignment of parameters and latent variables for one model.
#[derive(Clone, Debug, PartialEq)]
pub enum LatentState {
    /// assignments: length N in 0..K-1; centers: K x D.
    Clustering {
        assignments: Vec<usize>,
        centers: DMatrix<f64>,
    },
    /// u: N x K; v: K x D.
    LowRank { u: DMatrix<f64>, v: DMatrix<f64> },
    /// z: N x K with entries in {0, 1}; a: K x D.
    Binary { z: DMatrix<f64>, a: DMatrix<f64> },
}

impl LatentState {
    pub fn validate_shape(&self, spec: &ModelSpec) -> Result<()> {
        let ok = match (self, spec) {
            (LatentState::Clustering { assignments, centers }, ModelSpec::Clustering(s)) => {
                assignments.len() == s.n
                    && centers.nrows() == s.k
                    && centers.ncols() == s.d
                    && assignments.iter().all(|z| *z < s.k)
            }
            (LatentState::LowRank { u, v }, ModelSpec::LowRank(s)) => {
                u.nrows() == s.n && u.ncols() == s.k && v.nrows() == s.k && v.ncols() == s.d
            }
            (LatentState::Binary { z, a }, ModelSpec::Binary(s)) => {
                z.nrows() == s.n
                    && z.ncols() == s.k
                    && a.nrows() == s.k
                    && a.ncols() == s.d
                    && z.iter().all(|e| *e == 0.0 || *e == 1.0)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "latent state does not match spec {}",
                spec.canonical_string()
            )))
        }
    }
}

/// The observation matrix: N rows of D-dimensional data points.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub y: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: DMatrix<f64>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "dataset entries must all be finite".into(),
            ));
        }
        Ok(Dataset { y })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }
}

/// A latent state known to be an exact posterior sample for its dataset,
/// because the dataset was simulated from it. Reverse-chain estimators refuse
/// to run without this provenance.
#[derive(Clone, Debug)]
pub struct ExactSample {
    pub state: LatentState,
    pub seed: u64,
    pub stream_id: u64,
    pub spec_digest: String,
}

impl ExactSample {
    pub fn check_provenance(&self, spec: &ModelSpec) -> Result<()> {
        if self.spec_digest != spec.digest() {
            return Err(Error::MissingProvenance(format!(
                "sample was generated for spec digest {}, current spec has {}",
                self.spec_digest,
                spec.digest()
            )));
        }
        Ok(())
    }
}

/// Draws parameters and latent variables from the prior.
pub fn prior_draw(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> LatentState {
    match spec {
        ModelSpec::Clustering(s) => clustering::prior_draw(s, rng),
        ModelSpec::LowRank(s) => lowrank::prior_draw(s, rng),
        ModelSpec::Binary(s) => binary::prior_draw(s, rng),
    }
}

/// The model mean of every observation cell given the latent state.
pub fn mean_matrix(spec: &ModelSpec, state: &LatentState) -> DMatrix<f64> {
    match (spec, state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, centers }) => {
            let mut m = DMatrix::zeros(s.n, s.d);
            for i in 0..s.n {
                m.row_mut(i).copy_from(&centers.row(assignments[i]));
            }
            m
        }
        (ModelSpec::LowRank(_), LatentState::LowRank { u, v }) => u * v,
        (ModelSpec::Binary(_), LatentState::Binary { z, a }) => z * a,
        _ => panic!("state does not match spec"),
    }
}

/// Samples observations from p(y | state).
pub fn observe(spec: &ModelSpec, state: &LatentState, rng: &mut ChaCha8Rng) -> Dataset {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut y = mean_matrix(spec, state);
    let sd = spec.noise_var().sqrt();
    for v in y.iter_mut() {
        *v += sd * rng.sample::<f64, _>(StandardNormal);
    }
    Dataset { y }
}

/// Low-level forward simulation: a prior draw plus observations.
pub fn simulate_parts(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> (LatentState, Dataset) {
    let state = prior_draw(spec, rng);
    let data = observe(spec, &state, rng);
    (state, data)
}

/// Forward simulation with provenance. The returned state is by construction
/// an exact posterior sample for the returned dataset.
pub fn simulate(spec: &ModelSpec, stream: &RngStream) -> (ExactSample, Dataset) {
    let mut rng = stream.rng();
    let (state, data) = simulate_parts(spec, &mut rng);
    (
        ExactSample {
            state,
            seed: stream.seed(),
            stream_id: stream.stream_id(),
            spec_digest: spec.digest(),
        },
        data,
    )
}

/// log p(theta) + log p(z | theta).
pub fn log_prior(spec: &ModelSpec, state: &LatentState) -> Result<f64> {
    state.validate_shape(spec)?;
    Ok(match (spec, state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, centers }) => {
            clustering::log_prior(s, assignments, centers)
        }
        (ModelSpec::LowRank(s), LatentState::LowRank { u, v }) => lowrank::log_prior(s, u, v),
        (ModelSpec::Binary(s), LatentState::Binary { z, a }) => binary::log_prior(s, z, a),
        _ => unreachable!(),
    })
}

/// log p(y | z, theta): sum of Gaussian log-densities around the model mean.
pub fn log_likelihood(spec: &ModelSpec, state: &LatentState, data: &Dataset) -> Result<f64> {
    state.validate_shape(spec)?;
    if data.n() != spec.n() || data.d() != spec.d() {
        return Err(Error::ShapeMismatch(format!(
            "dataset is {}x{}, spec wants {}x{}",
            data.n(),
            data.d(),
            spec.n(),
            spec.d()
        )));
    }
    Ok(log_likelihood_prefix(spec, state, data, spec.n()))
}

/// Likelihood restricted to the first `n_rows` observations. No shape checks;
/// callers on hot paths validate once up front.
pub fn log_likelihood_prefix(
    spec: &ModelSpec,
    state: &LatentState,
    data: &Dataset,
    n_rows: usize,
) -> f64 {
    let noise_var = spec.noise_var();
    let d = spec.d();
    let norm = -0.5 * (crate::dist::LN_2PI + noise_var.ln());
    let mut total = 0.0;
    match (spec, state) {
        (ModelSpec::Clustering(_), LatentState::Clustering { assignments, centers }) => {
            for i in 0..n_rows {
                let c = centers.row(assignments[i]);
                for j in 0..d {
                    let r = data.y[(i, j)] - c[j];
                    total += norm - 0.5 * r * r / noise_var;
                }
            }
        }
        (ModelSpec::LowRank(_), LatentState::LowRank { u, v }) => {
            for i in 0..n_rows {
                for j in 0..d {
                    let mean = u.row(i).dot(&v.column(j).transpose());
                    let r = data.y[(i, j)] - mean;
                    total += norm - 0.5 * r * r / noise_var;
                }
            }
        }
        (ModelSpec::Binary(_), LatentState::Binary { z, a }) => {
            for i in 0..n_rows {
                for j in 0..d {
                    let mean = z.row(i).dot(&a.column(j).transpose());
                    let r = data.y[(i, j)] - mean;
                    total += norm - 0.5 * r * r / noise_var;
                }
            }
        }
        _ => panic!("state does not match spec"),
    }
    total
}

pub fn log_joint(spec: &ModelSpec, state: &LatentState, data: &Dataset) -> Result<f64> {
    Ok(log_prior(spec, state)? + log_likelihood(spec, state, data)?)
}

/// log f_beta = log prior + beta * log likelihood, the geometric bridge
/// between prior (beta = 0) and posterior (beta = 1).
pub fn tempered_log_f(spec: &ModelSpec, state: &LatentState, data: &Dataset, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    Ok(log_prior(spec, state)? + beta * log_likelihood(spec, state, data)?)
}

/// Predictive log-likelihood of data row `row` given the first `row` rows.
///
/// Clustering: cluster centers collapsed analytically under the conjugate
/// posterior, summed over the next assignment. Low rank: V taken from the
/// state, the new U row marginalized analytically. Binary: A collapsed under
/// its conjugate posterior, the next attribute row summed by enumeration over
/// 2^K configurations (refused for K > 15).
pub fn predictive_loglik(
    spec: &ModelSpec,
    state: &LatentState,
    data: &Dataset,
    row: usize,
) -> Result<f64> {
    if row >= data.n() {
        return Err(Error::ShapeMismatch(format!(
            "row {row} out of range for dataset with {} rows",
            data.n()
        )));
    }
    match (spec, state) {
        (ModelSpec::Clustering(s), LatentState::Clustering { assignments, .. }) => {
            clustering::predictive_loglik(s, assignments, data, row)
        }
        (ModelSpec::LowRank(s), LatentState::LowRank { v, .. }) => {
            Ok(lowrank::row_predictive_logdens(s, v, &data.y.row(row).transpose()))
        }
        (ModelSpec::Binary(s), LatentState::Binary { z, .. }) => {
            binary::predictive_loglik(s, z, data, row)
        }
        _ => Err(Error::ShapeMismatch("state does not match spec".into())),
    }
}

/// Exact log marginal likelihood on tiny instances. See `oracle`.
pub fn brute_force_log_ml(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    oracle::brute_force_log_ml(spec, data)
}
