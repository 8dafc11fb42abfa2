//! Elementary distributions with paired sample / log-density operations.
//! Only the families the three latent-variable models need.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Tolerance for probability-vector normalization checks.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Univariate Gaussian parameterized by mean and variance.
#[derive(Clone, Copy, Debug)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Gaussian requires finite mean and positive variance, got ({mean}, {var})"
            )));
        }
        Ok(Gaussian { mean, var })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.var.sqrt() * z
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let r = x - self.mean;
        -0.5 * (LN_2PI + self.var.ln()) - 0.5 * r * r / self.var
    }
}

/// Free function used in hot loops where constructing a `Gaussian` would be noise.
#[inline]
pub fn gaussian_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * r * r / var
}

/// Spherical multivariate Gaussian: independent coordinates with a common variance.
#[derive(Clone, Debug)]
pub struct SphericalGaussian {
    pub mean: DVector<f64>,
    pub var: f64,
}

impl SphericalGaussian {
    pub fn new(mean: DVector<f64>, var: f64) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spherical Gaussian requires positive variance, got {var}"
            )));
        }
        Ok(SphericalGaussian { mean, var })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let sd = self.var.sqrt();
        DVector::from_iterator(
            self.mean.len(),
            self.mean.iter().map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)),
        )
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.mean.len(), "dimension mismatch");
        let d = x.len() as f64;
        let sq = (x - &self.mean).norm_squared();
        -0.5 * d * (LN_2PI + self.var.ln()) - 0.5 * sq / self.var
    }
}

/// Categorical distribution over 0..K-1.
#[derive(Clone, Debug)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "probability vector has invalid entry: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "probability vector sums to {sum}, not 1"
            )));
        }
        Ok(Categorical { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn log_mass(&self, category: usize) -> f64 {
        self.probs[category].ln()
    }
}

/// Samples a category from unnormalized log probabilities.
pub fn sample_from_logits<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Result<usize> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::InvalidParameter(
            "all-zero-probability conditional".into(),
        ));
    }
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(weights.len() - 1)
}

/// Normalizes log probabilities to a mass function.
pub fn normalize_logits(logits: &[f64]) -> Result<Vec<f64>> {
    let lse = crate::logsum::log_sum_exp(logits)?;
    if lse == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(
            "all-zero-probability conditional".into(),
        ));
    }
    Ok(logits.iter().map(|l| (l - lse).exp()).collect())
}

/// Bernoulli distribution over {0, 1}.
#[derive(Clone, Copy, Debug)]
pub struct Bernoulli {
    pub p: f64,
}

impl Bernoulli {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "Bernoulli probability {p} outside [0, 1]"
            )));
        }
        Ok(Bernoulli { p })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.p
    }

    pub fn log_mass(&self, x: bool) -> f64 {
        if x {
            self.p.ln()
        } else {
            (1.0 - self.p).ln()
        }
    }
}

/// Cholesky factor of a precision matrix, shared across the many Gaussian
/// conditionals of one block update (same precision, different means).
#[derive(Clone, Debug)]
pub struct PrecisionFactor {
    l: DMatrix<f64>,
    log_det_precision: f64,
}

impl PrecisionFactor {
    pub fn new(precision: DMatrix<f64>) -> Result<Self> {
        let chol = nalgebra::Cholesky::new(precision).ok_or_else(|| {
            Error::InvalidParameter("precision matrix is not positive definite".into())
        })?;
        let l = chol.l();
        let log_det_precision = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(PrecisionFactor {
            l,
            log_det_precision,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves precision * x = rhs, the conditional mean from its natural parameter.
    pub fn mean_from_rhs(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let w = self
            .l
            .solve_lower_triangular(rhs)
            .expect("Cholesky factor has positive diagonal");
        self.l
            .transpose()
            .solve_upper_triangular(&w)
            .expect("Cholesky factor has positive diagonal")
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let k = self.dim();
        let eps = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let w = self
            .l
            .transpose()
            .solve_upper_triangular(&eps)
            .expect("Cholesky factor has positive diagonal");
        mean + w
    }

    pub fn log_density(&self, mean: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let k = self.dim() as f64;
        let q = (self.l.transpose() * (x - mean)).norm_squared();
        -0.5 * k * LN_2PI + 0.5 * self.log_det_precision - 0.5 * q
    }
}

/// Multivariate Gaussian parameterized by its precision matrix, the natural
/// form for conjugate block conditionals. Stores the Cholesky factor L with
/// precision = L L^T.
#[derive(Clone, Debug)]
pub struct GaussianPrecision {
    pub mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_det_precision: f64,
}

impl GaussianPrecision {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if precision.nrows() != k || precision.ncols() != k {
            return Err(Error::ShapeMismatch(format!(
                "precision is {}x{}, mean has length {k}",
                precision.nrows(),
                precision.ncols()
            )));
        }
        let chol = nalgebra::Cholesky::new(precision).ok_or_else(|| {
            Error::InvalidParameter("precision matrix is not positive definite".into())
        })?;
        let l = chol.l();
        let log_det_precision = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(GaussianPrecision {
            mean,
            chol_l: l,
            log_det_precision,
        })
    }

    /// x = mean + L^{-T} eps with eps standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let k = self.mean.len();
        let eps = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let lt = self.chol_l.transpose();
        let w = lt
            .solve_upper_triangular(&eps)
            .expect("Cholesky factor has positive diagonal");
        &self.mean + w
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let k = self.mean.len() as f64;
        let centered = x - &self.mean;
        let q = (self.chol_l.transpose() * centered).norm_squared();
        -0.5 * k * LN_2PI + 0.5 * self.log_det_precision - 0.5 * q
    }
}
