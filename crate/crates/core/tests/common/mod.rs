//! Shared test oracles: closed-form tempered marginals on tiny instances
//! (independent of the library's sweep and predictive code paths) and
//! small-sample statistical test helpers.

#![allow(dead_code)]

use bdmc::dist::LN_2PI;
use bdmc::model::{BinarySpec, ClusteringSpec, Dataset};
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// All K^N assignment vectors, odometer order.
pub fn all_assignments(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    loop {
        out.push(cur.clone());
        let mut pos = 0;
        loop {
            if pos == n {
                return out;
            }
            cur[pos] += 1;
            if cur[pos] < k {
                break;
            }
            cur[pos] = 0;
            pos += 1;
        }
    }
}

/// Closed-form log of the tempered assignment marginal f_beta(z) for the
/// clustering model, centers integrated analytically. Derived directly from
/// the Gaussian integral; shares no code with the library.
pub fn clustering_tempered_z_logmass(
    spec: &ClusteringSpec,
    z: &[usize],
    data: &Dataset,
    beta: f64,
) -> f64 {
    let tau2 = spec.between_var;
    let v = spec.noise_var;
    let mut total: f64 = z.iter().map(|zi| spec.mix_probs[*zi].ln()).sum();
    for k in 0..spec.k {
        let members: Vec<usize> = (0..z.len()).filter(|i| z[*i] == k).collect();
        let nk = members.len() as f64;
        for j in 0..spec.d {
            let sum: f64 = members.iter().map(|i| data.y[(*i, j)]).sum();
            let sum_sq: f64 = members.iter().map(|i| data.y[(*i, j)].powi(2)).sum();
            let a = 1.0 / tau2 + beta * nk / v;
            let h = beta * sum / v;
            total += -0.5 * beta * nk * (LN_2PI + v.ln()) - 0.5 * (tau2 * a).ln()
                - 0.5 * beta * sum_sq / v
                + 0.5 * h * h / a;
        }
    }
    total
}

/// Tempered conditional of one cluster center given assignments: mean vector
/// and shared variance. Test-side derivation.
pub fn clustering_tempered_center_cond(
    spec: &ClusteringSpec,
    z: &[usize],
    data: &Dataset,
    k: usize,
    beta: f64,
) -> (Vec<f64>, f64) {
    let nk = z.iter().filter(|zi| **zi == k).count() as f64;
    let a = 1.0 / spec.between_var + beta * nk / spec.noise_var;
    let var = 1.0 / a;
    let mean: Vec<f64> = (0..spec.d)
        .map(|j| {
            let sum: f64 = (0..z.len()).filter(|i| z[*i] == k).map(|i| data.y[(i, j)]).sum();
            beta * sum / spec.noise_var * var
        })
        .collect();
    (mean, var)
}

/// Closed-form log of the tempered binary-matrix marginal f_beta(Z) with the
/// feature matrix integrated analytically, columns independent.
pub fn binary_tempered_z_logmass(
    spec: &BinarySpec,
    mask: u64,
    data: &Dataset,
    beta: f64,
) -> f64 {
    let tau2 = spec.a_var;
    let v = spec.noise_var;
    let (n, k) = (spec.n, spec.k);
    let mut total = 0.0;
    let mut z = DMatrix::zeros(n, k);
    for i in 0..n {
        for a in 0..k {
            let on = mask >> (i * k + a) & 1 == 1;
            let p = spec.attr_probs[a];
            total += if on { p.ln() } else { (1.0 - p).ln() };
            z[(i, a)] = if on { 1.0 } else { 0.0 };
        }
    }
    let mut prec = DMatrix::identity(k, k) / tau2;
    prec += z.transpose() * &z * (beta / v);
    let chol = nalgebra::Cholesky::new(prec).expect("pd");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    for j in 0..spec.d {
        let y_col = data.y.column(j).into_owned();
        let h = z.transpose() * &y_col * (beta / v);
        let sol = chol.solve(&h);
        let y_sq = y_col.norm_squared();
        total += -0.5 * beta * (n as f64) * (LN_2PI + v.ln()) - 0.5 * (k as f64) * tau2.ln()
            - 0.5 * log_det
            + 0.5 * h.dot(&sol)
            - 0.5 * beta * y_sq / v;
    }
    total
}

/// Tempered conditional of the feature matrix given Z: per-column Gaussian
/// with shared precision. Returns (means K x D, cholesky of precision).
pub fn binary_tempered_a_cond(
    spec: &BinarySpec,
    mask: u64,
    data: &Dataset,
    beta: f64,
) -> (DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>) {
    let (n, k) = (spec.n, spec.k);
    let mut z = DMatrix::zeros(n, k);
    for i in 0..n {
        for a in 0..k {
            z[(i, a)] = (mask >> (i * k + a) & 1) as f64;
        }
    }
    let mut prec = DMatrix::identity(k, k) / spec.a_var;
    prec += z.transpose() * &z * (beta / spec.noise_var);
    let chol = nalgebra::Cholesky::new(prec.clone()).expect("pd");
    let rhs = z.transpose() * &data.y * (beta / spec.noise_var);
    let means = chol.solve(&rhs);
    (means, chol)
}

/// One-sample chi-square goodness-of-fit test. Returns the p-value.
pub fn chi_square_gof(counts: &[usize], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let n: usize = counts.iter().sum();
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (c, p) in counts.iter().zip(probs) {
        let expected = *p * n as f64;
        if expected < 1e-12 {
            assert_eq!(*c, 0, "observed count in a zero-probability cell");
            continue;
        }
        stat += (*c as f64 - expected).powi(2) / expected;
        dof += 1;
    }
    assert!(dof > 1, "need at least two cells");
    let dist = ChiSquared::new((dof - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Two-sample chi-square homogeneity test over categorical outcomes.
pub fn chi_square_two_sample(counts_a: &[usize], counts_b: &[usize]) -> f64 {
    assert_eq!(counts_a.len(), counts_b.len());
    let na: usize = counts_a.iter().sum();
    let nb: usize = counts_b.iter().sum();
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (a, b) in counts_a.iter().zip(counts_b) {
        let (a, b) = (*a as f64, *b as f64);
        if a + b == 0.0 {
            continue;
        }
        stat += (ka * a - kb * b).powi(2) / (a + b);
        dof += 1;
    }
    assert!(dof > 1);
    let dist = ChiSquared::new((dof - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Draws an index from explicit probabilities.
pub fn draw_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Normalizes log masses into probabilities.
pub fn normalize_logmass(logmass: &[f64]) -> Vec<f64> {
    let max = logmass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logmass.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Builds a dataset from a row-major slice.
pub fn dataset(n: usize, d: usize, values: &[f64]) -> Dataset {
    Dataset::new(DMatrix::from_row_slice(n, d, values)).unwrap()
}

/// Sample mean and the standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn gaussian_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * (x - mean).powi(2) / var
}

/// Column vector helper.
pub fn dvec(values: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(values)
}
