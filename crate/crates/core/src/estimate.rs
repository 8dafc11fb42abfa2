//! Estimate records: a log-domain value with its provenance, and the paired
//! bounds produced by bidirectional runs.

use crate::rng::RngStream;

/// Proven bound character of an estimator: unbiased estimators of Z give
/// stochastic lower bounds on log Z, unbiased estimators of 1/Z give
/// stochastic upper bounds, everything else carries no bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Lower,
    Upper,
    None,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
            Direction::None => "none",
        }
    }
}

/// How estimates from independent trials are combined into one value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineRule {
    /// Arithmetic mean of the weights, for unbiased estimators of Z.
    LogMeanExp,
    /// Harmonic mean, for unbiased estimators of 1/Z.
    LogHarmonicMeanExp,
    /// Maximum, for bound-maximizing optimizers.
    Max,
    /// Plain average of the log values.
    MeanOfLogs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    Ais,
    ReverseAis,
    Smc,
    Shme,
    LikelihoodWeighting,
    HarmonicMean,
    Bic,
    Cms,
    NestedSampling,
    Vb,
    VbSym,
}

impl EstimatorId {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorId::Ais => "ais",
            EstimatorId::ReverseAis => "reverse_ais",
            EstimatorId::Smc => "smc",
            EstimatorId::Shme => "shme",
            EstimatorId::LikelihoodWeighting => "lw",
            EstimatorId::HarmonicMean => "hme",
            EstimatorId::Bic => "bic",
            EstimatorId::Cms => "cms",
            EstimatorId::NestedSampling => "ns",
            EstimatorId::Vb => "vb",
            EstimatorId::VbSym => "vb_sym",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ais" => EstimatorId::Ais,
            "reverse_ais" => EstimatorId::ReverseAis,
            "smc" => EstimatorId::Smc,
            "shme" => EstimatorId::Shme,
            "lw" => EstimatorId::LikelihoodWeighting,
            "hme" => EstimatorId::HarmonicMean,
            "bic" => EstimatorId::Bic,
            "cms" => EstimatorId::Cms,
            "ns" => EstimatorId::NestedSampling,
            "vb" => EstimatorId::Vb,
            "vb_sym" => EstimatorId::VbSym,
            _ => return None,
        })
    }

    pub fn direction(&self) -> Direction {
        match self {
            EstimatorId::Ais
            | EstimatorId::Smc
            | EstimatorId::LikelihoodWeighting
            | EstimatorId::Cms
            | EstimatorId::Vb => Direction::Lower,
            EstimatorId::ReverseAis | EstimatorId::Shme | EstimatorId::HarmonicMean => {
                Direction::Upper
            }
            EstimatorId::Bic | EstimatorId::NestedSampling | EstimatorId::VbSym => Direction::None,
        }
    }

    /// Combination rule across independent trials: arithmetic mean for
    /// unbiased-of-Z estimators, harmonic for unbiased-of-1/Z, max for the
    /// variational bound, mean of logs otherwise.
    pub fn combine_rule(&self) -> CombineRule {
        match self {
            EstimatorId::Ais
            | EstimatorId::Smc
            | EstimatorId::Cms
            | EstimatorId::LikelihoodWeighting => CombineRule::LogMeanExp,
            EstimatorId::ReverseAis | EstimatorId::Shme | EstimatorId::HarmonicMean => {
                CombineRule::LogHarmonicMeanExp
            }
            EstimatorId::Vb | EstimatorId::VbSym => CombineRule::Max,
            EstimatorId::NestedSampling | EstimatorId::Bic => CombineRule::MeanOfLogs,
        }
    }

    pub fn all() -> &'static [EstimatorId] {
        &[
            EstimatorId::Ais,
            EstimatorId::ReverseAis,
            EstimatorId::Smc,
            EstimatorId::Shme,
            EstimatorId::LikelihoodWeighting,
            EstimatorId::HarmonicMean,
            EstimatorId::Bic,
            EstimatorId::Cms,
            EstimatorId::NestedSampling,
            EstimatorId::Vb,
            EstimatorId::VbSym,
        ]
    }
}

/// Combines per-trial log estimates under the estimator's rule.
pub fn combine_trials(id: EstimatorId, values: &[f64]) -> crate::error::Result<f64> {
    match id.combine_rule() {
        CombineRule::LogMeanExp => crate::logsum::log_mean_exp(values),
        CombineRule::LogHarmonicMeanExp => crate::logsum::log_harmonic_mean_exp(values),
        CombineRule::Max => values
            .iter()
            .cloned()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .ok_or(crate::error::Error::EmptyAggregation),
        CombineRule::MeanOfLogs => {
            if values.is_empty() {
                return Err(crate::error::Error::EmptyAggregation);
            }
            Ok(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

/// A log-domain scalar estimate with provenance.
#[derive(Clone, Debug)]
pub struct LogEstimate {
    pub value: f64,
    pub estimator: EstimatorId,
    pub direction: Direction,
    pub trial_seed: u64,
    pub n_chains: usize,
    /// Budget summary, e.g. "T=10000" or "sweeps_per_point=50".
    pub config: String,
}

impl LogEstimate {
    pub fn new(
        value: f64,
        estimator: EstimatorId,
        stream: &RngStream,
        n_chains: usize,
        config: String,
    ) -> Self {
        LogEstimate {
            value,
            estimator,
            direction: estimator.direction(),
            trial_seed: stream.trial_tag(),
            n_chains,
            config,
        }
    }
}

/// Paired stochastic bounds from one bidirectional run.
#[derive(Clone, Debug)]
pub struct SandwichResult {
    pub lower: LogEstimate,
    pub upper: LogEstimate,
    /// upper - lower, in nats. May be negative on unlucky runs.
    pub gap: f64,
    /// Stochastic upper bound on the KL divergence of the forward sampler's
    /// output from the true posterior: equal to the gap.
    pub kl_bound: f64,
}

impl SandwichResult {
    pub fn new(lower: LogEstimate, upper: LogEstimate) -> Self {
        let gap = upper.value - lower.value;
        SandwichResult {
            lower,
            upper,
            gap,
            kl_bound: gap,
        }
    }

    /// Midpoint of the two bounds, the declared ground truth once the gap is
    /// small.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower.value + self.upper.value)
    }
}
