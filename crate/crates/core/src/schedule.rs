//! Annealing schedules bridging prior (beta = 0) and posterior (beta = 1).

use crate::error::{Error, Result};

/// A monotone inverse-temperature ladder with exact endpoints 0 and 1.
#[derive(Clone, Debug)]
pub struct AnnealingSchedule {
    betas: Vec<f64>,
    delta: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl AnnealingSchedule {
    /// Sigmoidal schedule: raw values sigma(delta * u) on the symmetric grid
    /// u in [-1, 1], rescaled so the endpoints are exactly 0 and 1. Allocates
    /// more intermediate distributions near both endpoints, where a linear
    /// path is unstable.
    pub fn sigmoid(t: usize, delta: f64) -> Result<Self> {
        if t < 2 {
            return Err(Error::InvalidParameter(format!(
                "schedule needs at least 2 distributions, got {t}"
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigmoid sharpness must be positive, got {delta}"
            )));
        }
        let lo = sigmoid(-delta);
        let hi = sigmoid(delta);
        let mut betas: Vec<f64> = (0..t)
            .map(|i| {
                let u = 2.0 * i as f64 / (t - 1) as f64 - 1.0;
                (sigmoid(delta * u) - lo) / (hi - lo)
            })
            .collect();
        betas[0] = 0.0;
        betas[t - 1] = 1.0;
        Ok(AnnealingSchedule { betas, delta })
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 || betas[0] != 0.0 || *betas.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(
                "schedule must start at exactly 0 and end at exactly 1".into(),
            ));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("schedule must be non-decreasing".into()));
        }
        Ok(AnnealingSchedule { betas, delta: f64::NAN })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_exact() {
        for (t, delta) in [(2, 4.0), (3, 1.0), (11, 4.0), (1000, 7.5)] {
            let s = AnnealingSchedule::sigmoid(t, delta).unwrap();
            assert_eq!(s.betas()[0], 0.0);
            assert_eq!(*s.betas().last().unwrap(), 1.0);
            assert_eq!(s.len(), t);
            assert!(s.betas().windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn sigmoid_symmetry() {
        // beta_t + beta_{T+1-t} = 1 by the symmetry of the sigmoid about 0.
        let s = AnnealingSchedule::sigmoid(11, 4.0).unwrap();
        let b = s.betas();
        for t in 0..11 {
            assert!((b[t] + b[10 - t] - 1.0).abs() < 1e-12, "t = {t}");
        }
        // odd length, delta = 4: the midpoint is exactly 1/2
        assert!((b[5] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(AnnealingSchedule::sigmoid(1, 4.0).is_err());
        assert!(AnnealingSchedule::sigmoid(10, 0.0).is_err());
        assert!(AnnealingSchedule::from_betas(vec![0.0, 0.5]).is_err());
        assert!(AnnealingSchedule::from_betas(vec![0.1, 1.0]).is_err());
        assert!(AnnealingSchedule::from_betas(vec![0.0, 0.7, 0.5, 1.0]).is_err());
    }
}
