//! Marginal likelihood estimation toolkit. Simulated-data ground truth via
//! bidirectional Monte Carlo (paired forward and reverse annealed chains),
//! plus a catalogue of estimators benchmarked against that ground truth on
//! three latent-variable models.

pub mod dist;
pub mod error;
pub mod logsum;
pub mod model;
pub mod sweep;
pub mod schedule;
pub mod estimate;
pub mod ais;
pub mod smc;
pub mod estimators;
pub mod rng;

pub use error::{Error, Result};
pub use logsum::{log_harmonic_mean_exp, log_mean_exp, log_sum_exp, LogWeight};
pub use rng::RngStream;
