//! Regression of per-topic factuality on an isotropy (or baseline) measure,
//! with topic-level bootstrap error bars.

mod bootstrap;
mod compare;
mod observations;
mod ols;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelError;

pub use bootstrap::{bootstrap_r2, BootstrapConfig, RNG_FAMILY};
pub use compare::{compare_measures, Comparison, MeasureDelta};
pub use observations::{read_observations, write_observations, ObservationRow};
pub use ols::{ols_r2, OlsFit};
pub use sweep::{sweep_cells, sweep_sample_count, SweepCell};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least 3 observations, got {0}")]
    TooFewObservations(usize),
    #[error("observation {index} has a non-finite value")]
    NonFinite { index: usize },
    #[error("regressor has zero variance")]
    DegenerateRegressor,
    #[error("response has zero variance")]
    DegenerateResponse,
    #[error("all {0} bootstrap resamples were degenerate")]
    AllResamplesDegenerate(usize),
    #[error("topic {topic} has fewer than {n} samples")]
    InsufficientSamples { topic: String, n: usize },
    #[error("topic {0} has no factuality score")]
    MissingFactuality(String),
    #[error("measure {measure} is missing topics {missing:?}")]
    TopicSetMismatch { measure: String, missing: Vec<String> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("observations file: {0}")]
    Io(String),
}

/// One topic's (measure, mean factuality) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicObservation {
    pub topic_id: String,
    pub x: f64,
    pub y: f64,
    pub measure_name: String,
    pub n_samples_used: usize,
}

/// R² point estimate with its bootstrap distribution summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub measure_name: String,
    pub r2: f64,
    pub slope: f64,
    pub intercept: f64,
    pub boot_mean: f64,
    pub boot_sd: f64,
    pub n_topics: usize,
    pub n_boot: usize,
    pub seed: u64,
    /// Resamples dropped after exhausting their redraws.
    pub skipped_resamples: usize,
    /// Redraws spent on degenerate resamples, including skipped ones.
    pub redrawn_resamples: usize,
    pub rng: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_variant: Option<usize>,
}

fn check_observations(obs: &[TopicObservation]) -> Result<(), EvalError> {
    if obs.len() < 3 {
        return Err(EvalError::TooFewObservations(obs.len()));
    }
    if let Some(index) = obs.iter().position(|o| !o.x.is_finite() || !o.y.is_finite()) {
        return Err(EvalError::NonFinite { index });
    }
    Ok(())
}
