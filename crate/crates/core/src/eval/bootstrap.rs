use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ols::{fit, ols_r2};
use super::{check_observations, EvalError, EvalResult, TopicObservation};
use crate::par::Exec;

/// Identifies the resampling generator in reports. Iteration `i` draws from
/// `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`.
pub const RNG_FAMILY: &str = "chacha8/rand_chacha-0.9/seed_from_u64+stream=iteration";

/// Redraws allowed for a degenerate resample before it is skipped.
const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 1500,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

enum Draw {
    Ok { r2: f64, redraws: usize },
    Skipped,
}

fn draw(xs: &[f64], ys: &[f64], seed: u64, iteration: usize) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    let n = xs.len();
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for attempt in 0..MAX_REDRAWS {
        for k in 0..n {
            let j = rng.random_range(0..n);
            bx[k] = xs[j];
            by[k] = ys[j];
        }
        if let Ok(f) = fit(&bx, &by) {
            return Draw::Ok {
                r2: f.r2,
                redraws: attempt,
            };
        }
    }
    Draw::Skipped
}

/// Point R² on all topics plus the mean and 1-σ spread of R² over
/// `n_boot` topic resamples drawn with replacement.
///
/// The result depends only on `(observations, n_boot, seed)`; the execution
/// strategy does not change it.
pub fn bootstrap_r2(
    observations: &[TopicObservation],
    config: &BootstrapConfig,
) -> Result<EvalResult, EvalError> {
    check_observations(observations)?;
    let point = ols_r2(observations)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = observations.iter().map(|o| (o.x, o.y)).unzip();

    let draws = config
        .exec
        .map_range(config.n_boot, |i| draw(&xs, &ys, config.seed, i));

    let mut values = Vec::with_capacity(draws.len());
    let mut skipped = 0;
    let mut redrawn = 0;
    for d in draws {
        match d {
            Draw::Ok { r2, redraws } => {
                values.push(r2);
                redrawn += redraws;
            }
            Draw::Skipped => {
                skipped += 1;
                redrawn += MAX_REDRAWS;
            }
        }
    }
    if values.is_empty() && config.n_boot > 0 {
        return Err(EvalError::AllResamplesDegenerate(config.n_boot));
    }
    let (mean, sd) = mean_sd(&values);
    if skipped > 0 {
        log::warn!(
            "{}: skipped {skipped} of {} degenerate bootstrap resamples",
            observations[0].measure_name,
            config.n_boot
        );
    }
    Ok(EvalResult {
        measure_name: observations[0].measure_name.clone(),
        r2: point.r2,
        slope: point.slope,
        intercept: point.intercept,
        boot_mean: mean,
        boot_sd: sd,
        n_topics: observations.len(),
        n_boot: config.n_boot,
        seed: config.seed,
        skipped_resamples: skipped,
        redrawn_resamples: redrawn,
        rng: RNG_FAMILY.to_string(),
        n_samples_used: common_sample_count(observations),
        length_variant: None,
    })
}

fn common_sample_count(obs: &[TopicObservation]) -> Option<usize> {
    let first = obs.first()?.n_samples_used;
    obs.iter().all(|o| o.n_samples_used == first).then_some(first)
}

/// Sample mean and standard deviation (n − 1 denominator).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
