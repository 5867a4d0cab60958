use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{bootstrap_r2, BootstrapConfig, EvalError, EvalResult, TopicObservation};

/// Difference of bootstrap means between two measures, `a − b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDelta {
    pub a: String,
    pub b: String,
    pub delta: f64,
    /// `sqrt(sd_a² + sd_b²)`.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Ranked by bootstrap mean, best first; ties keep measure-name order.
    pub results: Vec<EvalResult>,
    pub deltas: Vec<MeasureDelta>,
}

/// Bootstraps every measure over a shared topic set and reports pairwise
/// differences. Baselines supplied as precomputed columns are treated like
/// any other measure.
pub fn compare_measures(
    by_measure: &BTreeMap<String, Vec<TopicObservation>>,
    config: &BootstrapConfig,
) -> Result<Comparison, EvalError> {
    let topic_sets: BTreeMap<&String, BTreeSet<&str>> = by_measure
        .iter()
        .map(|(m, obs)| (m, obs.iter().map(|o| o.topic_id.as_str()).collect()))
        .collect();
    let all: BTreeSet<&str> = topic_sets.values().flatten().copied().collect();
    for (measure, topics) in &topic_sets {
        let missing: Vec<String> = all.difference(topics).map(|s| s.to_string()).collect();
        if !missing.is_empty() {
            return Err(EvalError::TopicSetMismatch {
                measure: (*measure).clone(),
                missing,
            });
        }
    }

    let mut results = by_measure
        .values()
        .map(|obs| bootstrap_r2(obs, config))
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| b.boot_mean.total_cmp(&a.boot_mean));

    let mut deltas = Vec::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            deltas.push(MeasureDelta {
                a: a.measure_name.clone(),
                b: b.measure_name.clone(),
                delta: a.boot_mean - b.boot_mean,
                sd: (a.boot_sd * a.boot_sd + b.boot_sd * b.boot_sd).sqrt(),
            });
        }
    }
    Ok(Comparison { results, deltas })
}
