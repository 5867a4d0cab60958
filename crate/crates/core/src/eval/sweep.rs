use std::collections::BTreeMap;

use serde::Serialize;

use super::{bootstrap_r2, BootstrapConfig, EvalError, EvalResult, TopicObservation};
use crate::kernel::{score_topic, EmbeddingSet, Measure};

/// One point of a sample-count sweep; `result` is an error when the cell
/// could not be computed.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub n: usize,
    pub result: Result<EvalResult, String>,
}

fn cell(
    embeddings: &BTreeMap<String, EmbeddingSet>,
    phis: &BTreeMap<String, f64>,
    n: usize,
    measure: Measure,
    config: &BootstrapConfig,
) -> Result<EvalResult, EvalError> {
    for (topic, set) in embeddings {
        if set.len() < n {
            return Err(EvalError::InsufficientSamples {
                topic: topic.clone(),
                n,
            });
        }
        if !phis.contains_key(topic) {
            return Err(EvalError::MissingFactuality(topic.clone()));
        }
    }
    let topics: Vec<(&String, &EmbeddingSet)> = embeddings.iter().collect();
    let scored = config.exec.map_slice(&topics, |(topic, set)| {
        let report = score_topic(&set.take(n)?, &[measure])?;
        Ok::<_, EvalError>(TopicObservation {
            topic_id: (*topic).clone(),
            x: report.value(measure).expect("requested measure is present"),
            y: phis[*topic],
            measure_name: measure.name().to_string(),
            n_samples_used: n,
        })
    });
    let observations = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut result = bootstrap_r2(&observations, config)?;
    result.n_samples_used = Some(n);
    Ok(result)
}

/// Scores the first `n` responses of every topic for each `n` and
/// bootstraps R² against the topic factuality. Stops at the first failing
/// cell.
pub fn sweep_sample_count(
    embeddings: &BTreeMap<String, EmbeddingSet>,
    phis: &BTreeMap<String, f64>,
    n_values: &[usize],
    measure: Measure,
    config: &BootstrapConfig,
) -> Result<Vec<EvalResult>, EvalError> {
    n_values
        .iter()
        .map(|&n| cell(embeddings, phis, n, measure, config))
        .collect()
}

/// Like [`sweep_sample_count`] but keeps going past failing cells.
pub fn sweep_cells(
    embeddings: &BTreeMap<String, EmbeddingSet>,
    phis: &BTreeMap<String, f64>,
    n_values: &[usize],
    measure: Measure,
    config: &BootstrapConfig,
) -> Vec<SweepCell> {
    n_values
        .iter()
        .map(|&n| SweepCell {
            n,
            result: cell(embeddings, phis, n, measure, config).map_err(|e| e.to_string()),
        })
        .collect()
}
