//! Observations CSV: `topic_id,measure,x,y,n_samples_used,length_variant`.
//!
//! `y` is left empty until factuality is known; `length_variant` is empty
//! for data without length variants.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, TopicObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub topic_id: String,
    pub measure: String,
    pub x: f64,
    pub y: Option<f64>,
    pub n_samples_used: usize,
    #[serde(default)]
    pub length_variant: Option<usize>,
}

impl ObservationRow {
    pub fn to_observation(&self) -> Option<TopicObservation> {
        Some(TopicObservation {
            topic_id: self.topic_id.clone(),
            x: self.x,
            y: self.y?,
            measure_name: self.measure.clone(),
            n_samples_used: self.n_samples_used,
        })
    }

    /// Rows with a factuality value, grouped by measure.
    pub fn group_by_measure<'a>(
        rows: impl IntoIterator<Item = &'a ObservationRow>,
    ) -> BTreeMap<String, Vec<TopicObservation>> {
        let mut out: BTreeMap<String, Vec<TopicObservation>> = BTreeMap::new();
        for row in rows {
            if let Some(o) = row.to_observation() {
                out.entry(o.measure_name.clone()).or_default().push(o);
            }
        }
        out
    }
}

pub fn read_observations(path: &Path) -> Result<Vec<ObservationRow>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::Io(e.to_string()))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| EvalError::Io(format!("row {}: {e}", i + 1))))
        .collect()
}

/// Serializes rows to CSV bytes. Callers decide how the bytes reach disk.
pub fn write_observations(rows: &[ObservationRow]) -> Result<Vec<u8>, EvalError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| EvalError::Io(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| EvalError::Io(e.to_string()))
}
