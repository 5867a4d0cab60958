//! Reading and writing the pipeline's intermediate files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use semiso_core::eval::{read_observations, write_observations, ObservationRow};
use semiso_core::genpipe::ResponseRecord;
use semiso_core::io::{atomic_write, read_jsonl, to_jsonl};
use semiso_core::segment::ScoredRecord;

/// `(topic_id, length_variant)`
pub type GroupKey = (String, usize);

pub fn read_jsonl_or_empty<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    atomic_write(path, &to_jsonl(items)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>> {
    read_jsonl_or_empty(path)
}

/// Stable on-disk order: topic, then length variant, then sample index.
pub fn sort_responses(records: &mut [ResponseRecord]) {
    records.sort_by(|a, b| {
        (&a.topic_id, a.length_variant, a.sample_index).cmp(&(&b.topic_id, b.length_variant, b.sample_index))
    });
}

/// Responses grouped by topic and length variant, each group in
/// sample-index order.
pub fn group_responses(records: &[ResponseRecord]) -> BTreeMap<GroupKey, Vec<&ResponseRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<&ResponseRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.topic_id.clone(), r.length_variant)).or_default().push(r);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|r| r.sample_index);
    }
    groups
}

pub fn read_scored(path: &Path) -> Result<Vec<ScoredRecord>> {
    read_jsonl_or_empty(path)
}

/// Mean factuality of one topic at one length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactualityRow {
    pub topic_id: String,
    pub length_variant: usize,
    pub mean_phi: f64,
    pub n_scored: usize,
    pub n_failed: usize,
}

pub fn read_factuality(path: &Path) -> Result<BTreeMap<GroupKey, FactualityRow>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize() {
        let row: FactualityRow = row.with_context(|| format!("parsing {}", path.display()))?;
        out.insert((row.topic_id.clone(), row.length_variant), row);
    }
    Ok(out)
}

pub fn write_factuality(path: &Path, rows: &BTreeMap<GroupKey, FactualityRow>) -> Result<()> {
    write_csv(path, rows.values())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    atomic_write(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_observation_rows(path: &Path) -> Result<Vec<ObservationRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_observations(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_observation_rows(path: &Path, rows: &[ObservationRow]) -> Result<()> {
    let bytes = write_observations(rows)?;
    atomic_write(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

/// Copies factuality into the `y` column of matching observation rows.
pub fn fill_y(rows: &mut [ObservationRow], phis: &BTreeMap<GroupKey, FactualityRow>) -> usize {
    let mut filled = 0;
    for row in rows.iter_mut() {
        let Some(lv) = row.length_variant else { continue };
        if let Some(f) = phis.get(&(row.topic_id.clone(), lv)) {
            row.y = Some(f.mean_phi);
            filled += 1;
        }
    }
    filled
}
