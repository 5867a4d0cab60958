use std::collections::BTreeSet;

use anyhow::bail;
use serde_json::json;

use semiso_core::eval::ObservationRow;
use semiso_core::kernel::{score_topic, EmbeddingSet, KernelError};

use super::{embed_client, CommandResult};
use crate::config::parse_measures;
use crate::data::{group_responses, read_factuality, read_observation_rows, read_responses, write_observation_rows};
use crate::{Ctx, Failure};

pub fn run(ctx: &Ctx) -> CommandResult {
    let paths = &ctx.cfg.paths;
    let measures = parse_measures(&ctx.measure_names())?;
    if measures.is_empty() {
        bail!("no measures selected");
    }
    let client = embed_client(ctx)?;
    let records = read_responses(&paths.responses)?;
    if records.is_empty() {
        bail!("no responses in {}", paths.responses.display());
    }
    let phis = read_factuality(&paths.factuality())?;
    let groups: Vec<_> = group_responses(&records).into_iter().collect();

    // Groups run in parallel; the embed client's in-flight dedup keeps
    // shared texts to a single request.
    let scored = ctx.exec.map_slice(&groups, |((topic, lv), recs)| {
        let texts: Vec<String> = recs.iter().map(|r| r.text.clone()).collect();
        let embeddings = client.embed_text(&texts).map_err(|e| e.to_string())?;
        let set = EmbeddingSet::new(embeddings).map_err(|e| e.to_string())?;
        let n = set.len();
        match score_topic(&set, &measures) {
            Ok(report) => Ok(Some((topic.clone(), *lv, n, report))),
            Err(KernelError::TooFewSamples(_)) => Ok(None),
            Err(e) => Err(e.to_string()),
        }
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut too_few = Vec::new();
    for (((topic, lv), _), result) in groups.iter().zip(scored) {
        match result {
            Ok(Some((topic, lv, n, report))) => {
                let y = phis.get(&(topic.clone(), lv)).map(|f| f.mean_phi);
                for &m in &measures {
                    rows.push(ObservationRow {
                        topic_id: topic.clone(),
                        measure: m.name().to_string(),
                        x: report.value(m).expect("requested measure is present"),
                        y,
                        n_samples_used: n,
                        length_variant: Some(lv),
                    });
                }
            }
            Ok(None) => too_few.push(format!("{topic}@{lv}")),
            Err(e) => failures.push(Failure {
                scope: format!("topic {topic} length {lv}"),
                error: e,
            }),
        }
    }

    // Keep rows for other measures, such as precomputed baselines.
    let computed: BTreeSet<&str> = measures.iter().map(|m| m.name()).collect();
    let obs_path = paths.observations();
    let mut merged: Vec<ObservationRow> = read_observation_rows(&obs_path)?
        .into_iter()
        .filter(|r| !computed.contains(r.measure.as_str()))
        .collect();
    let new_rows = rows.len();
    merged.extend(rows);
    merged.sort_by(|a, b| {
        (&a.measure, a.length_variant, &a.topic_id).cmp(&(&b.measure, b.length_variant, &b.topic_id))
    });
    write_observation_rows(&obs_path, &merged)?;

    let with_y = merged.iter().filter(|r| r.y.is_some()).count();
    Ok((
        json!({
            "groups": groups.len(),
            "rows": new_rows,
            "rows_with_factuality": with_y,
            "too_few_samples": too_few,
            "observations": obs_path,
        }),
        failures,
    ))
}
