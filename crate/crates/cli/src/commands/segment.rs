use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde_json::json;

use semiso_core::chat::{ChatClient, HttpChatClient, StubOracle};
use semiso_core::genpipe::ingest_topics;
use semiso_core::segment::{score_topic_responses, ScoredRecord, ScoringConfig, SegmentError, FIDELITY_WARN};
use semiso_core::topic::{Source, Topic};

use super::CommandResult;
use crate::data::{
    fill_y, group_responses, read_observation_rows, read_responses, read_scored, write_factuality, write_jsonl,
    write_observation_rows, FactualityRow, GroupKey,
};
use crate::{Ctx, Failure};

fn oracle(ctx: &Ctx) -> anyhow::Result<Box<dyn ChatClient>> {
    if let Some(dir) = &ctx.global.stub_oracle {
        return Ok(Box::new(StubOracle::new(dir)?));
    }
    let o = &ctx.cfg.oracle;
    let Some(endpoint) = &o.endpoint else {
        bail!("oracle.endpoint is not set and no --stub-oracle given");
    };
    Ok(Box::new(HttpChatClient::new(endpoint, o.auth.clone(), o.rate.unwrap_or(5.0))))
}

fn sort_scored(records: &mut [ScoredRecord]) {
    records.sort_by(|a, b| {
        (&a.topic_id, a.length_variant, a.sample_index).cmp(&(&b.topic_id, b.length_variant, b.sample_index))
    });
}

pub fn run(ctx: &Ctx, topics: Option<PathBuf>) -> CommandResult {
    let paths = &ctx.cfg.paths;
    let topics_path = topics.unwrap_or_else(|| paths.topics.clone());
    let ingest = ingest_topics(&topics_path, Source::Custom).with_context(|| format!("reading {}", topics_path.display()))?;
    let topics: BTreeMap<&str, &Topic> = ingest.topics.iter().map(|t| (t.id.as_str(), t)).collect();
    let client = oracle(ctx)?;
    let mut scoring = ScoringConfig::new(&ctx.cfg.oracle_model);
    scoring.request_logprobs = ctx.cfg.oracle.request_logprobs;

    let records = read_responses(&paths.responses)?;
    if records.is_empty() {
        bail!("no responses in {}", paths.responses.display());
    }
    let mut scored = read_scored(&paths.scores)?;
    let mut done: HashSet<(String, usize, usize)> = scored
        .iter()
        .map(|s| (s.topic_id.clone(), s.sample_index, s.length_variant))
        .collect();

    let mut failures = Vec::new();
    let mut failed_responses = 0;
    let mut newly_scored = 0;
    let mut failed_groups: HashSet<GroupKey> = HashSet::new();
    let groups = group_responses(&records);
    for ((topic_id, lv), recs) in &groups {
        let Some(topic) = topics.get(topic_id.as_str()) else {
            failures.push(Failure {
                scope: format!("topic {topic_id}"),
                error: "not in the topics file".into(),
            });
            failed_groups.insert((topic_id.clone(), *lv));
            continue;
        };
        let todo: Vec<(usize, String)> = recs
            .iter()
            .filter(|r| !done.contains(&(topic_id.clone(), r.sample_index, *lv)))
            .map(|r| (r.sample_index, r.text.clone()))
            .collect();
        if todo.is_empty() {
            continue;
        }
        match score_topic_responses(topic, &todo, client.as_ref(), &scoring, ctx.exec) {
            Ok(ts) => {
                failed_responses += ts.failures.len();
                for (idx, s) in ts.scored {
                    done.insert((topic_id.clone(), idx, *lv));
                    scored.push(ScoredRecord {
                        topic_id: topic_id.clone(),
                        sample_index: idx,
                        length_variant: *lv,
                        scored: s,
                    });
                    newly_scored += 1;
                }
                sort_scored(&mut scored);
                write_jsonl(&paths.scores, &scored)?;
            }
            Err(SegmentError::TopicFailed { failed, total, failures: f, .. }) => {
                failed_responses += failed;
                let detail: Vec<String> = f.iter().map(|x| format!("#{}: {}", x.index, x.error)).collect();
                failures.push(Failure {
                    scope: format!("topic {topic_id} length {lv}"),
                    error: format!("{failed} of {total} responses failed: {}", detail.join("; ")),
                });
                failed_groups.insert((topic_id.clone(), *lv));
            }
            Err(e) => {
                failures.push(Failure {
                    scope: format!("topic {topic_id} length {lv}"),
                    error: e.to_string(),
                });
                failed_groups.insert((topic_id.clone(), *lv));
            }
        }
    }

    // Factuality is recomputed from everything scored so far, so resumed
    // runs agree with uninterrupted ones.
    let mut phis: BTreeMap<GroupKey, FactualityRow> = BTreeMap::new();
    let mut sums: BTreeMap<GroupKey, (f64, usize)> = BTreeMap::new();
    for s in &scored {
        let e = sums.entry((s.topic_id.clone(), s.length_variant)).or_default();
        e.0 += s.scored.phi;
        e.1 += 1;
    }
    for (key, recs) in &groups {
        if failed_groups.contains(key) {
            continue;
        }
        let Some(&(sum, n)) = sums.get(key) else { continue };
        if 2 * n < recs.len() {
            continue;
        }
        phis.insert(
            key.clone(),
            FactualityRow {
                topic_id: key.0.clone(),
                length_variant: key.1,
                mean_phi: sum / n as f64,
                n_scored: n,
                n_failed: recs.len() - n,
            },
        );
    }
    write_factuality(&paths.factuality(), &phis)?;

    let obs_path = paths.observations();
    let mut filled = 0;
    if obs_path.exists() {
        let mut rows = read_observation_rows(&obs_path)?;
        filled = fill_y(&mut rows, &phis);
        write_observation_rows(&obs_path, &rows)?;
    }

    let low_fidelity = scored.iter().filter(|s| s.scored.fidelity < FIDELITY_WARN).count();
    Ok((
        json!({
            "groups": groups.len(),
            "scored": newly_scored,
            "total_scored": scored.len(),
            "failed_responses": failed_responses,
            "low_fidelity": low_fidelity,
            "factuality_rows": phis.len(),
            "observations_filled": filled,
        }),
        failures,
    ))
}
