use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde_json::json;

use semiso_core::chat::{ChatClient, HttpChatClient, StubGenerator};
use semiso_core::genpipe::{derive_length_variants, generate_samples, ingest_topics, ResponseRecord};
use semiso_core::topic::Source;

use super::CommandResult;
use crate::data::{read_responses, sort_responses, write_jsonl};
use crate::{Ctx, Failure};

fn generator(ctx: &Ctx) -> anyhow::Result<Box<dyn ChatClient>> {
    if let Some(path) = &ctx.global.stub_generator {
        return Ok(Box::new(StubGenerator::from_file(path)?));
    }
    let g = &ctx.cfg.generator;
    let Some(endpoint) = &g.endpoint else {
        bail!("generator.endpoint is not set and no --stub-generator given");
    };
    Ok(Box::new(HttpChatClient::new(endpoint, g.auth.clone(), g.rate)))
}

type Key = (String, usize, usize);

fn key(r: &ResponseRecord) -> Key {
    (r.topic_id.clone(), r.sample_index, r.length_variant)
}

pub fn run(ctx: &Ctx, topics: Option<PathBuf>, max_topics: Option<usize>) -> CommandResult {
    let paths = &ctx.cfg.paths;
    let topics_path = topics.unwrap_or_else(|| paths.topics.clone());
    let ingest = ingest_topics(&topics_path, Source::Custom).with_context(|| format!("reading {}", topics_path.display()))?;
    let gen_cfg = ctx.cfg.generator.generation_config();
    let base = gen_cfg.word_target;
    let targets: BTreeSet<usize> = ctx.cfg.generator.length_targets.iter().copied().filter(|&t| t != base).collect();
    let client = generator(ctx)?;

    let mut records = read_responses(&paths.responses)?;
    let mut have: HashSet<Key> = records.iter().map(key).collect();
    let (mut generated, mut derived, mut sampled_topics) = (0, 0, 0);
    let mut failures = Vec::new();
    let mut incomplete = Vec::new();
    let mut stopped_early = false;

    for topic in &ingest.topics {
        let mut changed = false;
        let missing: Vec<usize> = (0..gen_cfg.n_samples)
            .filter(|&i| !have.contains(&(topic.id.clone(), i, base)))
            .collect();
        if !missing.is_empty() {
            if max_topics.is_some_and(|m| sampled_topics >= m) {
                stopped_early = true;
                break;
            }
            sampled_topics += 1;
            let outcome = generate_samples(topic, &gen_cfg, client.as_ref(), &missing, ctx.exec)?;
            generated += outcome.records.len();
            for r in outcome.records {
                have.insert(key(&r));
                records.push(r);
            }
            changed = true;
            let present = (0..gen_cfg.n_samples)
                .filter(|&i| have.contains(&(topic.id.clone(), i, base)))
                .count();
            if !outcome.errors.is_empty() {
                let errors: Vec<String> = outcome.errors.iter().map(ToString::to_string).collect();
                if 2 * present < gen_cfg.n_samples {
                    failures.push(Failure {
                        scope: format!("topic {}", topic.id),
                        error: format!("{present} of {} samples present: {}", gen_cfg.n_samples, errors.join("; ")),
                    });
                } else {
                    incomplete.push(json!({ "topic": topic.id, "present": present, "errors": errors }));
                }
            }
        }

        let base_records: Vec<ResponseRecord> = records
            .iter()
            .filter(|r| r.topic_id == topic.id && r.length_variant == base)
            .cloned()
            .collect();
        for &target in &targets {
            let todo: Vec<ResponseRecord> = base_records
                .iter()
                .filter(|r| !have.contains(&(topic.id.clone(), r.sample_index, target)))
                .cloned()
                .collect();
            if todo.is_empty() {
                continue;
            }
            for v in derive_length_variants(&todo, &[target]) {
                have.insert(key(&v));
                records.push(v);
                derived += 1;
            }
            changed = true;
        }
        if changed {
            sort_responses(&mut records);
            write_jsonl(&paths.responses, &records)?;
        }
    }

    let hard_cuts = records.iter().filter(|r| r.hard_cut).count();
    Ok((
        json!({
            "topics": ingest.topics.len(),
            "skipped_topics": ingest.skipped,
            "generated": generated,
            "derived": derived,
            "records": records.len(),
            "hard_cuts": hard_cuts,
            "incomplete_topics": incomplete,
            "stopped_early": stopped_early,
        }),
        failures,
    ))
}
