use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::bail;
use serde_json::json;

use semiso_core::embed::{load_hidden_states, CacheKey, EmbeddingCache};

use super::{embed_client, CommandResult};
use crate::data::read_responses;
use crate::{Ctx, Failure};

pub fn run(ctx: &Ctx, hidden_states: Option<PathBuf>) -> CommandResult {
    let client = embed_client(ctx)?;
    let spec = client.spec().clone();
    let records = read_responses(&ctx.cfg.paths.responses)?;
    if records.is_empty() {
        bail!("no responses in {}", ctx.cfg.paths.responses.display());
    }

    if let Some(path) = hidden_states {
        let matrices = load_hidden_states(&path)?;
        let texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
        client.ingest_hidden_states(&texts, &matrices)?;
        return Ok((json!({ "provider": spec.name, "ingested": texts.len() }), Vec::new()));
    }

    let mut seen = HashSet::new();
    let unique: Vec<String> = records
        .iter()
        .filter(|r| seen.insert(r.text.as_str()))
        .map(|r| r.text.clone())
        .collect();
    let cache = EmbeddingCache::open(&ctx.cfg.paths.embeddings_cache)?;
    let mut cache_hits = 0;
    let mut todo = Vec::new();
    for text in &unique {
        if cache.get(&CacheKey::new(&spec.name, text, spec.pooling))?.is_some() {
            cache_hits += 1;
        } else {
            todo.push(text.clone());
        }
    }

    let batches: Vec<&[String]> = todo.chunks(spec.max_batch).collect();
    let results = ctx.exec.map_slice(&batches, |batch| client.embed_text(batch));
    let mut embedded = 0;
    let mut failures = Vec::new();
    let mut offset = 0;
    for (batch, result) in batches.iter().zip(results) {
        match result {
            Ok(v) => embedded += v.len(),
            Err(e) => failures.push(Failure {
                scope: format!("texts {}..{}", offset, offset + batch.len()),
                error: e.to_string(),
            }),
        }
        offset += batch.len();
    }
    let stats = client.stats();
    Ok((
        json!({
            "provider": spec.name,
            "texts": unique.len(),
            "embedded": embedded,
            "cache_hits": cache_hits,
            "requests": stats.requests,
            "retries": stats.retries,
            "failed": todo.len() - embedded,
        }),
        failures,
    ))
}
