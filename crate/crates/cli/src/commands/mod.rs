pub mod embed;
pub mod evaluate;
pub mod generate;
pub mod report;
pub mod score;
pub mod segment;
pub mod sweep;

use std::sync::Arc;

use anyhow::{Context, Result};
use serde_json::Value;

use semiso_core::embed::{EmbedClient, EmbeddingCache};

use crate::{Ctx, Failure};

pub type CommandResult = Result<(Value, Vec<Failure>)>;

pub fn embed_client(ctx: &Ctx) -> Result<EmbedClient> {
    let spec = ctx.cfg.provider(ctx.global.provider.as_deref())?.clone();
    let cache = EmbeddingCache::open(&ctx.cfg.paths.embeddings_cache)
        .with_context(|| format!("opening cache {}", ctx.cfg.paths.embeddings_cache.display()))?;
    Ok(EmbedClient::new(spec, Some(Arc::new(cache)))?)
}
