use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::pooling::pool;
use super::{CacheKey, EmbedError, EmbeddingCache, FieldMap, HiddenStateMatrix, ProviderSpec};
use crate::kernel::Embedding;
use crate::retry::{post_with_retry, HttpReply, HttpTransport, JsonTransport, RateLimiter, RetryPolicy, TransportError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EmbedStats {
    /// Provider calls, not counting retries.
    pub requests: u64,
    pub retries: u64,
    pub cache_hits: u64,
}

type SlotResult = Result<Vec<f64>, EmbedError>;

#[derive(Default)]
struct Slot {
    result: Mutex<Option<SlotResult>>,
    ready: Condvar,
}

impl Slot {
    fn fill(&self, r: SlotResult) {
        *self.result.lock().expect("slot poisoned") = Some(r);
        self.ready.notify_all();
    }

    fn wait(&self) -> SlotResult {
        let mut guard = self.result.lock().expect("slot poisoned");
        loop {
            if let Some(r) = guard.as_ref() {
                return r.clone();
            }
            guard = self.ready.wait(guard).expect("slot poisoned");
        }
    }
}

/// Embeds texts through one provider. Safe to share between threads: the
/// rate limit is global to the client, cache writes are serialized, and
/// concurrent requests for the same key make one provider call.
pub struct EmbedClient {
    spec: ProviderSpec,
    transport: Option<Box<dyn JsonTransport>>,
    policy: RetryPolicy,
    limiter: RateLimiter,
    cache: Option<Arc<EmbeddingCache>>,
    in_flight: Mutex<HashMap<String, Arc<Slot>>>,
    requests: AtomicU64,
    retries: AtomicU64,
    cache_hits: AtomicU64,
}

impl EmbedClient {
    /// Chooses the transport from the endpoint: `stub://` uses
    /// [`HashingTransport`], `http(s)://` goes over the network, and a file
    /// path means a hidden-state provider served only from the cache.
    pub fn new(spec: ProviderSpec, cache: Option<Arc<EmbeddingCache>>) -> Result<Self, EmbedError> {
        spec.validate()?;
        let transport: Option<Box<dyn JsonTransport>> = if let Some(rest) = spec.endpoint.strip_prefix("stub://") {
            // `stub://?dim=N` answers with N-dimensional vectors regardless of `spec.dim`.
            let dim = match rest.split_once("dim=") {
                Some((_, d)) => d
                    .split('&')
                    .next()
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| EmbedError::InvalidSpec(format!("bad stub endpoint {}", spec.endpoint)))?,
                None => spec.dim,
            };
            Some(Box::new(HashingTransport::new(dim, spec.fields.clone())))
        } else if spec.is_remote() {
            Some(Box::new(HttpTransport::new(
                spec.endpoint.clone(),
                spec.auth.clone(),
                Duration::from_secs(120),
            )))
        } else {
            None
        };
        Ok(Self::build(spec, transport, RetryPolicy::default(), cache))
    }

    pub fn with_transport(
        spec: ProviderSpec,
        transport: Box<dyn JsonTransport>,
        policy: RetryPolicy,
        cache: Option<Arc<EmbeddingCache>>,
    ) -> Result<Self, EmbedError> {
        spec.validate()?;
        Ok(Self::build(spec, Some(transport), policy, cache))
    }

    fn build(
        spec: ProviderSpec,
        transport: Option<Box<dyn JsonTransport>>,
        policy: RetryPolicy,
        cache: Option<Arc<EmbeddingCache>>,
    ) -> Self {
        Self {
            limiter: RateLimiter::new(spec.rate),
            spec,
            transport,
            policy,
            cache,
            in_flight: Mutex::new(HashMap::new()),
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    pub fn stats(&self) -> EmbedStats {
        EmbedStats {
            requests: self.requests.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    fn key(&self, text: &str) -> CacheKey {
        CacheKey::new(&self.spec.name, text, self.spec.pooling)
    }

    fn cached(&self, key: &CacheKey) -> Result<Option<Vec<f64>>, EmbedError> {
        match &self.cache {
            Some(c) => c.get(key),
            None => Ok(None),
        }
    }

    /// One embedding per text, in input order.
    pub fn embed_text(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::NoTexts);
        }
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText(i));
        }
        let keys: Vec<CacheKey> = texts.iter().map(|t| self.key(t)).collect();
        let ids: Vec<String> = keys.iter().map(CacheKey::id).collect();
        let mut found: HashMap<String, Vec<f64>> = HashMap::new();

        let mut missing: Vec<usize> = Vec::new();
        for (i, key) in keys.iter().enumerate() {
            if found.contains_key(&ids[i]) || missing.iter().any(|&j| ids[j] == ids[i]) {
                continue;
            }
            match self.cached(key)? {
                Some(v) => {
                    self.cache_hits.fetch_add(1, Ordering::Relaxed);
                    found.insert(ids[i].clone(), v);
                }
                None => missing.push(i),
            }
        }

        let mut owned: Vec<(usize, Arc<Slot>)> = Vec::new();
        let mut waiting: Vec<(usize, Arc<Slot>)> = Vec::new();
        {
            let mut map = self.in_flight.lock().expect("in-flight map poisoned");
            for &i in &missing {
                match map.get(&ids[i]) {
                    Some(slot) => waiting.push((i, slot.clone())),
                    None => {
                        let slot = Arc::new(Slot::default());
                        map.insert(ids[i].clone(), slot.clone());
                        owned.push((i, slot));
                    }
                }
            }
        }

        self.fetch_owned(texts, &keys, &ids, &owned);

        for (i, slot) in owned.iter().chain(waiting.iter()) {
            found.insert(ids[*i].clone(), slot.wait()?);
        }
        ids.iter()
            .map(|id| {
                let v = found[id].clone();
                if v.len() != self.spec.dim {
                    return Err(EmbedError::DimMismatch {
                        expected: self.spec.dim,
                        got: v.len(),
                    });
                }
                Embedding::new(v).map_err(|e| EmbedError::Malformed(e.to_string()))
            })
            .collect()
    }

    /// Fetches every owned key, fills its slot and releases it; never
    /// leaves a slot unfilled, so waiters cannot hang.
    fn fetch_owned(&self, texts: &[String], keys: &[CacheKey], ids: &[String], owned: &[(usize, Arc<Slot>)]) {
        let mut failure: Option<EmbedError> = None;
        for chunk in owned.chunks(self.spec.max_batch) {
            let results: Vec<SlotResult> = match &failure {
                Some(e) => vec![Err(e.clone()); chunk.len()],
                None => {
                    // Another caller may have finished these while we queued.
                    let rechecked: Result<Vec<Option<Vec<f64>>>, EmbedError> =
                        chunk.iter().map(|(i, _)| self.cached(&keys[*i])).collect();
                    match rechecked {
                        Ok(r) if r.iter().all(Option::is_some) => r.into_iter().map(|v| Ok(v.unwrap())).collect(),
                        Ok(_) => {
                            let batch: Vec<&str> = chunk.iter().map(|(i, _)| texts[*i].as_str()).collect();
                            match self.request(&batch) {
                                Ok(vectors) => vectors.into_iter().map(Ok).collect(),
                                Err(e) => {
                                    failure = Some(e.clone());
                                    vec![Err(e); chunk.len()]
                                }
                            }
                        }
                        Err(e) => vec![Err(e); chunk.len()],
                    }
                }
            };
            for ((i, slot), result) in chunk.iter().zip(results) {
                let result = match (result, &self.cache) {
                    (Ok(v), Some(cache)) => cache.put(&keys[*i], &v).map(|_| v),
                    (r, _) => r,
                };
                slot.fill(result);
                self.in_flight.lock().expect("in-flight map poisoned").remove(&ids[*i]);
            }
        }
    }

    fn request(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let Some(transport) = &self.transport else {
            return Err(EmbedError::Unsupported(format!(
                "{} is a hidden-state provider and the text was never ingested",
                self.spec.name
            )));
        };
        let f = &self.spec.fields;
        let mut body = serde_json::Map::new();
        body.insert(f.model.clone(), json!(self.spec.model_id()));
        body.insert(f.input.clone(), json!(batch));
        self.requests.fetch_add(1, Ordering::Relaxed);
        let reply = post_with_retry(
            transport.as_ref(),
            &Value::Object(body),
            &self.policy,
            &self.limiter,
            &self.retries,
        )?;
        parse_reply(&reply.body, f, batch.len(), self.spec.dim)
    }

    /// Pools exported hidden states (one matrix per text, same order) and
    /// stores them so later [`embed_text`](Self::embed_text) calls hit the cache.
    pub fn ingest_hidden_states(
        &self,
        texts: &[String],
        matrices: &[HiddenStateMatrix],
    ) -> Result<Vec<Embedding>, EmbedError> {
        if texts.len() != matrices.len() {
            return Err(EmbedError::CountMismatch {
                texts: texts.len(),
                matrices: matrices.len(),
            });
        }
        let mut out = Vec::with_capacity(texts.len());
        for (i, (text, m)) in texts.iter().zip(matrices).enumerate() {
            if text.trim().is_empty() {
                return Err(EmbedError::EmptyText(i));
            }
            if m.dim() != self.spec.dim {
                return Err(EmbedError::DimMismatch {
                    expected: self.spec.dim,
                    got: m.dim(),
                });
            }
            let e = pool(m, self.spec.pooling)?;
            if let Some(cache) = &self.cache {
                cache.put(&self.key(text), e.values())?;
            }
            out.push(e);
        }
        Ok(out)
    }
}

fn parse_reply(body: &str, f: &FieldMap, expected: usize, dim: usize) -> Result<Vec<Vec<f64>>, EmbedError> {
    let malformed = |m: String| EmbedError::Malformed(m);
    let value: Value = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let data = value
        .get(&f.data)
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(format!("no `{}` array", f.data)))?;
    if data.len() != expected {
        return Err(malformed(format!("{} embeddings for {expected} inputs", data.len())));
    }
    let mut items = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = match item.get(&f.index) {
            Some(v) => v.as_u64().ok_or_else(|| malformed(format!("bad index in item {pos}")))? as usize,
            None => pos,
        };
        let values = item
            .get(&f.embedding)
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(format!("no `{}` in item {pos}", f.embedding)))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| malformed(format!("non-numeric value in item {pos}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != dim {
            return Err(EmbedError::DimMismatch {
                expected: dim,
                got: values.len(),
            });
        }
        items.push((index, values));
    }
    items.sort_by_key(|(i, _)| *i);
    if items.iter().enumerate().any(|(k, (i, _))| k != *i) {
        return Err(malformed("indices are not a permutation of the inputs".into()));
    }
    Ok(items.into_iter().map(|(_, v)| v).collect())
}

/// Offline embedder: signed feature hashing of lowercase word tokens.
/// Texts sharing words get correlated vectors. Answers in reverse order
/// with explicit indices, like providers that do not preserve order.
pub struct HashingTransport {
    dim: usize,
    fields: FieldMap,
}

impl HashingTransport {
    pub fn new(dim: usize, fields: FieldMap) -> Self {
        Self { dim, fields }
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut add = |token: &str| {
            let d = Sha256::digest(token.as_bytes());
            let h = u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"));
            let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        };
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            add(token);
            any = true;
        }
        if !any {
            add(&lower);
        }
        v
    }
}

impl JsonTransport for HashingTransport {
    fn post(&self, body: &Value) -> Result<HttpReply, TransportError> {
        let inputs = body
            .get(&self.fields.input)
            .and_then(Value::as_array)
            .ok_or_else(|| TransportError(format!("request has no `{}` array", self.fields.input)))?;
        let mut data = Vec::with_capacity(inputs.len());
        for (i, t) in inputs.iter().enumerate().rev() {
            let text = t.as_str().ok_or_else(|| TransportError("non-string input".into()))?;
            data.push(json!({ self.fields.index.clone(): i, self.fields.embedding.clone(): self.embed(text) }));
        }
        Ok(HttpReply {
            status: 200,
            body: json!({ self.fields.data.clone(): data }).to_string(),
        })
    }
}
