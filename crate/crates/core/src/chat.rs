//! Chat-completion clients used as generator and oracle.
//!
//! Wire format (OpenAI-compatible):
//! `{"model", "messages": [{"role", "content"}], "temperature"}` →
//! `{"choices": [{"message": {"content"}, "logprobs"?: {"content": [...]}}]}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicU64;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::retry::{post_with_retry, HttpTransport, JsonTransport, RateLimiter, RequestError, RetryPolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChatError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error("malformed chat response: {0}")]
    Malformed(String),
    #[error("stub: {0}")]
    Stub(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: Option<f64>,
    /// Sampling seed, sent only to providers that accept one.
    pub seed: Option<u64>,
    /// Ask for per-token log-probabilities of the reply.
    pub logprobs: bool,
    /// Local routing metadata (topic id, sample index); never sent.
    pub tags: BTreeMap<String, String>,
}

impl ChatRequest {
    pub fn tag(mut self, key: &str, value: impl ToString) -> Self {
        self.tags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_wire(&self) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": self.messages,
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(s) = self.seed {
            body["seed"] = json!(s);
        }
        if self.logprobs {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(5);
        }
        body
    }
}

/// A sampled token with its log-probability and the top alternatives at
/// that position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
    #[serde(default, rename = "top_logprobs")]
    pub top: Vec<TopLogprob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopLogprob {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatResponse {
    pub content: String,
    pub logprobs: Option<Vec<TokenLogprob>>,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            logprobs: None,
        }
    }

    pub fn from_wire(body: &str) -> Result<Self, ChatError> {
        #[derive(Deserialize)]
        struct Wire {
            choices: Vec<Choice>,
        }
        #[derive(Deserialize)]
        struct Choice {
            message: Message,
            #[serde(default)]
            logprobs: Option<Logprobs>,
        }
        #[derive(Deserialize)]
        struct Message {
            content: Option<String>,
        }
        #[derive(Deserialize)]
        struct Logprobs {
            #[serde(default)]
            content: Option<Vec<TokenLogprob>>,
        }
        let wire: Wire = serde_json::from_str(body).map_err(|e| ChatError::Malformed(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ChatError::Malformed("no choices".into()))?;
        let content = choice
            .message
            .content
            .ok_or_else(|| ChatError::Malformed("choice has no content".into()))?;
        Ok(Self {
            content,
            logprobs: choice.logprobs.and_then(|l| l.content),
        })
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

/// Chat client over HTTP with retries and a shared rate limit.
pub struct HttpChatClient {
    transport: Box<dyn JsonTransport>,
    policy: RetryPolicy,
    limiter: Arc<RateLimiter>,
    retries: AtomicU64,
}

impl HttpChatClient {
    pub fn new(endpoint: &str, auth_env: Option<String>, rate: f64) -> Self {
        Self::with_transport(
            Box::new(HttpTransport::new(endpoint, auth_env, Duration::from_secs(300))),
            RetryPolicy::default(),
            Arc::new(RateLimiter::new(rate)),
        )
    }

    pub fn with_transport(
        transport: Box<dyn JsonTransport>,
        policy: RetryPolicy,
        limiter: Arc<RateLimiter>,
    ) -> Self {
        Self {
            transport,
            policy,
            limiter,
            retries: AtomicU64::new(0),
        }
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(std::sync::atomic::Ordering::Relaxed)
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let reply = post_with_retry(
            self.transport.as_ref(),
            &request.to_wire(),
            &self.policy,
            &self.limiter,
            &self.retries,
        )?;
        ChatResponse::from_wire(&reply.body)
    }
}

fn digest_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Offline generator. The stub file holds one or more passages separated by
/// lines consisting of `---`; each request gets one passage chosen from a
/// hash of the prompt and seed. A single passage is echoed verbatim.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    passages: Vec<String>,
}

impl StubGenerator {
    pub fn new(passages: Vec<String>) -> Result<Self, ChatError> {
        if passages.is_empty() || passages.iter().any(|p| p.trim().is_empty()) {
            return Err(ChatError::Stub("stub generator needs non-empty passages".into()));
        }
        Ok(Self { passages })
    }

    pub fn parse(text: &str) -> Result<Self, ChatError> {
        let mut passages = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            if line.trim() == "---" {
                passages.push(current.join("\n").trim().to_string());
                current.clear();
            } else {
                current.push(line);
            }
        }
        passages.push(current.join("\n").trim().to_string());
        passages.retain(|p| !p.is_empty());
        Self::new(passages)
    }

    pub fn from_file(path: &Path) -> Result<Self, ChatError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChatError::Stub(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl ChatClient for StubGenerator {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        if self.passages.len() == 1 {
            return Ok(ChatResponse::text(self.passages[0].clone()));
        }
        let prompt = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let seed = request.seed.unwrap_or(0).to_le_bytes();
        let pick = digest_u64(&[prompt.as_bytes(), &seed]) as usize % self.passages.len();
        Ok(ChatResponse::text(self.passages[pick].clone()))
    }
}

/// Offline oracle replaying transcripts from a directory. For a request
/// tagged with `topic_id` and `sample_index` it serves the first existing
/// file among `<topic>__<index>.xml`, `<topic>.xml` and `default.xml`
/// (`.txt` is accepted in place of `.xml`).
#[derive(Debug, Clone)]
pub struct StubOracle {
    dir: PathBuf,
}

impl StubOracle {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ChatError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(ChatError::Stub(format!("{} is not a directory", dir.display())));
        }
        Ok(Self { dir })
    }

    fn candidates(&self, request: &ChatRequest) -> Vec<PathBuf> {
        let mut stems = Vec::new();
        if let Some(topic) = request.tags.get("topic_id") {
            if let Some(i) = request.tags.get("sample_index") {
                stems.push(format!("{topic}__{i}"));
            }
            stems.push(topic.clone());
        }
        stems.push("default".into());
        stems
            .iter()
            .flat_map(|s| ["xml", "txt"].map(|ext| self.dir.join(format!("{s}.{ext}"))))
            .collect()
    }
}

impl ChatClient for StubOracle {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        for path in self.candidates(request) {
            if path.is_file() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ChatError::Stub(format!("{}: {e}", path.display())))?;
                return Ok(ChatResponse::text(text));
            }
        }
        Err(ChatError::Stub(format!(
            "no transcript for {:?} in {}",
            request.tags,
            self.dir.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_request_shape() {
        let req = ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::user("hi")],
            temperature: Some(0.7),
            ..Default::default()
        }
        .tag("topic_id", "t1");
        assert_eq!(
            req.to_wire(),
            json!({"model": "m", "messages": [{"role": "user", "content": "hi"}], "temperature": 0.7})
        );
    }

    #[test]
    fn wire_response_with_logprobs() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"1"},
            "logprobs":{"content":[{"token":"1","logprob":-0.1,
            "top_logprobs":[{"token":"1","logprob":-0.1},{"token":"0","logprob":-2.4}]}]}}]}"#;
        let r = ChatResponse::from_wire(body).unwrap();
        assert_eq!(r.content, "1");
        let lp = r.logprobs.unwrap();
        assert_eq!(lp[0].top.len(), 2);
        assert!(ChatResponse::from_wire(r#"{"choices":[]}"#).is_err());
    }

    #[test]
    fn stub_generator_echoes_single_passage() {
        let g = StubGenerator::parse("Fixed text here.\n").unwrap();
        let req = ChatRequest {
            seed: Some(3),
            ..Default::default()
        };
        assert_eq!(g.complete(&req).unwrap().content, "Fixed text here.");
    }

    #[test]
    fn stub_generator_picks_deterministically() {
        let g = StubGenerator::parse("A one.\n---\nB two.\n---\nC three.").unwrap();
        let req = |seed| ChatRequest {
            messages: vec![ChatMessage::user("about x")],
            seed: Some(seed),
            ..Default::default()
        };
        let picks: Vec<String> = (0..30).map(|s| g.complete(&req(s)).unwrap().content).collect();
        let again: Vec<String> = (0..30).map(|s| g.complete(&req(s)).unwrap().content).collect();
        assert_eq!(picks, again);
        assert!(picks.iter().any(|p| p != &picks[0]));
    }

    #[test]
    fn stub_oracle_lookup_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("default.xml"), "D").unwrap();
        std::fs::write(dir.path().join("t1.xml"), "T").unwrap();
        std::fs::write(dir.path().join("t1__2.txt"), "S").unwrap();
        let o = StubOracle::new(dir.path()).unwrap();
        let ask = |t: &str, i: usize| {
            o.complete(&ChatRequest::default().tag("topic_id", t).tag("sample_index", i))
                .unwrap()
                .content
        };
        assert_eq!(ask("t1", 2), "S");
        assert_eq!(ask("t1", 0), "T");
        assert_eq!(ask("t9", 0), "D");
    }
}
