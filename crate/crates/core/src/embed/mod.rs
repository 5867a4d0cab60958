//! Embedding providers: remote HTTP APIs and exported hidden-state files,
//! behind one client with pooling, batching and a content-addressed cache.

mod cache;
mod client;
mod hidden;
mod pooling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheKey, EmbeddingCache};
pub use client::{EmbedClient, EmbedStats, HashingTransport};
pub use hidden::{encode_hidden_states, load_hidden_states, parse_hidden_states, HiddenStateError};
pub use pooling::{pool, pool_last_token, pool_mean_token, HiddenStateMatrix};

use crate::retry::RequestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Whatever single vector the remote API returns.
    ProviderNative,
    LastToken,
    MeanToken,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::ProviderNative => "provider-native",
            Pooling::LastToken => "last-token",
            Pooling::MeanToken => "mean-token",
        }
    }
}

/// JSON field names used by a provider, for APIs that differ from the
/// `{"model", "input"} → {"data": [{"index", "embedding"}]}` default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub model: String,
    pub input: String,
    pub data: String,
    pub index: String,
    pub embedding: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            model: "model".into(),
            input: "input".into(),
            data: "data".into(),
            index: "index".into(),
            embedding: "embedding".into(),
        }
    }
}

fn default_rate() -> f64 {
    5.0
}

fn default_max_batch() -> usize {
    64
}

fn default_pooling() -> Pooling {
    Pooling::ProviderNative
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub name: String,
    /// `http(s)://` URL, `stub://` for the offline hashing embedder, or a
    /// path to a hidden-state file.
    pub endpoint: String,
    pub dim: usize,
    #[serde(default = "default_pooling")]
    pub pooling: Pooling,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub auth: Option<String>,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    /// Model identifier sent to the API; defaults to `name`.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub fields: FieldMap,
}

impl ProviderSpec {
    pub fn remote(name: &str, endpoint: &str, dim: usize) -> Self {
        Self {
            name: name.into(),
            endpoint: endpoint.into(),
            dim,
            pooling: Pooling::ProviderNative,
            auth: None,
            rate: default_rate(),
            max_batch: default_max_batch(),
            model: None,
            fields: FieldMap::default(),
        }
    }

    pub fn is_remote(&self) -> bool {
        ["http://", "https://", "stub://"]
            .iter()
            .any(|p| self.endpoint.starts_with(p))
    }

    pub fn model_id(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: String| Err(EmbedError::InvalidSpec(format!("{}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return bad("name is empty".into());
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if self.max_batch == 0 {
            return bad("max_batch must be at least 1".into());
        }
        match (self.is_remote(), self.pooling) {
            (true, Pooling::ProviderNative) | (false, Pooling::LastToken | Pooling::MeanToken) => Ok(()),
            (true, p) => bad(format!("{} pooling needs a hidden-state source", p.name())),
            (false, _) => bad("provider-native pooling needs a remote endpoint".into()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("invalid provider spec: {0}")]
    InvalidSpec(String),
    #[error("no texts to embed")]
    NoTexts,
    #[error("text {0} is empty")]
    EmptyText(usize),
    #[error("provider returned status {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("expected dimension {expected}, provider returned {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    HiddenState(#[from] HiddenStateError),
    #[error("{texts} texts but {matrices} hidden-state matrices")]
    CountMismatch { texts: usize, matrices: usize },
    #[error("operation not supported by this provider: {0}")]
    Unsupported(String),
}

impl From<RequestError> for EmbedError {
    fn from(e: RequestError) -> Self {
        match e {
            RequestError::Provider { status, body } => EmbedError::ProviderError { status, body },
            RequestError::Transport(t) => EmbedError::Transport(t.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let ok = ProviderSpec::remote("p", "https://example.invalid/v1/embeddings", 8);
        assert_eq!(ok.validate(), Ok(()));
        for spec in [
            ProviderSpec { dim: 0, ..ok.clone() },
            ProviderSpec { rate: 0.0, ..ok.clone() },
            ProviderSpec { max_batch: 0, ..ok.clone() },
            ProviderSpec { pooling: Pooling::MeanToken, ..ok.clone() },
            ProviderSpec { endpoint: "states.hsv".into(), ..ok.clone() },
        ] {
            assert!(matches!(spec.validate(), Err(EmbedError::InvalidSpec(_))), "{spec:?}");
        }
        let local = ProviderSpec {
            endpoint: "states.hsv".into(),
            pooling: Pooling::LastToken,
            ..ok
        };
        assert_eq!(local.validate(), Ok(()));
    }

    #[test]
    fn spec_from_json_uses_defaults() {
        let s: ProviderSpec =
            serde_json::from_str(r#"{"name":"m","endpoint":"stub://","dim":4,"fields":{"input":"texts"}}"#).unwrap();
        assert_eq!(s.pooling, Pooling::ProviderNative);
        assert_eq!(s.fields.input, "texts");
        assert_eq!(s.fields.data, "data");
        assert_eq!(s.model_id(), "m");
    }
}
