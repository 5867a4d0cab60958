//! Response datasets: sampling N generations per topic, deriving shorter
//! length variants, and reading topic files.

mod topics;
mod truncate;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{ChatClient, ChatError, ChatMessage, ChatRequest};
use crate::par::Exec;
use crate::topic::Topic;

pub use topics::{ingest_topics, parse_topics, TopicIngest, TopicLine};
pub use truncate::{truncate_to_words, word_count, Truncation};

pub const DEFAULT_PROMPT: &str = "Write approximately {word_target} words about {entity}.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("generator failed for sample {index}: {source}")]
    Generator { index: usize, source: ChatError },
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub generator_model: String,
    pub temperature: f64,
    pub n_samples: usize,
    pub word_target: usize,
    pub prompt_template: String,
    pub seed_base: u64,
}

impl GenerationConfig {
    pub fn new(generator_model: impl Into<String>) -> Self {
        Self {
            generator_model: generator_model.into(),
            temperature: 0.7,
            n_samples: 10,
            word_target: 500,
            prompt_template: DEFAULT_PROMPT.to_string(),
            seed_base: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        if !(self.temperature > 0.0 && self.temperature <= 2.0) {
            return bad(format!("temperature {} outside (0, 2]", self.temperature));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if self.word_target < 25 {
            return bad(format!("word_target {} is below 25", self.word_target));
        }
        if !self.prompt_template.contains("{entity}") {
            return bad("prompt_template has no {entity} placeholder".into());
        }
        Ok(())
    }

    pub fn prompt(&self, topic: &Topic) -> String {
        self.prompt_template
            .replace("{word_target}", &self.word_target.to_string())
            .replace("{entity}", &topic.entity)
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub topic_id: String,
    pub sample_index: usize,
    pub text: String,
    pub word_count: usize,
    pub generator_model: String,
    pub temperature: f64,
    pub created_at: DateTime<Utc>,
    pub length_variant: usize,
    /// Set when truncation found no sentence boundary and cut mid-sentence.
    #[serde(default, skip_serializing_if = "is_false")]
    pub hard_cut: bool,
}

impl ResponseRecord {
    pub fn created_at_rfc3339(&self) -> String {
        self.created_at.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

/// Records for one topic; `complete` is false when some samples failed.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub records: Vec<ResponseRecord>,
    pub complete: bool,
    pub errors: Vec<GenError>,
}

/// Draws `cfg.n_samples` independent generations for `topic`.
pub fn generate_responses(
    topic: &Topic,
    cfg: &GenerationConfig,
    generator: &dyn ChatClient,
    exec: Exec,
) -> Result<GenerationOutcome, GenError> {
    let indices: Vec<usize> = (0..cfg.n_samples).collect();
    generate_samples(topic, cfg, generator, &indices, exec)
}

/// Draws only the given sample indices; used to fill gaps when resuming.
pub fn generate_samples(
    topic: &Topic,
    cfg: &GenerationConfig,
    generator: &dyn ChatClient,
    indices: &[usize],
    exec: Exec,
) -> Result<GenerationOutcome, GenError> {
    cfg.validate()?;
    let prompt = cfg.prompt(topic);
    let results = exec.map_slice(indices, |&index| {
        let request = ChatRequest {
            model: cfg.generator_model.clone(),
            messages: vec![ChatMessage::user(prompt.clone())],
            temperature: Some(cfg.temperature),
            seed: Some(cfg.seed_base.wrapping_add(index as u64)),
            logprobs: false,
            tags: Default::default(),
        }
        .tag("topic_id", &topic.id)
        .tag("sample_index", index);
        let reply = generator
            .complete(&request)
            .map_err(|source| GenError::Generator { index, source })?;
        let text = reply.content;
        Ok(ResponseRecord {
            topic_id: topic.id.clone(),
            sample_index: index,
            word_count: word_count(&text),
            text,
            generator_model: cfg.generator_model.clone(),
            temperature: cfg.temperature,
            created_at: Utc::now(),
            length_variant: cfg.word_target,
            hard_cut: false,
        })
    });
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("topic {}: {e}", topic.id);
                errors.push(e);
            }
        }
    }
    Ok(GenerationOutcome {
        complete: errors.is_empty(),
        records,
        errors,
    })
}

/// Truncates every record to every target, ordered by target then input order.
pub fn derive_length_variants(records: &[ResponseRecord], targets: &[usize]) -> Vec<ResponseRecord> {
    let mut out = Vec::with_capacity(records.len() * targets.len());
    for &target in targets {
        for r in records {
            let t = truncate_to_words(&r.text, target);
            if t.hard_cut {
                log::warn!(
                    "topic {} sample {}: no sentence boundary within {target} words; cut mid-sentence",
                    r.topic_id,
                    r.sample_index
                );
            }
            out.push(ResponseRecord {
                text: t.text,
                word_count: t.word_count,
                length_variant: target,
                hard_cut: t.hard_cut || r.hard_cut,
                ..r.clone()
            });
        }
    }
    out
}
