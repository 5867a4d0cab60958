//! Oracle factuality scoring: one prompt per response asks the oracle to
//! split the response into segments and label each true or false against
//! the topic's reference document. A response's factuality `phi` is the
//! fraction of segments labelled true.

mod prompt;
mod score;
mod transcript;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::ChatError;

pub use prompt::{build_prompt, PromptExamples, DEFAULT_TEMPLATE, EXAMPLE_EVEREST, EXAMPLE_LONDON};
pub use score::{
    class_probability, fidelity, score_response, score_sample, score_topic_responses, ResponseFailure,
    ScoringConfig, TopicScores, FIDELITY_WARN,
};
pub use transcript::{parse_transcript, render_transcript};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("template placeholder {{{0}}} has no value")]
    MissingPlaceholder(String),
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("transcript has no <statements> block")]
    NoStatementsBlock,
    #[error("unpaired tag at byte {0}")]
    UnpairedTags(usize),
    #[error("class {0:?} of segment {1} is neither 0 nor 1")]
    InvalidClass(String, usize),
    #[error("segment {0} is empty")]
    EmptyStatement(usize),
    #[error("oracle returned no segments")]
    EmptySegmentation,
    #[error("oracle transcript unparseable after reprompt: {0}")]
    ParseError(Box<SegmentError>),
    #[error("oracle call failed: {0}")]
    OracleError(#[from] ChatError),
    #[error("topic {topic}: {failed} of {total} responses failed")]
    TopicFailed {
        topic: String,
        failed: usize,
        total: usize,
        failures: Vec<ResponseFailure>,
    },
}

impl SegmentError {
    pub(crate) fn is_parse_failure(&self) -> bool {
        matches!(
            self,
            SegmentError::NoStatementsBlock
                | SegmentError::UnpairedTags(_)
                | SegmentError::InvalidClass(..)
                | SegmentError::EmptyStatement(_)
        )
    }
}

/// One verbatim segment of a response and the oracle's verdict on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVerdict {
    pub text: String,
    pub label: bool,
    /// Normalized class probability from token log-probs, when available.
    /// Metadata only; `phi` uses the hard label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_true: Option<f64>,
    pub index: usize,
}

/// A response with its segment verdicts and factuality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub response_text: String,
    pub segments: Vec<SegmentVerdict>,
    pub phi: f64,
    /// Share of the response's characters recovered from the segments.
    pub fidelity: f64,
    pub oracle_model: String,
    pub raw_transcript: String,
}

impl ScoredResponse {
    pub fn true_count(&self) -> usize {
        self.segments.iter().filter(|s| s.label).count()
    }
}

/// A scored response with its place in the dataset; one line of the
/// scored JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub topic_id: String,
    pub sample_index: usize,
    pub length_variant: usize,
    #[serde(flatten)]
    pub scored: ScoredResponse,
}
