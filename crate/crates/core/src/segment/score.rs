use serde::{Deserialize, Serialize};

use super::prompt::{build_prompt, PromptExamples, DEFAULT_TEMPLATE};
use super::transcript::{parse_spanned, SpannedVerdict};
use super::{ScoredResponse, SegmentError};
use crate::chat::{ChatClient, ChatMessage, ChatRequest, TokenLogprob};
use crate::par::Exec;
use crate::topic::Topic;

const CORRECTIVE: &str = "Your previous reply could not be parsed ({error}). Reply again with only the \
<statements> block. Every <statement> must be followed by exactly one <class> tag containing 0 or 1.";

/// Below this fidelity a warning is logged.
pub const FIDELITY_WARN: f64 = 0.98;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    pub oracle_model: String,
    pub template: String,
    pub examples: PromptExamples,
    pub temperature: Option<f64>,
    pub request_logprobs: bool,
}

impl ScoringConfig {
    pub fn new(oracle_model: impl Into<String>) -> Self {
        Self {
            oracle_model: oracle_model.into(),
            template: DEFAULT_TEMPLATE.to_string(),
            examples: PromptExamples::default(),
            temperature: Some(0.0),
            request_logprobs: false,
        }
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Fraction of the (whitespace-normalized) response recovered by locating
/// each normalized segment, in order, in the normalized response.
pub fn fidelity(response_text: &str, segments: &[impl AsRef<str>]) -> f64 {
    let original = normalize_ws(response_text);
    let total = original.chars().count();
    if total == 0 {
        return 0.0;
    }
    let mut cursor = 0;
    let mut recovered = 0;
    for seg in segments {
        let seg = normalize_ws(seg.as_ref());
        if seg.is_empty() {
            continue;
        }
        if let Some(pos) = original[cursor..].find(&seg) {
            // The dropped separator between adjacent segments counts as recovered.
            let gap = &original[cursor..cursor + pos];
            if gap == " " {
                recovered += 1;
            }
            recovered += seg.chars().count();
            cursor += pos + seg.len();
        }
    }
    (recovered as f64 / total as f64).min(1.0)
}

/// `exp(lp₁) / (exp(lp₀) + exp(lp₁))`; a missing class counts as `−∞`.
pub fn class_probability(lp_true: Option<f64>, lp_false: Option<f64>) -> Option<f64> {
    let l1 = lp_true.unwrap_or(f64::NEG_INFINITY);
    let l0 = lp_false.unwrap_or(f64::NEG_INFINITY);
    if l1 == f64::NEG_INFINITY && l0 == f64::NEG_INFINITY {
        return None;
    }
    Some(1.0 / (1.0 + (l0 - l1).exp()))
}

/// Looks up the class-token alternatives at each verdict's class position.
fn attach_probabilities(verdicts: &mut [SpannedVerdict], content: &str, tokens: &[TokenLogprob]) {
    let joined: String = tokens.iter().map(|t| t.token.as_str()).collect();
    if joined != content {
        log::debug!("logprob tokens do not reassemble the transcript; skipping class probabilities");
        return;
    }
    let mut starts = Vec::with_capacity(tokens.len());
    let mut offset = 0;
    for t in tokens {
        starts.push(offset);
        offset += t.token.len();
    }
    for v in verdicts.iter_mut() {
        let at = v.class_span.start;
        let Some(i) = starts.iter().rposition(|&s| s <= at) else { continue };
        let tok = &tokens[i];
        if at >= starts[i] + tok.token.len() {
            continue;
        }
        let candidates = std::iter::once((tok.token.as_str(), tok.logprob))
            .chain(tok.top.iter().map(|t| (t.token.as_str(), t.logprob)));
        let (mut lp1, mut lp0) = (None, None);
        for (text, lp) in candidates {
            match text.trim() {
                "1" if lp1.is_none() => lp1 = Some(lp),
                "0" if lp0.is_none() => lp0 = Some(lp),
                _ => {}
            }
        }
        v.verdict.prob_true = class_probability(lp1, lp0);
    }
}

/// Scores one response with a single oracle call (plus at most one
/// corrective reprompt if the transcript cannot be parsed).
pub fn score_response(
    topic: &Topic,
    response_text: &str,
    oracle: &dyn ChatClient,
    config: &ScoringConfig,
) -> Result<ScoredResponse, SegmentError> {
    score_sample(topic, response_text, None, oracle, config)
}

/// [`score_response`] with the sample index attached as request metadata.
pub fn score_sample(
    topic: &Topic,
    response_text: &str,
    sample_index: Option<usize>,
    oracle: &dyn ChatClient,
    config: &ScoringConfig,
) -> Result<ScoredResponse, SegmentError> {
    let prompt = build_prompt(&config.template, topic, response_text, &config.examples)?;
    let mut request = ChatRequest {
        model: config.oracle_model.clone(),
        messages: vec![ChatMessage::user(prompt)],
        temperature: config.temperature,
        seed: None,
        logprobs: config.request_logprobs,
        tags: Default::default(),
    }
    .tag("topic_id", &topic.id);
    if let Some(i) = sample_index {
        request = request.tag("sample_index", i);
    }

    let mut reply = oracle.complete(&request)?;
    let mut parsed = parse_spanned(&reply.content);
    if let Err(e) = &parsed {
        if e.is_parse_failure() {
            log::warn!("topic {}: unparseable transcript ({e}); reprompting", topic.id);
            request.messages.push(ChatMessage::assistant(reply.content.clone()));
            request
                .messages
                .push(ChatMessage::user(CORRECTIVE.replace("{error}", &e.to_string())));
            reply = oracle.complete(&request)?;
            parsed = parse_spanned(&reply.content);
        }
    }
    let mut spanned = parsed.map_err(|e| {
        if e.is_parse_failure() {
            SegmentError::ParseError(Box::new(e))
        } else {
            e
        }
    })?;
    if spanned.is_empty() {
        return Err(SegmentError::EmptySegmentation);
    }
    if let Some(tokens) = &reply.logprobs {
        attach_probabilities(&mut spanned, &reply.content, tokens);
    }

    let segments: Vec<_> = spanned.into_iter().map(|s| s.verdict).collect();
    let m = segments.len();
    let phi = segments.iter().filter(|s| s.label).count() as f64 / m as f64;
    let fid = fidelity(response_text, &segments.iter().map(|s| s.text.as_str()).collect::<Vec<_>>());
    if fid < FIDELITY_WARN {
        log::warn!("topic {}: segment fidelity {fid:.3} below {FIDELITY_WARN}", topic.id);
    }
    Ok(ScoredResponse {
        response_text: response_text.to_string(),
        segments,
        phi,
        fidelity: fid,
        oracle_model: config.oracle_model.clone(),
        raw_transcript: reply.content,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseFailure {
    pub index: usize,
    pub error: String,
}

/// All responses of one topic; `scored[i].0` is the response index.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicScores {
    pub scored: Vec<(usize, ScoredResponse)>,
    pub failures: Vec<ResponseFailure>,
    pub mean_phi: f64,
}

/// Scores every response independently. Failed responses are left out of
/// `mean_phi` as long as at least half succeed; otherwise the topic fails.
pub fn score_topic_responses(
    topic: &Topic,
    responses: &[(usize, String)],
    oracle: &dyn ChatClient,
    config: &ScoringConfig,
    exec: Exec,
) -> Result<TopicScores, SegmentError> {
    let total = responses.len();
    if total == 0 {
        return Err(SegmentError::EmptyField("responses"));
    }
    let results = exec.map_slice(responses, |(i, text)| {
        (*i, score_sample(topic, text, Some(*i), oracle, config))
    });
    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for (index, r) in results {
        match r {
            Ok(s) => scored.push((index, s)),
            Err(e) => {
                log::warn!("topic {} response {index}: {e}", topic.id);
                failures.push(ResponseFailure {
                    index,
                    error: e.to_string(),
                });
            }
        }
    }
    if scored.is_empty() || 2 * scored.len() < total {
        return Err(SegmentError::TopicFailed {
            topic: topic.id.clone(),
            failed: failures.len(),
            total,
            failures,
        });
    }
    let mean_phi = scored.iter().map(|(_, s)| s.phi).sum::<f64>() / scored.len() as f64;
    Ok(TopicScores {
        scored,
        failures,
        mean_phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::{ChatError, ChatResponse, TopLogprob};
    use crate::segment::render_transcript;
    use crate::segment::SegmentVerdict;
    use crate::topic::Source;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    fn topic() -> Topic {
        Topic {
            id: "t".into(),
            entity: "Thing".into(),
            reference_doc: "Reference.".into(),
            source: Source::Custom,
        }
    }

    struct Replies(Mutex<Vec<String>>, AtomicUsize);

    impl Replies {
        fn new(r: &[&str]) -> Self {
            Self(Mutex::new(r.iter().map(|s| s.to_string()).collect()), AtomicUsize::new(0))
        }
    }

    impl ChatClient for Replies {
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, ChatError> {
            self.1.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse::text(self.0.lock().unwrap().remove(0)))
        }
    }

    fn transcript(labels: &[bool]) -> String {
        let v: Vec<SegmentVerdict> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| SegmentVerdict {
                text: format!("Part {i}."),
                label,
                prob_true: None,
                index: i + 1,
            })
            .collect();
        render_transcript(&v)
    }

    #[test]
    fn all_true_gives_phi_one() {
        let oracle = Replies::new(&[&transcript(&[true; 5])]);
        let r = score_response(&topic(), "Part 0. Part 1. Part 2. Part 3. Part 4.", &oracle, &ScoringConfig::new("o"))
            .unwrap();
        assert_eq!(r.phi, 1.0);
        assert_eq!(r.fidelity, 1.0);
        assert_eq!(r.oracle_model, "o");
    }

    #[test]
    fn reprompts_once_then_fails() {
        let oracle = Replies::new(&["garbage", &transcript(&[true, false])]);
        let r = score_response(&topic(), "Part 0. Part 1.", &oracle, &ScoringConfig::new("o")).unwrap();
        assert_eq!(r.phi, 0.5);
        assert_eq!(oracle.1.load(Ordering::SeqCst), 2);

        let oracle = Replies::new(&["garbage", "<statements><statement>x</statement><class>2</class></statements>"]);
        let err = score_response(&topic(), "x", &oracle, &ScoringConfig::new("o")).unwrap_err();
        assert_eq!(
            err,
            SegmentError::ParseError(Box::new(SegmentError::InvalidClass("2".into(), 1)))
        );
    }

    #[test]
    fn empty_segmentation_is_an_error() {
        let oracle = Replies::new(&["<statements></statements>"]);
        assert_eq!(
            score_response(&topic(), "x", &oracle, &ScoringConfig::new("o")),
            Err(SegmentError::EmptySegmentation)
        );
    }

    #[test]
    fn softmax_limits() {
        assert_eq!(class_probability(Some(0.0), Some(f64::NEG_INFINITY)), Some(1.0));
        assert_eq!(class_probability(Some(0.0), None), Some(1.0));
        assert_eq!(class_probability(None, Some(-0.5)), Some(0.0));
        assert_eq!(class_probability(None, None), None);
        let p = class_probability(Some(-0.1), Some(-2.4)).unwrap();
        let direct = (-0.1f64).exp() / ((-0.1f64).exp() + (-2.4f64).exp());
        assert!((p - direct).abs() < 1e-15);
    }

    struct WithLogprobs;

    impl ChatClient for WithLogprobs {
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, ChatError> {
            let pieces = [
                "<statements>\n<statement>",
                "A",
                "</statement> <class>",
                "1",
                "</class>\n<statement>",
                "B",
                "</statement> <class>",
                "0",
                "</class>\n</statements>",
            ];
            let tokens = pieces
                .iter()
                .map(|p| {
                    let top = match *p {
                        "1" => vec![TopLogprob { token: "1".into(), logprob: 0.0 }],
                        "0" => vec![
                            TopLogprob { token: "0".into(), logprob: -0.2 },
                            TopLogprob { token: "1".into(), logprob: -1.7 },
                        ],
                        _ => vec![],
                    };
                    TokenLogprob {
                        token: p.to_string(),
                        logprob: top.first().map(|t| t.logprob).unwrap_or(0.0),
                        top,
                    }
                })
                .collect();
            Ok(ChatResponse {
                content: pieces.concat(),
                logprobs: Some(tokens),
            })
        }
    }

    #[test]
    fn class_probabilities_from_logprobs() {
        let r = score_response(&topic(), "A B", &WithLogprobs, &ScoringConfig::new("o")).unwrap();
        assert_eq!(r.segments[0].prob_true, Some(1.0));
        let p = r.segments[1].prob_true.unwrap();
        assert!((p - 1.0 / (1.0 + (1.5f64).exp())).abs() < 1e-12);
        // The hard label still decides phi.
        assert_eq!(r.phi, 0.5);
    }

    #[test]
    fn fidelity_counts_recovered_characters() {
        assert_eq!(fidelity("a  b\n c", &["a b", "c"]), 1.0);
        let f = fidelity("abcd efgh", &["abcd", "zzzz"]);
        assert!((f - 4.0 / 9.0).abs() < 1e-12);
        assert_eq!(fidelity("abc", &[] as &[&str]), 0.0);
    }

    struct PerIndex;

    impl ChatClient for PerIndex {
        fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
            let i: usize = req.tags["sample_index"].parse().unwrap();
            match i {
                0 => Ok(ChatResponse::text(transcript(&[true, true]))),
                1 => Ok(ChatResponse::text(transcript(&[true, false]))),
                _ => Err(ChatError::Stub("down".into())),
            }
        }
    }

    #[test]
    fn topic_mean_and_failure_policy() {
        let cfg = ScoringConfig::new("o");
        let ok = score_topic_responses(
            &topic(),
            &[(0, "Part 0. Part 1.".into()), (1, "Part 0. Part 1.".into())],
            &PerIndex,
            &cfg,
            Exec::default(),
        )
        .unwrap();
        assert_eq!(ok.mean_phi, 0.75);

        let half = score_topic_responses(
            &topic(),
            &[(0, "a".into()), (1, "b".into()), (2, "c".into()), (3, "d".into())],
            &PerIndex,
            &cfg,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(half.failures.len(), 2);
        assert_eq!(half.mean_phi, 0.75);

        let err = score_topic_responses(
            &topic(),
            &[(0, "a".into()), (2, "c".into()), (3, "d".into())],
            &PerIndex,
            &cfg,
            Exec::Sequential,
        )
        .unwrap_err();
        assert!(matches!(err, SegmentError::TopicFailed { failed: 2, total: 3, .. }));
    }
}
