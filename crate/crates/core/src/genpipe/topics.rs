use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenError;
use crate::topic::{Source, Topic};

/// One line of a topics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicLine {
    pub id: String,
    pub entity: String,
    pub reference_doc: String,
    #[serde(default)]
    pub source: Option<Source>,
    #[serde(default)]
    pub is_date: Option<bool>,
    #[serde(default)]
    pub title_match: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicIngest {
    pub topics: Vec<Topic>,
    /// TriviaQA lines dropped by the date/number or title filters.
    pub skipped: usize,
}

/// Lines without a `source` take `default_source`. TriviaQA entities
/// flagged as dates or numbers, or not matching their page title, are
/// skipped.
pub fn parse_topics(text: &str, default_source: Source) -> Result<TopicIngest, GenError> {
    let mut topics = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| GenError::SchemaError { line: line_no, message };
        let t: TopicLine = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        for (field, value) in [("id", &t.id), ("entity", &t.entity), ("reference_doc", &t.reference_doc)] {
            if value.trim().is_empty() {
                return Err(schema(format!("{field} is empty")));
            }
        }
        let source = t.source.unwrap_or(default_source);
        if source == Source::Triviaqa && (t.is_date == Some(true) || t.title_match == Some(false)) {
            log::info!("skipping triviaqa topic {} (line {line_no})", t.id);
            skipped += 1;
            continue;
        }
        topics.push(Topic {
            id: t.id,
            entity: t.entity,
            reference_doc: t.reference_doc,
            source,
        });
    }
    Ok(TopicIngest { topics, skipped })
}

pub fn ingest_topics(path: &Path, source: Source) -> Result<TopicIngest, GenError> {
    let text = std::fs::read_to_string(path).map_err(|e| GenError::Io(format!("{}: {e}", path.display())))?;
    parse_topics(&text, source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_valid_lines() {
        let text = r#"{"id":"a","entity":"A","reference_doc":"Doc a","source":"fs-bio"}
{"id":"b","entity":"B","reference_doc":"Doc b","source":"fs-bio"}

{"id":"c","entity":"C","reference_doc":"Doc c"}
"#;
        let got = parse_topics(text, Source::Custom).unwrap();
        assert_eq!(got.topics.len(), 3);
        assert_eq!(got.skipped, 0);
        assert_eq!(got.topics[2].source, Source::Custom);
    }

    #[test]
    fn missing_reference_doc_reports_line() {
        let text = "{\"id\":\"a\",\"entity\":\"A\",\"reference_doc\":\"D\"}\n{\"id\":\"b\",\"entity\":\"B\"}\n";
        assert!(matches!(
            parse_topics(text, Source::Custom),
            Err(GenError::SchemaError { line: 2, .. })
        ));
        let empty = "{\"id\":\"b\",\"entity\":\"B\",\"reference_doc\":\" \"}";
        assert!(matches!(
            parse_topics(empty, Source::Custom),
            Err(GenError::SchemaError { line: 1, .. })
        ));
    }

    #[test]
    fn triviaqa_filters() {
        let text = r#"{"id":"d","entity":"1066","reference_doc":"x","source":"triviaqa","is_date":true}
{"id":"e","entity":"Paris","reference_doc":"x","source":"triviaqa","is_date":false,"title_match":true}
{"id":"f","entity":"Pariss","reference_doc":"x","source":"triviaqa","title_match":false}
{"id":"g","entity":"1066","reference_doc":"x","source":"fs-bio","is_date":true}
"#;
        let got = parse_topics(text, Source::Custom).unwrap();
        assert_eq!(got.skipped, 2);
        assert_eq!(got.topics.iter().map(|t| t.id.as_str()).collect::<Vec<_>>(), vec!["e", "g"]);
    }
}
