//! Parsing and rendering of the oracle's XML-tagged verdict transcript:
//!
//! ```text
//! <statements>
//! <statement>...</statement> <class>1</class>
//! ...
//! </statements>
//! ```

use std::ops::Range;

use super::{SegmentError, SegmentVerdict};

const OPEN_BLOCK: &str = "<statements>";
const CLOSE_BLOCK: &str = "</statements>";
const OPEN_STMT: &str = "<statement>";
const CLOSE_STMT: &str = "</statement>";
const OPEN_CLASS: &str = "<class>";
const CLOSE_CLASS: &str = "</class>";

/// A parsed verdict plus the byte range of its class value in the transcript.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SpannedVerdict {
    pub verdict: SegmentVerdict,
    pub class_span: Range<usize>,
}

/// Extracts `(statement, class)` pairs in transcript order, indexed from 1.
pub fn parse_transcript(raw: &str) -> Result<Vec<SegmentVerdict>, SegmentError> {
    Ok(parse_spanned(raw)?.into_iter().map(|s| s.verdict).collect())
}

fn find_from(raw: &str, from: usize, pat: &str) -> Option<usize> {
    raw[from..].find(pat).map(|p| p + from)
}

pub(crate) fn parse_spanned(raw: &str) -> Result<Vec<SpannedVerdict>, SegmentError> {
    let open = raw.find(OPEN_BLOCK).ok_or(SegmentError::NoStatementsBlock)?;
    let body_start = open + OPEN_BLOCK.len();
    let body_end = find_from(raw, body_start, CLOSE_BLOCK).ok_or(SegmentError::UnpairedTags(open))?;

    let mut out = Vec::new();
    let mut cursor = body_start;
    loop {
        let next_stmt = find_from(raw, cursor, OPEN_STMT).filter(|&p| p < body_end);
        // Anything tag-like before the next statement (or the block end) is stray.
        let limit = next_stmt.unwrap_or(body_end);
        for stray in [OPEN_CLASS, CLOSE_CLASS, CLOSE_STMT] {
            if let Some(p) = find_from(raw, cursor, stray).filter(|&p| p < limit) {
                return Err(SegmentError::UnpairedTags(p));
            }
        }
        let Some(stmt_open) = next_stmt else { break };

        let text_start = stmt_open + OPEN_STMT.len();
        let text_end = find_from(raw, text_start, CLOSE_STMT)
            .filter(|&p| p < body_end)
            .ok_or(SegmentError::UnpairedTags(stmt_open))?;
        if let Some(p) = find_from(raw, text_start, OPEN_STMT).filter(|&p| p < text_end) {
            return Err(SegmentError::UnpairedTags(p));
        }
        let text = &raw[text_start..text_end];

        let after_stmt = text_end + CLOSE_STMT.len();
        let gap = raw[after_stmt..body_end].len() - raw[after_stmt..body_end].trim_start().len();
        let class_open = after_stmt + gap;
        if !raw[class_open..body_end].starts_with(OPEN_CLASS) {
            return Err(SegmentError::UnpairedTags(after_stmt));
        }
        let value_start = class_open + OPEN_CLASS.len();
        let value_end = find_from(raw, value_start, CLOSE_CLASS)
            .filter(|&p| p < body_end)
            .ok_or(SegmentError::UnpairedTags(class_open))?;
        let index = out.len() + 1;
        let value = raw[value_start..value_end].trim();
        let label = match value {
            "1" => true,
            "0" => false,
            other => return Err(SegmentError::InvalidClass(other.to_string(), index)),
        };
        if text.trim().is_empty() {
            return Err(SegmentError::EmptyStatement(index));
        }
        let lead = raw[value_start..value_end].len() - raw[value_start..value_end].trim_start().len();
        let class_start = value_start + lead;
        out.push(SpannedVerdict {
            verdict: SegmentVerdict {
                text: text.to_string(),
                label,
                prob_true: None,
                index,
            },
            class_span: class_start..class_start + value.len(),
        });
        cursor = value_end + CLOSE_CLASS.len();
    }
    Ok(out)
}

/// Renders verdicts in the transcript schema; inverse of [`parse_transcript`]
/// for statement texts without tag markup.
pub fn render_transcript(verdicts: &[SegmentVerdict]) -> String {
    let mut out = String::from(OPEN_BLOCK);
    out.push('\n');
    for v in verdicts {
        out.push_str(OPEN_STMT);
        out.push_str(&v.text);
        out.push_str(CLOSE_STMT);
        out.push(' ');
        out.push_str(OPEN_CLASS);
        out.push(if v.label { '1' } else { '0' });
        out.push_str(CLOSE_CLASS);
        out.push('\n');
    }
    out.push_str(CLOSE_BLOCK);
    out
}
