//! The single-prompt scoring template and its in-context examples.
//!
//! Placeholders are `{entity}`, `{reference_doc}` and `{response}` for the
//! item being scored and `{{example_one}}` / `{{example_two}}` for the
//! exemplars. Substituted values are inserted verbatim and never rescanned.

use super::SegmentError;
use crate::topic::Topic;

/// Default instruction template.
pub const DEFAULT_TEMPLATE: &str = r#"// INSTRUCTION PROMPT FOR SEGMENT SCORE
You are an NLP segmentation and evaluation engine.
Examine the scenario below. You are given:
1. The name of an entity/person/place/thing etc. in <entity> tags.
2. A reference document regarding the entity in <reference_doc> tags.
3. A response about the entity to evaluate in <response> tags.

### Your Tasks:
1. **Segmentation Task:**
   Segment the `<response>` into individual statements. Each statement can be a sentence, phrase or word and should convey a single, complete, and independent piece of information about the `<entity>`. Do not modify, rephrase, or paraphrase the original text. Ensure no semantic overlaps exist between statements. Individual proper nouns should be part of their own statement however when determining the appropriate classification, preceeding context can be used when appropriate.
   Verify that the concatenated content of all statements exactly matches the original response.

   Format the segmented response as follows:
   ```
   <statements>
   <statement>Statement 1</statement> <class>Class 1</class>
   <statement>Statement 2</statement> <class>Class 2</class>
   ...
   </statements>
   ```

2. **Factual Classification Task:**
   For each segmented `<statement>`, classify it as 1 (True) or 0 (False) based solely on the information in the `<reference_doc>`. Follow these guidelines:
   - If a statement is factually accurate and supported by the `<reference_doc>`, classify it as '1'.
   - If a statement is inaccurate, unverifiable, or not supported by the `<reference_doc>`, classify it as '0'.
   - If a statement is partially true, but contains incorrect or unsupported information, classify it as '0'.
   - Do not rely on any external knowledge or context beyond the `<reference_doc>`.
   - Include only the classification for each statement. Do not provide any explanations or additional information.
   - Specify the class in <class> tags.
   - The ONLY valid class values are `1` and `0`. No other values or words should appear within the `<class>` tags.

3. **Error Handling:**
   - If the `<response>` contains unparseable text, incomplete sentences, or conflicting information that cannot be resolved using the `<reference_doc>`, include the flagged statement as is and classify it as '0'.

Examples:
####### EXAMPLE 1 ######
{{example_one}}
########################
####### EXAMPLE 2 ######
{{example_two}}
########################

Entity:
<entity>
{entity}
</entity>

Reference Document:
<reference_doc>
{reference_doc}
</reference_doc>

Response to Evaluate:
<response>
{response}
</response>
"#;

/// Worked example: London, with two false segments out of eleven.
pub const EXAMPLE_LONDON: &str = r#"<entity>
London, UK
</entity>

Reference Document:
<reference_doc>
London, England's capital, boasts a rich history spanning millennia. Founded by the Romans as Londinium around 47 AD, it became a major port and trading center. After the Roman withdrawal, Anglo-Saxons established Lundenwic, which later fell to Viking raids. The Norman Conquest in 1066 led to the construction of the Tower of London, a symbol of royal power. London thrived during the medieval period, becoming a major center for trade, finance, and culture. It weathered plagues, fires, and civil wars, emerging as a global metropolis and the heart of the British Empire. Today, London remains a vibrant hub, blending its historical legacy with modern dynamism, home to over 9 million people.
</reference_doc>

Response to Evaluate:
<response>
London, the capital city of England and the United Kingdom, is a vibrant metropolis steeped in history and brimming with modern energy. With a population of over 9 million people, it stands as one of the world's most influential global cities, known for its diverse culture, iconic landmarks, and rich heritage.

The city's history stretches back over three millennia, founded by the Romans as Londinium in 43 AD. Throughout the centuries, London has played a pivotal role in world affairs, serving as the heart of the British Empire and surviving tumultuous events such as the Great Fire of 1666 and the Blitz during World War I.

Today, London is a melting pot of cultures, with over 300 languages spoken within its boundaries. This diversity is reflected in its neighborhoods, each with its own unique character and charm. From the trendy streets of Shoreditch to the upscale boutiques of Mayfair, there's something for everyone in this cosmopolitan city.
</response>

Segmented and classified response:
<statements>
<statement>London, the capital city of England and the United Kingdom</statement> <class>1</class>
<statement>is a vibrant metropolis steeped in history and brimming with modern energy</statement> <class>1</class>
<statement>With a population of over 9 million people</statement> <class>1</class>
<statement>it stands as one of the world's most influential global cities, known for its diverse culture, iconic landmarks, and rich heritage.</statement> <class>1</class>
<statement>The city's history stretches back over three millennia, founded by the Romans as Londinium in 43 AD</statement> <class>0</class>
<statement>Throughout the centuries, London has played a pivotal role in world affairs, serving as the heart of the British Empire</statement> <class>1</class>
<statement>and surviving tumultuous events such as the Great Fire of 1666</statement> <class>1</class>
<statement>and the Blitz during World War I</statement> <class>0</class>
<statement>Today, London is a melting pot of cultures, with over 300 languages spoken within its boundaries</statement> <class>1</class>
<statement>This diversity is reflected in its neighborhoods, each with its own unique character and charm.</statement> <class>1</class>
<statement>From the trendy streets of Shoreditch to the upscale boutiques of Mayfair, there's something for everyone in this cosmopolitan city</statement> <class>1</class>
</statements>"#;

/// Worked example: a short response with an unverifiable claim.
pub const EXAMPLE_EVEREST: &str = r#"<entity>
Mount Everest
</entity>

Reference Document:
<reference_doc>
Mount Everest is Earth's highest mountain above sea level, located in the Mahalangur Himal sub-range of the Himalayas on the border between Nepal and China. Its elevation of 8,849 metres was most recently established in 2020 by Chinese and Nepali authorities. The first recorded ascent was made on 29 May 1953 by Tenzing Norgay and Edmund Hillary.
</reference_doc>

Response to Evaluate:
<response>
Mount Everest, the tallest mountain on Earth, rises 8,849 metres above sea level on the border of Nepal and China. It was first climbed in 1953 by Edmund Hillary and Tenzing Norgay, who reached the summit after a six-week expedition. Every year thousands of climbers attempt the ascent.
</response>

Segmented and classified response:
<statements>
<statement>Mount Everest, the tallest mountain on Earth</statement> <class>1</class>
<statement>rises 8,849 metres above sea level</statement> <class>1</class>
<statement>on the border of Nepal and China.</statement> <class>1</class>
<statement>It was first climbed in 1953 by Edmund Hillary and Tenzing Norgay</statement> <class>1</class>
<statement>who reached the summit after a six-week expedition.</statement> <class>0</class>
<statement>Every year thousands of climbers attempt the ascent.</statement> <class>0</class>
</statements>"#;

/// The two exemplar blocks placed in the template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptExamples {
    pub one: String,
    pub two: String,
}

impl Default for PromptExamples {
    fn default() -> Self {
        Self {
            one: EXAMPLE_LONDON.to_string(),
            two: EXAMPLE_EVEREST.to_string(),
        }
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Splits a template into literal text and `{name}` / `{{name}}` slots.
/// Braces not enclosing an identifier are literal.
fn tokenize(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    let bytes = template.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let double = bytes.get(i + 1) == Some(&b'{');
            let open = if double { 2 } else { 1 };
            let close = if double { "}}" } else { "}" };
            if let Some(end) = template[i + open..].find(close) {
                let name = &template[i + open..i + open + end];
                if is_ident(name) {
                    if literal_start < i {
                        out.push(Piece::Text(&template[literal_start..i]));
                    }
                    out.push(Piece::Slot(name));
                    i += open + end + close.len();
                    literal_start = i;
                    continue;
                }
            }
        }
        i += 1;
    }
    if literal_start < template.len() {
        out.push(Piece::Text(&template[literal_start..]));
    }
    out
}

/// Fills `template` for one response.
pub fn build_prompt(
    template: &str,
    topic: &Topic,
    response_text: &str,
    examples: &PromptExamples,
) -> Result<String, SegmentError> {
    for (field, value) in [
        ("entity", topic.entity.as_str()),
        ("reference_doc", topic.reference_doc.as_str()),
        ("response", response_text),
    ] {
        if value.trim().is_empty() {
            return Err(SegmentError::EmptyField(field));
        }
    }
    let mut out = String::with_capacity(template.len() + topic.reference_doc.len() + response_text.len());
    for piece in tokenize(template) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot("entity") => out.push_str(&topic.entity),
            Piece::Slot("reference_doc") => out.push_str(&topic.reference_doc),
            Piece::Slot("response") => out.push_str(response_text),
            Piece::Slot("example_one") => out.push_str(&examples.one),
            Piece::Slot("example_two") => out.push_str(&examples.two),
            Piece::Slot(other) => return Err(SegmentError::MissingPlaceholder(other.to_string())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topic::Source;

    fn london() -> Topic {
        Topic {
            id: "london".into(),
            entity: "London, UK".into(),
            reference_doc: "London is the capital of England.".into(),
            source: Source::Custom,
        }
    }

    #[test]
    fn fills_all_slots() {
        let p = build_prompt(DEFAULT_TEMPLATE, &london(), "London {is} big.", &PromptExamples::default())
            .unwrap();
        assert!(p.contains("<entity>\nLondon, UK\n</entity>"));
        assert!(p.contains("<response>\nLondon {is} big.\n</response>"));
        assert!(p.contains("####### EXAMPLE 1 ######\n<entity>\nLondon, UK\n</entity>"));
        assert!(p.contains("<entity>\nMount Everest\n</entity>"));
        assert!(!p.contains("{{example_one}}") && !p.contains("{entity}"));
    }

    #[test]
    fn leaves_everything_else_untouched() {
        let p = build_prompt(DEFAULT_TEMPLATE, &london(), "r", &PromptExamples::default()).unwrap();
        let (head, _) = DEFAULT_TEMPLATE.split_once("{{example_one}}").unwrap();
        assert!(p.starts_with(head));
        assert!(p.ends_with("<response>\nr\n</response>\n"));
    }

    #[test]
    fn unknown_placeholder_is_reported() {
        let err = build_prompt("x {foo} y", &london(), "r", &PromptExamples::default()).unwrap_err();
        assert_eq!(err, SegmentError::MissingPlaceholder("foo".into()));
    }

    #[test]
    fn non_identifier_braces_are_literal() {
        let p = build_prompt("{ a } {} {{x-y}} {entity}", &london(), "r", &PromptExamples::default()).unwrap();
        assert_eq!(p, "{ a } {} {{x-y}} London, UK");
    }

    #[test]
    fn empty_reference_doc_is_rejected() {
        let mut t = london();
        t.reference_doc = "  ".into();
        assert_eq!(
            build_prompt(DEFAULT_TEMPLATE, &t, "r", &PromptExamples::default()),
            Err(SegmentError::EmptyField("reference_doc"))
        );
    }
}
