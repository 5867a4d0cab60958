//! Sentence-boundary truncation to a word target.

/// Tokens ending in a period that do not end a sentence (compared
/// case-insensitively, without the final period).
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "inc", "ltd", "co", "corp",
    "mt", "no", "fig", "gen", "col", "lt", "sgt", "capt", "rev", "hon", "gov", "sen", "rep", "ave", "approx",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "ca", "cf", "al",
];

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

/// Result of [`truncate_to_words`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub text: String,
    pub word_count: usize,
    /// No sentence boundary at or below the target: `text` is a plain cut
    /// after `word_target` words.
    pub hard_cut: bool,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn is_abbreviation(word: &str) -> bool {
    let core = word.trim_end_matches('.');
    if core.is_empty() {
        return false;
    }
    // Initials and dotted acronyms: "J.", "U.S.", "U.S.A."
    let dotted = word.split('.').filter(|p| !p.is_empty()).all(|p| p.chars().count() == 1)
        && word.chars().next().is_some_and(char::is_alphabetic);
    dotted || ABBREVIATIONS.contains(&core.to_lowercase().as_str())
}

fn ends_sentence(word: &str, next: Option<&str>) -> bool {
    let stripped = word.trim_end_matches(CLOSERS);
    let Some(last) = stripped.chars().last() else { return false };
    if !matches!(last, '.' | '!' | '?') {
        return false;
    }
    if last == '.' && is_abbreviation(stripped.trim_start_matches(OPENERS)) {
        return false;
    }
    match next {
        None => true,
        Some(n) => n.trim_start_matches(OPENERS).chars().next().is_some_and(char::is_uppercase),
    }
}

/// Byte offset just past each word, and whether a sentence ends there.
fn words_with_boundaries(text: &str) -> Vec<(usize, bool)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    (0..spans.len())
        .map(|k| {
            let word = &text[spans[k].0..spans[k].1];
            let next = spans.get(k + 1).map(|&(s, e)| &text[s..e]);
            (spans[k].1, ends_sentence(word, next))
        })
        .collect()
}

/// Cuts `text` at the sentence boundary whose word count is nearest to
/// `word_target` (ties go to the shorter prefix). Texts within the target
/// are returned unchanged.
pub fn truncate_to_words(text: &str, word_target: usize) -> Truncation {
    let words = words_with_boundaries(text);
    if words.len() <= word_target {
        return Truncation {
            text: text.to_string(),
            word_count: words.len(),
            hard_cut: false,
        };
    }
    let boundaries: Vec<usize> = (0..words.len()).filter(|&k| words[k].1).map(|k| k + 1).collect();
    if !boundaries.iter().any(|&n| n <= word_target) {
        if word_target == 0 {
            return Truncation {
                text: String::new(),
                word_count: 0,
                hard_cut: true,
            };
        }
        return Truncation {
            text: text[..words[word_target - 1].0].to_string(),
            word_count: word_target,
            hard_cut: true,
        };
    }
    // Boundaries are ascending, so `min_by_key` keeps the shorter on ties.
    let best = *boundaries
        .iter()
        .min_by_key(|&&n| n.abs_diff(word_target))
        .expect("at least one boundary");
    Truncation {
        text: text[..words[best - 1].0].to_string(),
        word_count: best,
        hard_cut: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sentence(n: usize, tag: &str) -> String {
        let mut w: Vec<String> = (0..n).map(|i| format!("{tag}{i}")).collect();
        w[0] = format!("Start{tag}");
        w[n - 1].push('.');
        w.join(" ")
    }

    #[test]
    fn three_sentences_target_twenty() {
        let text = [sentence(10, "a"), sentence(10, "b"), sentence(10, "c")].join(" ");
        assert_eq!(word_count(&text), 30);
        let t = truncate_to_words(&text, 20);
        assert_eq!(t.text, [sentence(10, "a"), sentence(10, "b")].join(" "));
        assert_eq!((t.word_count, t.hard_cut), (20, false));
    }

    #[test]
    fn short_text_is_identity() {
        let text = "One two.  Three four five.\n";
        let t = truncate_to_words(text, 5);
        assert_eq!(t.text, text);
        assert!(!t.hard_cut);
    }

    #[test]
    fn unbroken_sentence_is_hard_cut() {
        let text = sentence(100, "w");
        let t = truncate_to_words(&text, 50);
        assert!(t.hard_cut);
        assert_eq!(word_count(&t.text), 50);
        assert!(text.starts_with(&t.text));
    }

    #[test]
    fn ties_go_shorter_and_nearest_may_overshoot() {
        // Boundaries at 4 and 8 words; target 6 is a tie.
        let text = "Aa bb cc dd. Ee ff gg hh. Ii jj kk ll.";
        assert_eq!(truncate_to_words(text, 6).text, "Aa bb cc dd.");
        // Boundaries at 4 and 8; target 7 is nearer the longer prefix.
        assert_eq!(truncate_to_words(text, 7).text, "Aa bb cc dd. Ee ff gg hh.");
    }

    #[test]
    fn abbreviations_and_initials_do_not_split() {
        let text = "Dr. Smith met J. R. Tolkien in the U.S. Army. They talked. Then left.";
        let b: Vec<bool> = words_with_boundaries(text).into_iter().map(|(_, b)| b).collect();
        let ends: Vec<usize> = b.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i + 1).collect();
        assert_eq!(ends, vec![10, 12, 14]);
    }

    #[test]
    fn quotes_and_lowercase_continuations() {
        let text = "He said \"Stop!\" Then he left. version 2.0 is out. it continues? Yes.";
        let ends: Vec<usize> = words_with_boundaries(text)
            .into_iter()
            .enumerate()
            .filter(|(_, (_, b))| *b)
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(ends, vec![3, 12, 13]);
    }

    /// Brute force over every word prefix, straight from the contract.
    fn oracle(text: &str, target: usize) -> (usize, bool) {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() <= target {
            return (words.len(), false);
        }
        let mut best: Option<usize> = None;
        for n in 1..=words.len() {
            if ends_sentence(words[n - 1], words.get(n).copied()) {
                let better = match best {
                    None => true,
                    Some(b) => n.abs_diff(target) < b.abs_diff(target),
                };
                if better {
                    best = Some(n);
                }
            }
        }
        let any_below = (1..=target).any(|n| ends_sentence(words[n - 1], words.get(n).copied()));
        if any_below {
            (best.unwrap(), false)
        } else {
            (target, true)
        }
    }

    fn arb_text() -> impl Strategy<Value = String> {
        let word = prop_oneof![
            "[a-z]{1,6}",
            "[A-Z][a-z]{0,5}",
            "[a-z]{1,5}[.!?]",
            "[A-Z][a-z]{0,4}\\.",
            Just("Dr.".to_string()),
            Just("U.S.".to_string()),
            Just("\"Go!\"".to_string()),
        ];
        (prop::collection::vec(word, 1..60), prop::collection::vec(prop_oneof![Just(" "), Just("  "), Just("\n")], 60))
            .prop_map(|(words, seps)| {
                let mut s = String::new();
                for (i, w) in words.iter().enumerate() {
                    if i > 0 {
                        s.push_str(seps[i]);
                    }
                    s.push_str(w);
                }
                s
            })
    }

    proptest! {
        #[test]
        fn matches_brute_force(text in arb_text(), target in 1usize..70) {
            let t = truncate_to_words(&text, target);
            let (n, hard) = oracle(&text, target);
            prop_assert_eq!(t.word_count, n);
            prop_assert_eq!(t.hard_cut, hard);
            prop_assert_eq!(word_count(&t.text), n);
            prop_assert!(text.starts_with(&t.text));
        }

        #[test]
        fn idempotent(text in arb_text(), target in 1usize..70) {
            let once = truncate_to_words(&text, target);
            let twice = truncate_to_words(&once.text, target);
            prop_assert_eq!(&twice.text, &once.text);
            prop_assert!(!twice.hard_cut);
            prop_assert!(once.word_count <= word_count(&text));
        }
    }
}
