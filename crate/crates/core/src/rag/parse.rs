use std::sync::OnceLock;

use regex::Regex;

const LINE_TRIM: &[char] = &['(', ')', '[', ']', '{', '}', '.', ':', ',', ';', '*', '"', '\'', '!'];

fn answer_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)\banswer(?:\s+is|\s*:)\s*(?:option\s+)?[\(\[\*"']*\s*([A-Za-z0-9]+)"#)
            .expect("valid regex")
    })
}

fn match_label<'a>(token: &str, labels: &'a [String], case_sensitive_letters: bool) -> Option<&'a String> {
    labels.iter().find(|l| {
        if case_sensitive_letters && l.chars().count() == 1 {
            token == l.as_str()
        } else {
            token.eq_ignore_ascii_case(l)
        }
    })
}

/// Extract an answer label from generator output. Rules, in priority order:
///
/// 1. `answer is X` / `answer: X` (case-insensitive, optional brackets);
/// 2. a line that is only a label, ignoring surrounding punctuation;
/// 3. the first standalone label token. Single-letter labels must match
///    case here so the article "a" is not read as option A.
///
/// The returned label is always one of `valid_labels`.
pub fn parse_choice(raw: &str, valid_labels: &[String]) -> Option<String> {
    for cap in answer_pattern().captures_iter(raw) {
        if let Some(l) = match_label(&cap[1], valid_labels, false) {
            return Some(l.clone());
        }
    }
    for line in raw.lines() {
        let bare = line.trim().trim_matches(|c: char| c.is_whitespace() || LINE_TRIM.contains(&c));
        if let Some(l) = match_label(bare, valid_labels, false) {
            return Some(l.clone());
        }
    }
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .find_map(|t| match_label(t, valid_labels, true))
        .cloned()
}
