use crate::llm::{stage, Llm, LlmError};

const QUOTES: &[char] = &['"', '\'', '“', '”', '‘', '’', '«', '»', '`'];

/// Lowercases, strips surrounding quotes, removes punctuation, drops the
/// articles a/an/the and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let unquoted = lowered.trim().trim_matches(QUOTES);
    let no_punct: String = unquoted
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn exact_match(gold: &str, prediction: &str) -> bool {
    normalize(gold) == normalize(prediction)
}

/// The normalized gold answer occurs inside the normalized prediction.
pub fn superset_match(gold: &str, prediction: &str) -> bool {
    normalize(prediction).contains(&normalize(gold))
}

/// `Some(true)` for replies starting "yes", `Some(false)` for "no",
/// otherwise `None`.
pub fn parse_judgement(reply: &str) -> Option<bool> {
    let r = reply.trim_start().trim_start_matches(QUOTES).to_ascii_lowercase();
    if r.starts_with("yes") {
        Some(true)
    } else if r.starts_with("no") {
        Some(false)
    } else {
        None
    }
}

/// Asks the judge whether `prediction` answers `question` like `gold` does.
/// Unparseable verdicts count as no.
pub async fn judge_match(question: &str, gold: &str, prediction: &str, llm: &Llm) -> Result<bool, LlmError> {
    let reply = llm
        .ask(stage::JUDGE_MATCH, [("question", question), ("gold", gold), ("prediction", prediction)])
        .await?;
    Ok(parse_judgement(&reply).unwrap_or(false))
}
