//! Rule-based sentence splitting for cleaned prose.

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "gen", "col", "lt", "sgt",
    "capt", "gov", "sen", "rep", "rev", "hon", "vs", "etc", "e.g", "i.e", "cf", "al", "approx",
    "inc", "ltd", "co", "corp", "no", "vol", "pp", "ed", "eds", "jan", "feb", "mar", "apr",
    "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "a.d", "b.c",
];

/// Splits text into sentences.
///
/// A boundary is a `.`, `!` or `?` (optionally followed by closing quotes or
/// brackets) that is followed by whitespace and then an uppercase letter or
/// an opening quote. A period ending a known abbreviation or a single-letter
/// initial is not a boundary.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;

    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end].1, '"' | '\'' | ')' | ']' | '\u{201d}') {
                end += 1;
            }
            let mut next = end;
            let mut saw_space = false;
            while next < chars.len() && chars[next].1.is_whitespace() {
                saw_space = true;
                next += 1;
            }
            let opens_sentence = chars
                .get(next)
                .is_some_and(|&(_, n)| n.is_uppercase() || matches!(n, '"' | '\u{201c}' | '\''));
            if saw_space && opens_sentence && !(c == '.' && is_abbreviation(text, chars[i].0)) {
                let cut = chars.get(end).map_or(text.len(), |&(b, _)| b);
                push_trimmed(&mut sentences, &text[start..cut]);
                start = chars[next].0;
                i = next;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn is_abbreviation(text: &str, period_at: usize) -> bool {
    let before = &text[..period_at];
    let word_start = before
        .rfind(|c: char| c.is_whitespace() || c == '(' || c == '"')
        .map_or(0, |p| p + 1);
    let word = &before[word_start..];
    if word.chars().count() == 1 && word.chars().all(char::is_alphabetic) {
        return true;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}
