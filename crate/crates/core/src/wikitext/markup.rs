//! Inline wikitext cleanup: templates, links, emphasis, HTML tags and entities.

use std::sync::LazyLock;

use regex::Regex;

/// How unknown templates are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanMode {
    /// Running prose: unknown templates vanish.
    Prose,
    /// Table cells and infobox values: unknown templates keep their inner
    /// text (`{{ISBNT|0-00-655068-1}}` becomes `ISBNT|0-00-655068-1`).
    Cell,
}

static REF_SELF_CLOSING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<ref\b[^>]*/>").unwrap());
static REF_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<ref\b[^>]*>.*?</ref\s*>").unwrap());
static BR_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<br\s*/?>").unwrap());
static HTML_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"</?[a-zA-Z][a-zA-Z0-9]*(\s[^<>]*)?/?>").unwrap());
static EMPHASIS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"'{2,}").unwrap());
static NUMERIC_ENTITY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"&#(x[0-9a-fA-F]+|[0-9]+);").unwrap());
static MAGIC_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"__[A-Z]+__").unwrap());
static WHITESPACE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Blanks out comments and `<ref>` elements in place so byte offsets into the
/// original wikitext stay valid. Newlines inside a removed region survive.
///
/// Returns the blanked text and the number of unterminated comments found.
pub fn blank_comments_and_refs(text: &str) -> (String, usize) {
    let mut bytes = text.as_bytes().to_vec();
    let mut malformed = 0;

    let mut start = 0;
    while let Some(found) = text[start..].find("<!--") {
        let open = start + found;
        let close = match text[open + 4..].find("-->") {
            Some(c) => open + 4 + c + 3,
            None => {
                malformed += 1;
                text.len()
            }
        };
        blank(&mut bytes, open, close);
        start = close;
        if start >= text.len() {
            break;
        }
    }
    // Blanking only ASCII-replaces whole UTF-8 sequences, so this is valid.
    let stripped = String::from_utf8(bytes).expect("blanking preserves UTF-8");

    let mut bytes = stripped.as_bytes().to_vec();
    for re in [&*REF_BLOCK, &*REF_SELF_CLOSING] {
        for m in re.find_iter(&stripped) {
            blank(&mut bytes, m.start(), m.end());
        }
    }
    (String::from_utf8(bytes).expect("blanking preserves UTF-8"), malformed)
}

fn blank(bytes: &mut [u8], from: usize, to: usize) {
    for b in &mut bytes[from..to] {
        if *b != b'\n' {
            *b = b' ';
        }
    }
}

/// Finds the byte offset just past the `close` delimiter that balances the
/// `open` delimiter at `start`. Nested pairs are counted.
pub fn find_balanced(text: &str, start: usize, open: &str, close: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = start;
    while i < bytes.len() {
        if bytes[i..].starts_with(open.as_bytes()) {
            depth += 1;
            i += open.len();
        } else if bytes[i..].starts_with(close.as_bytes()) {
            depth = depth.saturating_sub(1);
            i += close.len();
            if depth == 0 {
                return Some(i);
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Splits on `sep` only where it is not nested inside `[[...]]` or `{{...}}`.
pub fn split_top_level<'a>(text: &'a str, sep: &str) -> Vec<&'a str> {
    let bytes = text.as_bytes();
    let mut parts = Vec::new();
    let mut square = 0usize;
    let mut curly = 0usize;
    let mut last = 0;
    let mut i = 0;
    while i < bytes.len() {
        let rest = &bytes[i..];
        if rest.starts_with(b"[[") {
            square += 1;
            i += 2;
        } else if rest.starts_with(b"]]") && square > 0 {
            square -= 1;
            i += 2;
        } else if rest.starts_with(b"{{") {
            curly += 1;
            i += 2;
        } else if rest.starts_with(b"}}") && curly > 0 {
            curly -= 1;
            i += 2;
        } else if square == 0 && curly == 0 && rest.starts_with(sep.as_bytes()) {
            parts.push(&text[last..i]);
            i += sep.len();
            last = i;
        } else {
            i += 1;
        }
    }
    parts.push(&text[last..]);
    parts
}

/// Position of the first top-level single `|` (not part of `||`).
pub fn find_single_pipe(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut square = 0usize;
    let mut curly = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        let rest = &bytes[i..];
        if rest.starts_with(b"[[") {
            square += 1;
            i += 2;
        } else if rest.starts_with(b"]]") && square > 0 {
            square -= 1;
            i += 2;
        } else if rest.starts_with(b"{{") {
            curly += 1;
            i += 2;
        } else if rest.starts_with(b"}}") && curly > 0 {
            curly -= 1;
            i += 2;
        } else if square == 0 && curly == 0 && rest[0] == b'|' {
            if rest.get(1) == Some(&b'|') {
                i += 2;
            } else {
                return Some(i);
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Cleans inline markup down to display text with whitespace collapsed.
///
/// Leading whitespace is removed; a trailing space left behind by an elided
/// template is kept.
pub fn clean_inline(text: &str, mode: CleanMode) -> String {
    let expanded = expand(text, mode);
    let text = BR_TAG.replace_all(&expanded, " ");
    let text = HTML_TAG.replace_all(&text, "");
    let text = EMPHASIS.replace_all(&text, "");
    let text = MAGIC_WORD.replace_all(&text, "");
    let text = decode_entities(&text);
    WHITESPACE.replace_all(&text, " ").trim_start().to_string()
}

fn decode_entities(text: &str) -> String {
    let named = text
        .replace("&nbsp;", " ")
        .replace("&ndash;", "\u{2013}")
        .replace("&mdash;", "\u{2014}")
        .replace("&quot;", "\"")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&minus;", "\u{2212}")
        .replace("&amp;", "&");
    NUMERIC_ENTITY
        .replace_all(&named, |caps: &regex::Captures| {
            let raw = &caps[1];
            let code = if let Some(hex) = raw.strip_prefix('x') {
                u32::from_str_radix(hex, 16).ok()
            } else {
                raw.parse().ok()
            };
            code.and_then(char::from_u32)
                .map(String::from)
                .unwrap_or_else(|| caps[0].to_string())
        })
        .into_owned()
}

/// Expands templates and links recursively. Unbalanced openers are kept
/// as literal text.
fn expand(text: &str, mode: CleanMode) -> String {
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with("{{") {
            if let Some(end) = find_balanced(text, i, "{{", "}}") {
                out.push_str(&render_template(&text[i + 2..end - 2], mode));
                i = end;
                continue;
            }
        } else if rest.starts_with("[[") {
            if let Some(end) = find_balanced(text, i, "[[", "]]") {
                out.push_str(&render_link(&text[i + 2..end - 2], mode));
                i = end;
                continue;
            }
        } else if rest.starts_with('[') && is_external_link_start(&rest[1..]) {
            if let Some(close) = rest.find(']') {
                let inner = &rest[1..close];
                if let Some((_, label)) = inner.split_once(char::is_whitespace) {
                    out.push_str(&expand(label.trim(), mode));
                }
                i += close + 1;
                continue;
            }
        }
        let ch = rest.chars().next().expect("non-empty remainder");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

fn is_external_link_start(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("//")
}

fn render_link(inner: &str, mode: CleanMode) -> String {
    let (target, display) = match find_single_pipe(inner) {
        Some(p) => (&inner[..p], Some(&inner[p + 1..])),
        None => (inner, None),
    };
    let target = target.trim();
    if let Some((namespace, _)) = target.split_once(':') {
        let ns = namespace.trim().to_ascii_lowercase();
        let interlanguage =
            (2..=3).contains(&ns.len()) && ns.chars().all(|c| c.is_ascii_lowercase());
        if matches!(ns.as_str(), "file" | "image" | "category" | "media") || interlanguage {
            return String::new();
        }
    }
    match display {
        Some(d) if !d.trim().is_empty() => expand(d, mode),
        _ => expand(target.trim_start_matches(':'), mode),
    }
}

const DROPPED_TEMPLATES: &[&str] = &[
    "efn", "efn-ua", "efn-lr", "sfn", "sfnp", "sfnm", "refn", "r", "rp", "cn",
    "citation needed", "fact", "clarify", "when", "ref", "note", "notetag", "dead link",
    "harvnb", "harv", "anchor", "defaultsort", "short description", "italic title", "portal",
    "reflist", "main", "see also", "further", "flagicon", "ntsh", "hs", "toc limit", "clear",
    "-", "dagger", "double-dagger", "refbegin", "refend", "commons category", "authority control",
];

const FIRST_ARG_TEMPLATES: &[&str] = &[
    "nowrap", "nobr", "small", "big", "nts", "center", "tooltip", "abbr", "flag", "flagcountry",
    "flag country", "flagu", "ill", "lang-en", "nobold", "noitalic", "resize", "ubl-item",
    "sup", "sub", "mvar", "var", "math", "bold", "em",
];

const DATE_TEMPLATES: &[&str] = &[
    "start date", "end date", "birth date", "death date", "birth date and age",
    "death date and age", "start date and age", "end date and age", "film date", "dts",
    "date", "birth year and age",
];

const LIST_TEMPLATES: &[&str] = &[
    "hlist", "flatlist", "plainlist", "ubl", "unbulleted list", "bulleted list", "plain list",
    "enum", "indented plainlist",
];

fn render_template(inner: &str, mode: CleanMode) -> String {
    let parts = split_top_level(inner, "|");
    let raw_name = parts[0].trim();
    let name = raw_name.replace('_', " ").to_lowercase();
    let name = name.trim();
    let positional: Vec<&str> = parts[1..]
        .iter()
        .copied()
        .filter(|p| split_top_level(p, "=").len() == 1)
        .collect();
    let arg = |n: usize| positional.get(n).map(|a| expand(a.trim(), mode));

    if DROPPED_TEMPLATES.contains(&name) || name.starts_with("cite ") || name.starts_with("use ")
    {
        return String::new();
    }
    if name.starts_with("infobox") {
        return String::new();
    }
    if FIRST_ARG_TEMPLATES.contains(&name) {
        return arg(0).unwrap_or_default();
    }
    if DATE_TEMPLATES.contains(&name) {
        let numbers: Vec<String> = positional
            .iter()
            .map(|p| p.trim())
            .filter(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
            .take(3)
            .map(String::from)
            .collect();
        return numbers.join("-");
    }
    if LIST_TEMPLATES.contains(&name) {
        // Items are either positional args or `* item` lines inside one arg.
        return positional
            .iter()
            .flat_map(|p| p.lines())
            .map(|line| expand(line.trim().trim_start_matches(['*', '#']).trim(), mode))
            .filter(|p| !p.trim().is_empty())
            .collect::<Vec<_>>()
            .join(", ");
    }
    match name {
        "!" => "|".into(),
        "=" => "=".into(),
        "ndash" | "snd" | "spaced ndash" => " \u{2013} ".into(),
        "mdash" | "spaced mdash" => " \u{2014} ".into(),
        "nbsp" | "sp" => " ".into(),
        "bull" | "\u{2022}" | "middot" | "dot" => " \u{2022} ".into(),
        "sort" => arg(1).or_else(|| arg(0)).unwrap_or_default(),
        "sortname" => [arg(0), arg(1)].into_iter().flatten().collect::<Vec<_>>().join(" "),
        "lang" | "color" | "colour" | "font color" => arg(1).unwrap_or_default(),
        "convert" | "cvt" => [arg(0), arg(1)].into_iter().flatten().collect::<Vec<_>>().join(" "),
        "yes" | "y" => "Yes".into(),
        "no" | "n" => "No".into(),
        "won" => "Won".into(),
        "nom" => "Nominated".into(),
        "n/a" | "na" => "N/A".into(),
        "tba" => "TBA".into(),
        _ if name.starts_with("lang-") => arg(0).unwrap_or_default(),
        _ => match mode {
            CleanMode::Prose => String::new(),
            CleanMode::Cell => {
                let mut rendered = vec![raw_name.to_string()];
                rendered.extend(parts[1..].iter().map(|p| expand(p.trim(), mode)));
                rendered.join("|")
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn links_keep_display_text() {
        assert_eq!(clean_inline("[[Kerala|state of Kerala]] is", CleanMode::Prose), "state of Kerala is");
        assert_eq!(clean_inline("[[Kerala]]n", CleanMode::Prose), "Keralan");
        assert_eq!(clean_inline("a [[File:X.jpg|thumb|cap]] b", CleanMode::Prose), "a b");
        assert_eq!(clean_inline("see [https://x.org the site]", CleanMode::Prose), "see the site");
    }

    #[test]
    fn unknown_templates_depend_on_mode() {
        assert_eq!(clean_inline("{{ISBNT|0-00-655068-1}}", CleanMode::Cell), "ISBNT|0-00-655068-1");
        assert_eq!(clean_inline("x {{ISBNT|0-00-655068-1}}", CleanMode::Prose), "x ");
    }

    #[test]
    fn bulleted_list_templates_flatten() {
        assert_eq!(clean_inline("{{flatlist|\n* [[Grunge]]\n* alternative rock\n}}", CleanMode::Cell), "Grunge, alternative rock");
    }

    #[test]
    fn known_templates_render() {
        assert_eq!(clean_inline("{{sort|God|The God}}", CleanMode::Cell), "The God");
        assert_eq!(clean_inline("{{birth date|1961|11|24}}", CleanMode::Cell), "1961-11-24");
        assert_eq!(clean_inline("{{nowrap|Hamish Hamilton}}", CleanMode::Cell), "Hamish Hamilton");
        assert_eq!(clean_inline("{{hlist|a|b}}", CleanMode::Cell), "a, b");
        assert_eq!(clean_inline("1997{{efn|first}}", CleanMode::Cell), "1997");
    }

    #[test]
    fn elided_template_leaves_trailing_space() {
        assert_eq!(
            clean_inline("{{ISBNT|0-241-30397-4}} {{sfn|Roy|2017}}", CleanMode::Cell),
            "ISBNT|0-241-30397-4 "
        );
    }

    #[test]
    fn emphasis_tags_and_entities() {
        assert_eq!(clean_inline("'''bold''' ''it''", CleanMode::Prose), "bold it");
        assert_eq!(clean_inline("a<br/>b &amp; <small>c</small>", CleanMode::Prose), "a b & c");
        assert_eq!(clean_inline("&#233;t&eacute;", CleanMode::Prose), "\u{e9}t&eacute;");
    }

    #[test]
    fn unbalanced_markup_is_literal() {
        assert_eq!(clean_inline("{{open", CleanMode::Cell), "{{open");
        assert_eq!(clean_inline("[[open", CleanMode::Cell), "[[open");
    }

    #[test]
    fn blanking_preserves_offsets() {
        let src = "a<!-- x\ny -->b<ref name=\"r\">c</ref>d<ref name=z/>e";
        let (out, bad) = blank_comments_and_refs(src);
        assert_eq!(out.len(), src.len());
        assert_eq!(bad, 0);
        assert_eq!(out.replace(' ', ""), "a\nbde");
        let (_, bad) = blank_comments_and_refs("x <!-- never closed");
        assert_eq!(bad, 1);
    }

    #[test]
    fn top_level_split_ignores_nested_pipes() {
        assert_eq!(split_top_level("a || {{x||y}} || [[p|q]]", "||"), vec!["a ", " {{x||y}} ", " [[p|q]]"]);
        assert_eq!(find_single_pipe("colspan=2 | x"), Some(10));
        assert_eq!(find_single_pipe("a || b"), None);
    }
}
