//! Inline citations and reference lists in generated answers.
//!
//! Grammar: inline citations are bracketed integers in the body (`[2]`,
//! runs like `[1][3]` included). The reference section starts at the last
//! `References:` (any case) that is not glued to a preceding word. Inside
//! it, each `[n]` marker owns the text up to the next marker, and the
//! first http(s) URL in that text is the reference, whether written bare
//! (`[1] https://…`) or as a markdown link (`[1](https://…)`).

mod audit;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use audit::{
    aggregate, audit, audit_with_liveness, canonicalize_url, check_url_live, CitationError,
    LivenessChecker, ReferenceAudit, ReferenceStats,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub index: u32,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub body: String,
    /// In order of appearance, duplicates kept.
    pub inline_citations: Vec<u32>,
    /// Unique indices, in order of first appearance.
    pub references: Vec<Reference>,
    /// Reference markers with no usable URL, e.g. a bare page title.
    #[serde(default)]
    pub unresolved_entries: Vec<u32>,
}

impl ParsedAnswer {
    pub fn has_references(&self) -> bool {
        !self.references.is_empty()
    }

    pub fn reference_urls(&self) -> Vec<&str> {
        self.references.iter().map(|r| r.url.as_str()).collect()
    }
}

static INLINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d{1,9})\]").unwrap());
static HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)references\s*:").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)https?://[^\s<>\[\]()"]+"#).unwrap());
/// Markup left dangling at the end of a body, e.g. the `<p>` that opened
/// the references paragraph.
static TRAILING_MARKUP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:\s|<[A-Za-z][^<>]*>|[*_#])+$").unwrap());

fn reference_header(text: &str) -> Option<(usize, usize)> {
    HEADER
        .find_iter(text)
        .filter(|m| {
            text[..m.start()]
                .chars()
                .next_back()
                .is_none_or(|c| !c.is_alphanumeric())
        })
        .last()
        .map(|m| (m.start(), m.end()))
}

fn valid_url(candidate: &str) -> Option<String> {
    let trimmed = candidate.trim_end_matches(['.', ',', ';', ':']);
    let parsed = url::Url::parse(trimmed).ok()?;
    (matches!(parsed.scheme(), "http" | "https") && parsed.host().is_some()).then(|| trimmed.to_string())
}

fn parse_references(section: &str) -> (Vec<Reference>, Vec<u32>) {
    let markers: Vec<_> = INLINE
        .captures_iter(section)
        .filter_map(|c| {
            let m = c.get(0)?;
            Some((c[1].parse::<u32>().ok()?, m.start(), m.end()))
        })
        .collect();
    let mut refs: Vec<Reference> = Vec::new();
    let mut unresolved: Vec<u32> = Vec::new();
    for (i, &(index, _, end)) in markers.iter().enumerate() {
        let stop = markers.get(i + 1).map_or(section.len(), |m| m.1);
        let segment = &section[end..stop];
        let url = URL.find_iter(segment).find_map(|m| valid_url(m.as_str()));
        let seen = refs.iter().any(|r| r.index == index) || unresolved.contains(&index);
        match url {
            Some(url) if !seen => refs.push(Reference { index, url }),
            None if !seen => unresolved.push(index),
            _ => {}
        }
    }
    (refs, unresolved)
}

fn trim_body(body: &str) -> &str {
    let trimmed = match TRAILING_MARKUP.find(body) {
        Some(m) => &body[..m.start()],
        None => body,
    };
    trimmed.trim_start()
}

/// Never fails: text without the grammar parses to empty lists.
pub fn parse_answer(text: &str) -> ParsedAnswer {
    let (body, section) = match reference_header(text) {
        Some((start, end)) => (&text[..start], Some(&text[end..])),
        None => (text, None),
    };
    let body = if section.is_some() { trim_body(body) } else { body.trim() };
    let inline_citations = INLINE
        .captures_iter(body)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    let (references, unresolved_entries) = section.map(parse_references).unwrap_or_default();
    ParsedAnswer {
        body: body.to_string(),
        inline_citations,
        references,
        unresolved_entries,
    }
}

/// Canonical text form: the body, then a `References:` line with one
/// `[n] url` entry per reference. `parse_answer` inverts it.
pub fn render(parsed: &ParsedAnswer) -> String {
    if parsed.references.is_empty() {
        return parsed.body.clone();
    }
    let refs: Vec<String> = parsed
        .references
        .iter()
        .map(|r| format!("[{}] {}", r.index, r.url))
        .collect();
    if parsed.body.is_empty() {
        format!("References: {}", refs.join(" "))
    } else {
        format!("{}\n\nReferences: {}", parsed.body, refs.join(" "))
    }
}

/// Text scored by the metrics: the body, or the whole text when the body
/// is empty.
pub fn scoring_text(text: &str) -> String {
    let body = parse_answer(text).body;
    if body.trim().is_empty() {
        text.trim().to_string()
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(index: u32, url: &str) -> Reference {
        Reference {
            index,
            url: url.into(),
        }
    }

    #[test]
    fn no_citations() {
        let p = parse_answer("No citations here.");
        assert!(p.inline_citations.is_empty());
        assert!(p.references.is_empty());
        assert_eq!(p.body, "No citations here.");
    }

    #[test]
    fn bare_and_markdown_entries() {
        let p = parse_answer(
            "Fact [1]. Fact [1][3]. References: [1] https://a.example/x [3](https://b.example/y)",
        );
        assert_eq!(p.inline_citations, [1, 1, 3]);
        assert_eq!(p.references, [r(1, "https://a.example/x"), r(3, "https://b.example/y")]);
        assert_eq!(p.body, "Fact [1]. Fact [1][3].");
    }

    #[test]
    fn entries_without_separators() {
        let p = parse_answer("A [1] B [2]. References:[1] https://a.example/x/[2] https://b.example/y.</p>");
        assert_eq!(p.references, [r(1, "https://a.example/x/"), r(2, "https://b.example/y")]);
    }

    #[test]
    fn title_only_entry_is_unresolved() {
        let p = parse_answer("x [1] [2]\nReferences: [1] Some Page Title (site.gov) [2] https://c.example/z");
        assert_eq!(p.references, [r(2, "https://c.example/z")]);
        assert_eq!(p.unresolved_entries, [1]);
    }

    #[test]
    fn header_glued_to_a_word_is_not_a_section() {
        let p = parse_answer("See crossreferences: [1] https://a.example");
        assert!(p.references.is_empty());
        assert_eq!(p.inline_citations, [1]);
    }

    #[test]
    fn dangling_markup_is_trimmed_from_body() {
        let p = parse_answer("<p>Text [1].</p> <p>References: [1] https://a.example/x</p>");
        assert_eq!(p.body, "<p>Text [1].</p>");
    }

    #[test]
    fn malformed_urls_are_skipped() {
        let p = parse_answer("References: [1] https://exa mple [2] http:// [3] https://ok.example");
        assert_eq!(p.references, [r(1, "https://exa"), r(3, "https://ok.example")]);
        assert_eq!(p.unresolved_entries, [2]);
    }

    #[test]
    fn scoring_text_falls_back_to_whole_text() {
        assert_eq!(scoring_text("Body [1]. References: [1] https://a.example"), "Body [1].");
        assert_eq!(
            scoring_text("References: [1] https://a.example"),
            "References: [1] https://a.example"
        );
    }

    fn arb_parsed() -> impl Strategy<Value = ParsedAnswer> {
        let word = "[a-z]{1,8}";
        let body = (
            proptest::collection::vec(word, 1..12),
            proptest::collection::vec(1u32..6, 0..4),
        );
        let refs = proptest::collection::btree_map(1u32..9, "[a-z]{1,6}", 0..4);
        (body, refs).prop_map(|((words, cites), refs)| {
            let mut body = words.join(" ");
            for c in &cites {
                body.push_str(&format!(" [{c}]"));
            }
            body.push('.');
            ParsedAnswer {
                body,
                inline_citations: cites,
                references: refs
                    .into_iter()
                    .map(|(i, p)| Reference {
                        index: i,
                        url: format!("https://kb.example/{p}"),
                    })
                    .collect(),
                unresolved_entries: Vec::new(),
            }
        })
    }

    proptest! {
        #[test]
        fn render_round_trips(p in arb_parsed()) {
            prop_assert_eq!(parse_answer(&render(&p)), p);
        }
    }
}
