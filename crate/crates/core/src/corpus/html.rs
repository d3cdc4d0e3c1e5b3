//! Minimal HTML to text extraction.
//!
//! Tags are stripped, `script`/`style`/`noscript`/`template` bodies and
//! comments are dropped, entities are decoded, and block-level element
//! boundaries become single newlines. Anything that does not parse as a tag
//! is kept as text.

const SKIP_CONTENT: &[&str] = &["script", "style", "noscript", "template"];

const BLOCK_TAGS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "details", "dialog", "div",
    "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4",
    "h5", "h6", "head", "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section",
    "summary", "table", "tbody", "td", "tfoot", "th", "thead", "title", "tr", "ul",
];

pub fn html_to_text(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut text = String::new();
    let mut rest = html;

    while let Some(lt) = rest.find('<') {
        text.push_str(&rest[..lt]);
        let after = &rest[lt..];

        if let Some(body) = after.strip_prefix("<!--") {
            flush(&mut out, &mut text);
            rest = match body.find("-->") {
                Some(end) => &body[end + 3..],
                None => "",
            };
            continue;
        }

        let Some(tag) = parse_tag(after) else {
            text.push('<');
            rest = &after[1..];
            continue;
        };
        flush(&mut out, &mut text);
        rest = &after[tag.len..];

        if tag.is_declaration {
            continue;
        }
        if !tag.closing && !tag.self_closing && SKIP_CONTENT.contains(&tag.name.as_str()) {
            rest = skip_until_close(rest, &tag.name);
            continue;
        }
        if BLOCK_TAGS.contains(&tag.name.as_str()) {
            push_break(&mut out);
        }
    }
    text.push_str(rest);
    flush(&mut out, &mut text);

    out.trim().to_string()
}

struct Tag {
    name: String,
    closing: bool,
    is_declaration: bool,
    self_closing: bool,
    /// Byte length of the whole tag including `<` and `>`.
    len: usize,
}

/// Parses a tag at the start of `s` (which begins with `<`). Returns `None`
/// when the `<` does not start a tag, e.g. `a < b`.
fn parse_tag(s: &str) -> Option<Tag> {
    let inner = &s[1..];
    let (closing, name_start) = match inner.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, inner),
    };
    let first = name_start.chars().next()?;
    let is_declaration = !closing && (first == '!' || first == '?');
    if !is_declaration && !first.is_ascii_alphabetic() {
        return None;
    }
    let close = find_tag_end(s)?;
    let name: String = name_start
        .chars()
        .skip(is_declaration as usize)
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-')
        .collect::<String>()
        .to_ascii_lowercase();
    Some(Tag {
        name,
        closing,
        is_declaration,
        self_closing: s[..=close].ends_with("/>"),
        len: close + 1,
    })
}

/// Index of the `>` closing the tag, honouring quoted attribute values.
fn find_tag_end(s: &str) -> Option<usize> {
    let mut quote: Option<u8> = None;
    for (i, b) in s.bytes().enumerate().skip(1) {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some(i),
            None => {}
        }
    }
    // unterminated quote: fall back to the first '>'
    s.find('>')
}

fn skip_until_close<'a>(s: &'a str, name: &str) -> &'a str {
    let lower = s.to_ascii_lowercase();
    let needle = format!("</{name}");
    match lower.find(&needle) {
        Some(pos) => match s[pos..].find('>') {
            Some(end) => &s[pos + end + 1..],
            None => "",
        },
        None => "",
    }
}

fn flush(out: &mut String, text: &mut String) {
    if text.is_empty() {
        return;
    }
    let decoded = html_escape::decode_html_entities(text);
    if out.is_empty() || out.ends_with('\n') {
        out.push_str(decoded.trim_start());
    } else {
        out.push_str(&decoded);
    }
    text.clear();
}

fn push_break(out: &mut String) {
    let kept = out.trim_end().len();
    out.truncate(kept);
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_single_tag() {
        assert_eq!(html_to_text("<p>Hello</p>"), "Hello");
    }

    #[test]
    fn empty_input() {
        assert_eq!(html_to_text(""), "");
    }

    #[test]
    fn script_inside_block_is_dropped() {
        assert_eq!(html_to_text("<div>a<script>x()</script>b</div>"), "ab");
    }

    #[test]
    fn lone_angle_bracket_is_text() {
        assert_eq!(html_to_text("a < b and c>d"), "a < b and c>d");
    }

    #[test]
    fn unterminated_script_drops_rest() {
        assert_eq!(html_to_text("<p>keep</p><script>var a = 1;"), "keep");
    }
}
