use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_CHARS: usize = 1200;

/// A chunk boundary within a cleaned text. Offsets count Unicode scalar
/// values, `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSpan {
    pub ordinal: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl TextSpan {
    pub fn char_len(&self) -> usize {
        self.end - self.start
    }
}

/// Greedy, non-overlapping split of `text` into pieces of at most
/// `max_chars` characters.
///
/// Each piece ends at the last whitespace at or before the budget; a single
/// token longer than the budget is cut mid-word. Whitespace at the
/// boundaries is excluded, so the spans cover every non-whitespace
/// character exactly once. A `max_chars` of 0 is treated as 1.
pub fn chunk_text(text: &str, max_chars: usize) -> Vec<TextSpan> {
    let max_chars = max_chars.max(1);
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = 0;

    loop {
        while start < n && chars[start].is_whitespace() {
            start += 1;
        }
        if start >= n {
            break;
        }

        let limit = start + max_chars;
        let cut = if limit >= n {
            n
        } else {
            (start + 1..=limit)
                .rev()
                .find(|&i| chars[i].is_whitespace())
                .unwrap_or(limit)
        };

        let mut end = cut;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        spans.push(TextSpan {
            ordinal: spans.len(),
            start,
            end,
            text: chars[start..end].iter().collect(),
        });
        start = cut;
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_budget_is_one_chunk() {
        let text: String = "abcdefghij".repeat(120);
        let spans = chunk_text(&text, 1200);
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end), (0, 1200));
    }

    #[test]
    fn empty_and_blank() {
        assert!(chunk_text("", 1200).is_empty());
        assert!(chunk_text("   \n ", 1200).is_empty());
    }

    #[test]
    fn oversized_token_is_hard_split() {
        let spans = chunk_text("aaaaaaa bb", 3);
        let texts: Vec<_> = spans.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["aaa", "aaa", "a", "bb"]);
    }

    #[test]
    fn counts_characters_not_bytes() {
        let spans = chunk_text("éé éé", 2);
        let texts: Vec<_> = spans.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["éé", "éé"]);
        assert_eq!((spans[1].start, spans[1].end), (3, 5));
    }

    #[test]
    fn zero_budget_behaves_as_one() {
        assert_eq!(chunk_text("ab", 0).len(), 2);
    }
}
