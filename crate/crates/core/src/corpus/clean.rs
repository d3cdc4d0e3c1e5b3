use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

/// Per-rule hit counts produced by [`clean_with_report`].
pub type CleaningReport = BTreeMap<String, usize>;

pub const RULE_CONTROL: &str = "control_chars";
pub const RULE_SPACES: &str = "space_runs";
pub const RULE_NEWLINES: &str = "newline_runs";
pub const RULE_PUNCT: &str = "punctuation_runs";
pub const RULE_TRIM: &str = "trim";

static HORIZONTAL_WS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^\S\n]+").unwrap());
static NEWLINE_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r" ?\n[ \n]*").unwrap());

/// Shortest run of one repeated punctuation mark that gets collapsed.
const PUNCT_RUN_MIN: usize = 3;

pub fn clean_text(text: &str) -> String {
    clean_with_report(text).0
}

/// Applies the cleaning rules in a fixed order: control characters,
/// horizontal whitespace runs, newline runs, repeated punctuation, trim.
///
/// The output never holds two adjacent spaces or two adjacent newlines, and
/// cleaning is idempotent.
pub fn clean_with_report(text: &str) -> (String, CleaningReport) {
    let mut report = CleaningReport::new();

    let mut removed = 0;
    let stripped: String = text
        .chars()
        .filter(|&c| {
            let drop = is_removable(c);
            removed += drop as usize;
            !drop
        })
        .collect();
    report.insert(RULE_CONTROL.into(), removed);

    let (spaced, hits) = replace_counting(&HORIZONTAL_WS, &stripped, " ");
    report.insert(RULE_SPACES.into(), hits);

    let (lined, hits) = replace_counting(&NEWLINE_RUN, &spaced, "\n");
    report.insert(RULE_NEWLINES.into(), hits);

    let (collapsed, hits) = collapse_punctuation_runs(&lined);
    report.insert(RULE_PUNCT.into(), hits);

    let trimmed = collapsed.trim();
    report.insert(RULE_TRIM.into(), (trimmed.len() != collapsed.len()) as usize);

    (trimmed.to_string(), report)
}

fn is_removable(c: char) -> bool {
    if c == '\n' || c == '\t' {
        return false;
    }
    // zero-width characters and the byte-order mark
    c.is_control() || matches!(c, '\u{200B}'..='\u{200D}' | '\u{2060}' | '\u{FEFF}')
}

fn replace_counting(re: &Regex, text: &str, with: &str) -> (String, usize) {
    let mut hits = 0;
    let out = re.replace_all(text, |caps: &regex::Captures<'_>| {
        if &caps[0] != with {
            hits += 1;
        }
        with.to_string()
    });
    (out.into_owned(), hits)
}

fn collapse_punctuation_runs(text: &str) -> (String, usize) {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut hits = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let mut j = i + 1;
        while j < chars.len() && chars[j] == c {
            j += 1;
        }
        let run = j - i;
        if is_punctuation(c) && run >= PUNCT_RUN_MIN {
            out.push(c);
            hits += 1;
        } else {
            out.extend(std::iter::repeat_n(c, run));
        }
        i = j;
    }
    (out, hits)
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collapses_space_runs() {
        assert_eq!(clean_text("a  b"), "a b");
    }

    #[test]
    fn collapses_newline_runs() {
        assert_eq!(clean_text("a\n\n\nb"), "a\nb");
        assert_eq!(clean_text("a \n \n b"), "a\nb");
    }

    #[test]
    fn punctuation_and_control() {
        assert_eq!(clean_text("wow!!!!\u{0007}"), "wow!");
        // runs of two are left alone
        assert_eq!(clean_text("hm.. ok"), "hm.. ok");
    }

    #[test]
    fn report_counts_hits() {
        let (text, report) = clean_with_report("  a\t\tb\r\n\r\nc???  ");
        assert_eq!(text, "a b\nc?");
        assert_eq!(report[RULE_CONTROL], 2);
        assert_eq!(report[RULE_PUNCT], 1);
        assert_eq!(report[RULE_TRIM], 1);
        assert!(report[RULE_SPACES] >= 2);
    }

    #[test]
    fn tabs_and_nbsp_become_single_spaces() {
        assert_eq!(clean_text("a\t\u{00A0} b"), "a b");
        assert_eq!(clean_text("zero\u{200B}width"), "zerowidth");
    }

    proptest! {
        #[test]
        fn idempotent(s in "[a-c !.?\\n\\t\\r\u{0007}\u{00A0}é]{0,60}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(!once.contains("  "));
            prop_assert!(!once.contains("\n\n"));
        }

        #[test]
        fn idempotent_any_unicode(s in any::<String>()) {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }
    }
}
