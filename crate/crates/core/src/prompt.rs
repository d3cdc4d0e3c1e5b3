//! Prompt assembly: grounding instructions, numbered context blocks, then
//! the question.
//!
//! Each block renders as `Content: {content}Source: [{index}] <{url}>` and
//! blocks are concatenated without separators. The character budget is
//! enforced by dropping whole blocks from the lowest rank up; only when the
//! top block alone does not fit is its content cut at a whitespace
//! boundary. The system text and the question are never trimmed.

use serde::{Deserialize, Serialize};

use crate::retriever::RetrievedContext;

/// Grounding instructions used for the RAG settings.
pub const SYSTEM_GROUNDED: &str = include_str!("../prompts/system_grounded.txt");

pub const DEFAULT_CHAR_BUDGET: usize = 12_000;

const PART_SEPARATOR: &str = "\n\n";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("budget too small: {budget} chars, system text and question need {needed}")]
    BudgetTooSmall { budget: usize, needed: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    /// 1-based, equal to the retrieval rank.
    pub index: usize,
    pub source_url: String,
    pub content: String,
}

impl ContextBlock {
    pub fn render(&self) -> String {
        format!("Content: {}Source: [{}] <{}>", self.content, self.index, self.source_url)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub context_blocks: Vec<ContextBlock>,
    pub question: String,
    pub rendered: String,
    pub char_budget: usize,
}

impl PromptBundle {
    fn assemble(
        system_text: &str,
        context_blocks: Vec<ContextBlock>,
        question: &str,
        char_budget: usize,
    ) -> Self {
        let mut bundle = Self {
            system_text: system_text.to_string(),
            context_blocks,
            question: question.to_string(),
            rendered: String::new(),
            char_budget,
        };
        bundle.rendered = bundle.render();
        bundle
    }

    /// System text followed by the context blocks: the content of the
    /// system message in a chat request.
    pub fn system_message(&self) -> String {
        let context: String = self.context_blocks.iter().map(ContextBlock::render).collect();
        [self.system_text.as_str(), context.as_str()]
            .into_iter()
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join(PART_SEPARATOR)
    }

    /// Pure function of the fields; `rendered` always equals this.
    pub fn render(&self) -> String {
        let system = self.system_message();
        if system.is_empty() {
            self.question.clone()
        } else {
            format!("{system}{PART_SEPARATOR}{}", self.question)
        }
    }

    pub fn source_urls(&self) -> Vec<&str> {
        self.context_blocks.iter().map(|b| b.source_url.as_str()).collect()
    }
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Prompt assembly with a fixed system text and budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBuilder {
    pub system_text: String,
    pub char_budget: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self {
            system_text: SYSTEM_GROUNDED.to_string(),
            char_budget: DEFAULT_CHAR_BUDGET,
        }
    }
}

impl PromptBuilder {
    pub fn new(system_text: impl Into<String>, char_budget: usize) -> Self {
        Self {
            system_text: system_text.into(),
            char_budget,
        }
    }

    /// The shipped grounding text with a custom budget.
    pub fn grounded(char_budget: usize) -> Self {
        Self::new(SYSTEM_GROUNDED, char_budget)
    }

    pub fn build(&self, question: &str, ctx: &RetrievedContext) -> Result<PromptBundle, PromptError> {
        if question.trim().is_empty() {
            return Err(PromptError::EmptyQuestion);
        }
        let budget = self.char_budget;
        let bare = PromptBundle::assemble(&self.system_text, Vec::new(), question, budget);
        let bare_len = char_len(&bare.rendered);
        if bare_len > budget {
            return Err(PromptError::BudgetTooSmall {
                budget,
                needed: bare_len,
            });
        }

        let blocks: Vec<ContextBlock> = ctx
            .hits
            .iter()
            .enumerate()
            .map(|(i, hit)| ContextBlock {
                index: i + 1,
                source_url: hit.metadata.source_url.clone(),
                content: hit.text.clone(),
            })
            .collect();

        for keep in (1..=blocks.len()).rev() {
            let candidate =
                PromptBundle::assemble(&self.system_text, blocks[..keep].to_vec(), question, budget);
            if char_len(&candidate.rendered) <= budget {
                return Ok(candidate);
            }
        }

        // Not even the top block fits whole: trim its content.
        if let Some(first) = blocks.into_iter().next() {
            let shell = ContextBlock {
                content: String::new(),
                ..first.clone()
            };
            let empty_len = char_len(
                &PromptBundle::assemble(&self.system_text, vec![shell], question, budget).rendered,
            );
            if empty_len < budget {
                let content = truncate_at_whitespace(&first.content, budget - empty_len);
                if !content.is_empty() {
                    let block = ContextBlock { content, ..first };
                    return Ok(PromptBundle::assemble(&self.system_text, vec![block], question, budget));
                }
            }
        }
        Ok(bare)
    }
}

/// Longest prefix of at most `max_chars` characters that ends at a
/// whitespace boundary (or at the end of `text`), without trailing
/// whitespace.
fn truncate_at_whitespace(text: &str, max_chars: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= max_chars {
        return text.trim_end().to_string();
    }
    let cut = (1..=max_chars)
        .rev()
        .find(|&i| chars[i].is_whitespace())
        .unwrap_or(0);
    chars[..cut].iter().collect::<String>().trim_end().to_string()
}

/// Grounded prompt with the shipped system text.
pub fn build_prompt(
    question: &str,
    ctx: &RetrievedContext,
    char_budget: usize,
) -> Result<PromptBundle, PromptError> {
    PromptBuilder::grounded(char_budget).build(question, ctx)
}

/// Question only, no grounding and no context.
pub fn vanilla_prompt(question: &str) -> Result<PromptBundle, PromptError> {
    vanilla_prompt_with(question, "")
}

/// Vanilla prompt with an optional minimal system line.
pub fn vanilla_prompt_with(question: &str, system_line: &str) -> Result<PromptBundle, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    Ok(PromptBundle::assemble(system_line, Vec::new(), question, usize::MAX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ChunkMetadata, SourceType};
    use crate::retriever::RetrievedHit;

    fn ctx(n: usize, len: usize) -> RetrievedContext {
        RetrievedContext {
            question: "q".into(),
            k_requested: n,
            hits: (0..n)
                .map(|i| RetrievedHit {
                    chunk_id: format!("d:{i}"),
                    score: 1.0 - i as f64 / 10.0,
                    metadata: ChunkMetadata {
                        source_url: format!("https://kb.example/{i}"),
                        source_type: SourceType::Guideline,
                    },
                    text: "word ".repeat(len / 5).trim_end().to_string(),
                })
                .collect(),
            empty_index: false,
        }
    }

    const Q: &str = "What are the early signs of dementia?";

    #[test]
    fn asset_is_the_grounding_text() {
        assert!(SYSTEM_GROUNDED.starts_with("Generate a comprehensive, informative and helpful answer"));
        assert!(SYSTEM_GROUNDED.contains("``[index](Source link)``"));
        assert!(SYSTEM_GROUNDED.ends_with("please don't share false information."));
    }

    #[test]
    fn blocks_numbered_in_rank_order() {
        let p = build_prompt(Q, &ctx(3, 100), DEFAULT_CHAR_BUDGET).unwrap();
        let idx: Vec<_> = p.context_blocks.iter().map(|b| b.index).collect();
        assert_eq!(idx, [1, 2, 3]);
        assert_eq!(p.rendered.matches(SYSTEM_GROUNDED).count(), 1);
        assert!(p.rendered.contains("Source: [2] <https://kb.example/1>Content: "));
        assert!(p.rendered.ends_with(Q));
        assert_eq!(p.rendered, p.render());
    }

    #[test]
    fn zero_hits_keeps_system_and_question() {
        let p = build_prompt(Q, &RetrievedContext::empty(Q, 3), DEFAULT_CHAR_BUDGET).unwrap();
        assert!(p.context_blocks.is_empty());
        assert!(!p.rendered.contains("Content:"));
        assert_eq!(p.rendered, format!("{SYSTEM_GROUNDED}\n\n{Q}"));
    }

    #[test]
    fn drops_lowest_rank_block_first() {
        let c = ctx(3, 500);
        let two = build_prompt(Q, &ctx(2, 500), usize::MAX).unwrap();
        let budget = two.rendered.chars().count() + 10;
        let p = build_prompt(Q, &c, budget).unwrap();
        let idx: Vec<_> = p.context_blocks.iter().map(|b| b.index).collect();
        assert_eq!(idx, [1, 2]);
        assert_eq!(p.context_blocks[1].content, c.hits[1].text, "kept blocks are whole");
        assert!(p.rendered.chars().count() <= budget);
    }

    #[test]
    fn trims_top_block_when_alone_too_long() {
        let bare = build_prompt(Q, &RetrievedContext::empty(Q, 3), usize::MAX).unwrap();
        let budget = bare.rendered.chars().count() + 120;
        let p = build_prompt(Q, &ctx(3, 1000), budget).unwrap();
        assert_eq!(p.context_blocks.len(), 1);
        let content = &p.context_blocks[0].content;
        assert!(!content.is_empty() && content.ends_with("word"));
        assert!(p.rendered.chars().count() <= budget);
        assert!(p.rendered.ends_with(Q));
    }

    #[test]
    fn budget_too_small() {
        let err = build_prompt(Q, &ctx(1, 10), 50).unwrap_err();
        assert!(err.to_string().starts_with("budget too small"));
    }

    #[test]
    fn vanilla_is_question_only() {
        let p = vanilla_prompt(Q).unwrap();
        assert_eq!(p.rendered, Q);
        assert!(p.context_blocks.is_empty());
        assert_eq!(vanilla_prompt(""), Err(PromptError::EmptyQuestion));
        let with_line = vanilla_prompt_with(Q, "You are a helpful assistant.").unwrap();
        assert_eq!(with_line.rendered, format!("You are a helpful assistant.\n\n{Q}"));
    }

    #[test]
    fn truncation_respects_whitespace() {
        assert_eq!(truncate_at_whitespace("alpha beta gamma", 12), "alpha beta");
        assert_eq!(truncate_at_whitespace("alpha beta", 10), "alpha beta");
        assert_eq!(truncate_at_whitespace("alphabet", 4), "");
    }
}
