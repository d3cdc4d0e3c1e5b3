use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::QAPair;
use crate::citations::parse_answer;
use crate::corpus::Chunk;
use crate::llm_client::Generator;
use crate::prompt::{vanilla_prompt_with, PromptBuilder, DEFAULT_CHAR_BUDGET};
use crate::retriever::{Retriever, DEFAULT_K};

pub const QUESTION_INSTRUCTION: &str =
    "Write one question that a family caregiver could ask and that the following text answers. Reply with the question only.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub k: usize,
    pub char_budget: usize,
    pub question_instruction: String,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            char_budget: DEFAULT_CHAR_BUDGET,
            question_instruction: QUESTION_INSTRUCTION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisError {
    pub seed_chunk_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub drafts: Vec<QAPair>,
    pub errors: Vec<SynthesisError>,
}

fn draft_one(
    seed: &Chunk,
    retriever: &Retriever,
    backend: &dyn Generator,
    opts: &SynthesisOptions,
) -> Result<QAPair, String> {
    let ask = vanilla_prompt_with(&seed.text, &opts.question_instruction).map_err(|e| e.to_string())?;
    let question = backend.generate(&ask).map_err(|e| e.to_string())?.text.trim().to_string();

    let ctx = retriever.retrieve(&question, opts.k).map_err(|e| e.to_string())?;
    let prompt = PromptBuilder::grounded(opts.char_budget)
        .build(&question, &ctx)
        .map_err(|e| e.to_string())?;
    let answer = backend.generate(&prompt).map_err(|e| e.to_string())?.text;
    let references = parse_answer(&answer)
        .references
        .into_iter()
        .map(|r| r.url)
        .collect();
    Ok(QAPair {
        id: format!("draft-{}", seed.chunk_id),
        question,
        context: seed.text.clone(),
        answer,
        references,
        split: None,
        unvalidated: true,
    })
}

/// One draft pair per seed chunk. The backend first writes a question
/// from the seed text (sent as the user message under the question
/// instruction); that question is then answered with the grounded prompt
/// over its top-k retrieved chunks. Failures are collected per seed and
/// drafts keep seed order.
pub fn synthesize_qa(
    seeds: &[Chunk],
    retriever: &Retriever,
    backend: &dyn Generator,
    opts: &SynthesisOptions,
) -> SynthesisReport {
    let results: Vec<_> = seeds
        .par_iter()
        .map(|seed| (seed, draft_one(seed, retriever, backend, opts)))
        .collect();
    let mut report = SynthesisReport::default();
    for (seed, result) in results {
        match result {
            Ok(pair) => report.drafts.push(pair),
            Err(message) => report.errors.push(SynthesisError {
                seed_chunk_id: seed.chunk_id.clone(),
                message,
            }),
        }
    }
    report
}
