//! Answer a question end to end with the offline stub model: retrieve,
//! prompt, generate, parse references and audit them.

use std::sync::Arc;

use groundqa::corpus::{Chunk, ChunkMetadata};
use groundqa::prompt::PromptBuilder;
use groundqa::retriever::build_index;
use groundqa::service::{AskRequest, ServiceState};
use groundqa::{Embedder, HashEmbedder, Metric, Retriever, SourceType, StubBackend};

const QUESTION: &str = "What is respite care?";
const ANSWER: &str = "Respite care is a short break for the carer [1].\n\nReferences: [1] https://kb.example/respite";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let texts = [
        ("https://kb.example/respite", "Respite care gives carers a short break."),
        ("https://kb.example/sleep", "A fixed bedtime helps with sleep."),
    ];
    let chunks: Vec<Chunk> = texts
        .iter()
        .enumerate()
        .map(|(i, (url, text))| Chunk {
            chunk_id: format!("doc{i}:0"),
            doc_id: format!("doc{i}"),
            ordinal: 0,
            text: text.to_string(),
            span: (0, text.len()),
            metadata: ChunkMetadata {
                source_url: url.to_string(),
                source_type: SourceType::Guideline,
            },
        })
        .collect();
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(128));
    let index = build_index(&chunks, embedder.as_ref(), Metric::Cosine)?;
    let retriever = Retriever::new(Arc::new(index), chunks, embedder.clone())?;

    let model = Arc::new(StubBackend::canned([(QUESTION, ANSWER)]));
    let state = ServiceState::new(model, embedder, Some(retriever), PromptBuilder::default()).with_k(2);
    let resp = state.ask(&AskRequest {
        question: QUESTION.into(),
        k: None,
    })?;
    println!("{}", serde_json::to_string_pretty(&resp)?);
    Ok(())
}
