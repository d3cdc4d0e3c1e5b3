//! Retrieve context for a question and show the prompt that would be sent
//! to the model.

use std::sync::Arc;

use groundqa::corpus::{Chunk, ChunkMetadata};
use groundqa::prompt::PromptBuilder;
use groundqa::retriever::build_index;
use groundqa::{Embedder, HashEmbedder, Metric, Retriever, SourceType};

fn chunk(i: usize, url: &str, text: &str) -> Chunk {
    Chunk {
        chunk_id: format!("doc{i}:0"),
        doc_id: format!("doc{i}"),
        ordinal: 0,
        text: text.into(),
        span: (0, text.chars().count()),
        metadata: ChunkMetadata {
            source_url: url.into(),
            source_type: SourceType::WebArticle,
        },
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chunks = vec![
        chunk(0, "https://kb.example/sleep", "Daylight and a fixed bedtime help with sleep."),
        chunk(1, "https://kb.example/respite", "Respite care gives carers a short break."),
        chunk(2, "https://kb.example/driving", "Driving should be reviewed after a diagnosis."),
    ];
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256));
    let index = build_index(&chunks, embedder.as_ref(), Metric::Cosine)?;
    let retriever = Retriever::new(Arc::new(index), chunks, embedder)?;

    let question = "How can I get a break from caring?";
    let ctx = retriever.retrieve(question, 2)?;
    for hit in &ctx.hits {
        println!("{:.3} {}", hit.score, hit.metadata.source_url);
    }
    let prompt = PromptBuilder::default().build(question, &ctx)?;
    println!("\n{}", prompt.rendered);
    Ok(())
}
