//! Start the HTTP API on a free local port with an in-memory index and the
//! offline stub model, call it once, and shut down.
//!
//! `groundqa serve --config config.json` is the long-running equivalent.

use std::sync::Arc;

use groundqa::config::ServiceSection;
use groundqa::corpus::{Chunk, ChunkMetadata};
use groundqa::prompt::PromptBuilder;
use groundqa::retriever::build_index;
use groundqa::service::{router, ServiceState};
use groundqa::{Embedder, HashEmbedder, Metric, Retriever, SourceType, StubBackend};

fn state() -> Result<ServiceState, Box<dyn std::error::Error>> {
    let text = "Respite care gives carers a short break.";
    let chunks = vec![Chunk {
        chunk_id: "respite:0".into(),
        doc_id: "respite".into(),
        ordinal: 0,
        text: text.into(),
        span: (0, text.len()),
        metadata: ChunkMetadata {
            source_url: "https://kb.example/respite".into(),
            source_type: SourceType::Guideline,
        },
    }];
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(128));
    let index = build_index(&chunks, embedder.as_ref(), Metric::Cosine)?;
    let retriever = Retriever::new(Arc::new(index), chunks, embedder.clone())?;
    Ok(ServiceState::new(Arc::new(StubBackend::echo()), embedder, Some(retriever), PromptBuilder::default()))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let state = Arc::new(state()?);
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let app = router(state.clone(), &ServiceSection::default());
    rt.spawn(async move { axum::serve(listener, app).await });
    println!("listening on http://{addr}");

    // a blocking client must live outside the runtime
    let client = reqwest::blocking::Client::new();
    let health: serde_json::Value = client.get(format!("http://{addr}/api/health")).send()?.json()?;
    println!("GET /api/health -> {health}");
    let answer: serde_json::Value = client
        .post(format!("http://{addr}/api/ask"))
        .json(&serde_json::json!({ "question": "What is respite care?" }))
        .send()?
        .json()?;
    println!("POST /api/ask -> {}", serde_json::to_string_pretty(&answer)?);

    drop(rt);
    Ok(())
}
