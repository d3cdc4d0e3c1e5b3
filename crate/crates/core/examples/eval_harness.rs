//! Run the evaluation harness twice over a small test set, once without
//! retrieval and once with it, and print the comparison table.
//!
//! The "model" is the offline stub: without retrieval it echoes the
//! question, with retrieval it returns the gold answer. Real runs point the
//! CLI's `eval` command at a chat-completions server instead.

use std::sync::Arc;

use groundqa::corpus::{Chunk, ChunkMetadata};
use groundqa::harness::{compare_runs, run_eval, EvalDeps, EvalRunConfig, Setting};
use groundqa::prompt::PromptBuilder;
use groundqa::qa_dataset::{self, QAPair};
use groundqa::retriever::build_index;
use groundqa::{Embedder, HashEmbedder, Metric, Retriever, SourceType, StubBackend};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let topics = ["sleep", "respite", "driving", "eating", "bathing"];
    let pairs: Vec<QAPair> = topics
        .iter()
        .enumerate()
        .map(|(i, t)| {
            QAPair::new(
                format!("q{i}"),
                format!("What helps with {t}?"),
                format!("Advice about {t} [1].\n\nReferences: [1] https://kb.example/{t}"),
            )
        })
        .collect();
    let dataset = tmp.path().join("test.jsonl");
    qa_dataset::save(&pairs, &dataset)?;

    let chunks: Vec<Chunk> = topics
        .iter()
        .enumerate()
        .map(|(i, t)| Chunk {
            chunk_id: format!("doc{i}:0"),
            doc_id: format!("doc{i}"),
            ordinal: 0,
            text: format!("Practical tips on {t} for family carers."),
            span: (0, 40),
            metadata: ChunkMetadata {
                source_url: format!("https://kb.example/{t}"),
                source_type: SourceType::WebArticle,
            },
        })
        .collect();
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256));
    let index = build_index(&chunks, embedder.as_ref(), Metric::Cosine)?;
    let retriever = Retriever::new(Arc::new(index), chunks, embedder.clone())?;

    let echo = StubBackend::echo();
    let gold = StubBackend::canned(pairs.iter().map(|p| (p.question.clone(), p.answer.clone())));

    let mut summaries = Vec::new();
    for (setting, model) in [(Setting::Vanilla, &echo), (Setting::Rag, &gold)] {
        let config = EvalRunConfig {
            setting,
            k: 2,
            dataset_path: dataset.clone(),
            output_dir: Some(tmp.path().join(setting.to_string())),
            ..Default::default()
        };
        let deps = EvalDeps {
            generator: model,
            retriever: setting.uses_retrieval().then_some(&retriever),
            embedder: embedder.as_ref(),
            prompts: PromptBuilder::default(),
        };
        let result = run_eval(&config, &deps)?;
        println!(
            "{setting}: {} items, {} returning references",
            result.summary.run_metadata.n_items, result.summary.reference_stats.n_returning
        );
        summaries.push(result.summary);
    }

    println!("\n{}", compare_runs(&summaries)?.to_markdown());
    println!("artifacts in {}", tmp.keep().display());
    Ok(())
}
