//! Embed a handful of passages, search them exactly, and round-trip the
//! index through disk.

use groundqa::corpus::ChunkMetadata;
use groundqa::vector_store::IndexEntry;
use groundqa::{Embedder, HashEmbedder, Metric, SourceType, VectorIndex};

const PASSAGES: &[&str] = &[
    "Keep a regular bedtime routine to help with sleep problems.",
    "Wandering is common; a door alarm can help keep a person safe.",
    "Respite care gives carers a short break from caring.",
    "Check with the doctor before changing any medication.",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = HashEmbedder::new(256);
    let texts: Vec<String> = PASSAGES.iter().map(|s| s.to_string()).collect();
    let vectors = embedder.embed(&texts)?;

    let mut index = VectorIndex::new(embedder.dim(), Metric::Cosine);
    let entries = vectors
        .into_iter()
        .enumerate()
        .map(|(i, vector)| IndexEntry {
            chunk_id: format!("p{i}"),
            vector,
            metadata: ChunkMetadata {
                source_url: format!("https://kb.example/{i}"),
                source_type: SourceType::WebArticle,
            },
        })
        .collect();
    index.add(entries)?;

    let query = embedder.embed(&["how can a carer get a break".to_string()])?.remove(0);
    for hit in index.search(&query, 2)? {
        println!("{:.4}  {}  {}", hit.score, hit.chunk_id, hit.metadata.source_url);
    }

    let dir = tempfile::tempdir()?;
    index.persist(dir.path())?;
    let loaded = VectorIndex::load(dir.path())?;
    assert_eq!(loaded.search(&query, 2)?, index.search(&query, 2)?);
    println!("reloaded {} vectors from {}", loaded.len(), dir.path().display());
    Ok(())
}
