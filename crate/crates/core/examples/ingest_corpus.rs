//! Turn an HTML page into clean text, split it into chunks, and store it in
//! an on-disk corpus.
//!
//! ```text
//! cargo run --example ingest_corpus
//! ```

use groundqa::corpus::{IngestInput, IngestOptions};
use groundqa::{chunk_text, clean_text, html_to_text, CorpusStore, SourceType};

const PAGE: &str = r#"<html><head><title>Respite care</title>
<script>track()</script></head>
<body><h1>Respite care</h1>
<p>Respite care gives family carers a short break. It can last a few hours
or a few weeks, at home or in a care home.</p>
<ul><li>Day centres</li><li>Home sitting services</li></ul>
</body></html>"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = clean_text(&html_to_text(PAGE));
    println!("--- cleaned text ---\n{text}\n");

    // a tiny limit so the page splits
    for span in chunk_text(&text, 80) {
        println!("chunk {} [{}..{}) {:?}", span.ordinal, span.start, span.end, span.text);
    }

    let tmp = tempfile::tempdir()?;
    let page = tmp.path().join("respite.html");
    std::fs::write(&page, PAGE)?;

    let mut store = CorpusStore::open(tmp.path().join("corpus"))?;
    let report = store.ingest(
        &[IngestInput::new(page.display().to_string(), SourceType::Guideline)],
        &IngestOptions::default(),
    )?;
    println!("\n{}", serde_json::to_string_pretty(&report.manifest)?);
    Ok(())
}
