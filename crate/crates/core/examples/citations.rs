//! Parse the reference list out of model answers and summarize how many
//! answers cite sources, and how many of those sources were retrieved.
//!
//! Pass answer files as arguments, or run without any to use the bundled
//! samples.

use groundqa::citations::{aggregate, audit};
use groundqa::parse_answer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut paths: Vec<String> = std::env::args().skip(1).collect();
    if paths.is_empty() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/answers");
        paths = (1..=4).map(|i| format!("{dir}/answer_{i}.txt")).collect();
    }
    // pretend the first URL of each answer came from the retriever
    let mut audits = Vec::new();
    for path in &paths {
        let parsed = parse_answer(&std::fs::read_to_string(path)?);
        let retrieved: Vec<&str> = parsed.reference_urls().into_iter().take(1).collect();
        let a = audit(&parsed, &retrieved);
        println!("{path}");
        for r in &parsed.references {
            println!("  [{}] {}", r.index, r.url);
        }
        println!("  grounded {:.2}, inline resolved {}", a.grounded_fraction, a.inline_resolved);
        audits.push(a);
    }
    println!("\n{}", serde_json::to_string_pretty(&aggregate(&audits)?)?);
    Ok(())
}
