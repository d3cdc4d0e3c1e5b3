//! Clean up a question set: drop duplicates and near duplicates, split it
//! into train and test, and check the test side does not leak.

use groundqa::qa_dataset::{dedup, leakage_check, split, subset, QAPair, Split, DEFAULT_JACCARD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut pairs = vec![
        QAPair::new("a", "How can I help my mother who has dementia sleep through the night?", "Keep a routine."),
        QAPair::new("b", "How can I help my father who has dementia sleep through the night?", "Keep a routine."),
        QAPair::new("c", "What is respite care?", "A short break for carers."),
        QAPair::new("d", "what is respite  care?", "A short break for carers."),
    ];
    for i in 0..8 {
        pairs.push(QAPair::new(format!("x{i}"), format!("Question number {i} about caring"), "An answer."));
    }

    let (kept, report) = dedup(pairs, DEFAULT_JACCARD);
    println!("removed {} ({} exact, {} near)", report.removed, report.exact, report.near);
    for (gone, kept_as) in &report.removed_pairs {
        println!("  {gone} duplicates {kept_as}");
    }

    let (labelled, manifest) = split(kept, 7, 42)?;
    println!("{}", serde_json::to_string(&manifest)?);

    let check = leakage_check(&subset(&labelled, Split::Train), &subset(&labelled, Split::Test), DEFAULT_JACCARD);
    println!("leakage check passed: {}", check.passed);
    Ok(())
}
