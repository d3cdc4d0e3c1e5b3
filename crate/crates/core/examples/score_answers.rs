//! Score a candidate answer against a reference with every lexical metric
//! and the embedding similarity.

use groundqa::metrics::{bleu, chrf, evaluate_pair, rouge_l, rouge_n};
use groundqa::HashEmbedder;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = "Respite care gives family carers a short break from caring.";
    let candidate = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Respite care is a short break for carers.".into());

    println!("BLEU-4   {:.4}", bleu(&candidate, reference, 4)?);
    println!("ROUGE-1  {:.4}", rouge_n(&candidate, reference, 1)?);
    println!("ROUGE-2  {:.4}", rouge_n(&candidate, reference, 2)?);
    println!("ROUGE-L  {:.4}", rouge_l(&candidate, reference)?);
    println!("chrF     {:.2}", chrf(&candidate, reference, 6, 2.0)?);

    let scores = evaluate_pair("demo", &candidate, reference, &HashEmbedder::new(256))?;
    println!("semantic {:.4}", scores.semantic);
    Ok(())
}
