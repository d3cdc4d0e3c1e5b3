//! BLEU, ROUGE-1/2/L, chrF and embedding similarity between a generated
//! answer and a gold answer.

mod lexical;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_similarity, Embedder};

pub use lexical::{
    bleu, chrf, lcs_len, modified_precision, ngram_counts, rouge_l, rouge_l_prf, rouge_n,
    rouge_n_prf, tokenize,
};

pub const BLEU_MAX_N: usize = 4;
pub const CHRF_N_MAX: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("semantic similarity needs two non-empty texts")]
    EmptyInput,
    #[error("embedding failed: {0}")]
    Embed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeDetail {
    pub rouge1: Prf,
    pub rouge2: Prf,
    #[serde(rename = "rougeL")]
    pub rouge_l: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub id: String,
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub chrf: f64,
    pub semantic: f64,
    /// Set when semantic similarity could not be computed and was scored 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_error: Option<String>,
    pub rouge_detail: RougeDetail,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub chrf: f64,
    pub semantic: f64,
}

/// Echo of the scoring conventions, written into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub tokenizer: String,
    pub bleu_max_n: usize,
    pub bleu_smoothing: String,
    pub chrf_n_max: usize,
    pub chrf_beta: f64,
    pub chrf_whitespace: String,
    pub rouge: String,
    pub semantic_embedder: String,
    pub body_only: bool,
}

impl MetricConfig {
    pub fn new(embedder: &dyn Embedder, body_only: bool) -> Self {
        Self {
            tokenizer: "lowercase; split on whitespace; punctuation as single tokens".into(),
            bleu_max_n: BLEU_MAX_N,
            bleu_smoothing: "add-one on zero numerators for n>=2; denominators floored at 1".into(),
            chrf_n_max: CHRF_N_MAX,
            chrf_beta: CHRF_BETA,
            chrf_whitespace: "removed".into(),
            rouge: "f1".into(),
            semantic_embedder: embedder.descriptor(),
            body_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_items: usize,
    pub aggregates: Aggregates,
    pub per_item: Vec<PairScores>,
    pub config: MetricConfig,
}

/// `max(0, cosine)` of the two embeddings.
pub fn semantic_similarity(
    candidate: &str,
    reference: &str,
    embedder: &dyn Embedder,
) -> Result<f64, MetricError> {
    if candidate.trim().is_empty() || reference.trim().is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let v = embedder
        .embed(&[candidate.to_string(), reference.to_string()])
        .map_err(|e| MetricError::Embed(e.to_string()))?;
    let cos = cosine_similarity(&v[0], &v[1]).map_err(|e| MetricError::Embed(e.to_string()))?;
    Ok(cos.max(0.0))
}

pub fn evaluate_pair(
    id: &str,
    candidate: &str,
    reference: &str,
    embedder: &dyn Embedder,
) -> Result<PairScores, MetricError> {
    let r1 = rouge_n_prf(candidate, reference, 1)?;
    let r2 = rouge_n_prf(candidate, reference, 2)?;
    let rl = rouge_l_prf(candidate, reference)?;
    let (semantic, semantic_error) = match semantic_similarity(candidate, reference, embedder) {
        Ok(s) => (s, None),
        Err(e) => (0.0, Some(e.to_string())),
    };
    Ok(PairScores {
        id: id.to_string(),
        bleu: bleu(candidate, reference, BLEU_MAX_N)?,
        rouge1: r1.f1,
        rouge2: r2.f1,
        rouge_l: rl.f1,
        chrf: chrf(candidate, reference, CHRF_N_MAX, CHRF_BETA)?,
        semantic,
        semantic_error,
        rouge_detail: RougeDetail {
            rouge1: r1,
            rouge2: r2,
            rouge_l: rl,
        },
    })
}

/// Mean with a fixed summation order, so it does not depend on item order.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn aggregate(per_item: &[PairScores]) -> Aggregates {
    let col = |f: fn(&PairScores) -> f64| mean(per_item.iter().map(f).collect());
    Aggregates {
        bleu: col(|s| s.bleu),
        rouge1: col(|s| s.rouge1),
        rouge2: col(|s| s.rouge2),
        rouge_l: col(|s| s.rouge_l),
        chrf: col(|s| s.chrf),
        semantic: col(|s| s.semantic),
    }
}

/// A scored item: `(id, candidate, reference)`.
pub type ScoringItem = (String, String, String);

/// Scores items in parallel; `per_item` keeps input order.
pub fn evaluate_set(
    items: &[ScoringItem],
    embedder: &dyn Embedder,
    body_only: bool,
) -> Result<MetricReport, MetricError> {
    let per_item = items
        .par_iter()
        .map(|(id, c, r)| evaluate_pair(id, c, r, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricReport {
        n_items: per_item.len(),
        aggregates: aggregate(&per_item),
        per_item,
        config: MetricConfig::new(embedder, body_only),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{EmbedError, EmbeddingVector, HashEmbedder};

    /// Embeds "neg" as (-0.1, √0.99) and anything else as (1, 0).
    struct Fixed;

    impl Embedder for Fixed {
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            texts
                .iter()
                .map(|t| {
                    let v = if t == "neg" { vec![-0.1, 0.99f32.sqrt()] } else { vec![1.0, 0.0] };
                    EmbeddingVector::new(v)
                })
                .collect()
        }
        fn descriptor(&self) -> String {
            "fixed".into()
        }
    }

    #[test]
    fn semantic_clips_negative_cosine() {
        assert_eq!(semantic_similarity("neg", "pos", &Fixed).unwrap(), 0.0);
        assert_eq!(semantic_similarity("pos", "pos", &Fixed).unwrap(), 1.0);
        assert_eq!(semantic_similarity("", "pos", &Fixed), Err(MetricError::EmptyInput));
    }

    #[test]
    fn identical_pair_hits_every_maximum() {
        let e = HashEmbedder::new(256);
        let t = "Hospice care focuses on comfort [1].";
        let s = evaluate_pair("x", t, t, &e).unwrap();
        assert_eq!((s.bleu, s.rouge1, s.rouge2, s.rouge_l), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(s.chrf, 100.0);
        assert!((s.semantic - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn empty_candidate_scores_zero_with_flag() {
        let s = evaluate_pair("x", "", "some reference", &HashEmbedder::new(64)).unwrap();
        assert_eq!((s.bleu, s.rouge1, s.rouge2, s.rouge_l, s.chrf, s.semantic), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(s.semantic_error.is_some());
    }

    #[test]
    fn aggregates_are_column_means() {
        let e = HashEmbedder::new(64);
        let items: Vec<ScoringItem> = vec![
            ("a".into(), "the cat sat".into(), "the cat sat on the mat".into()),
            ("b".into(), "abc".into(), "abd".into()),
        ];
        let rep = evaluate_set(&items, &e, true).unwrap();
        let hand = (rep.per_item[0].chrf + rep.per_item[1].chrf) / 2.0;
        assert!((rep.aggregates.chrf - hand).abs() < 1e-12);
        let rev: Vec<ScoringItem> = items.iter().rev().cloned().collect();
        assert_eq!(evaluate_set(&rev, &e, true).unwrap().aggregates, rep.aggregates);
    }
}
