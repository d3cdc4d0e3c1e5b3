use serde::{Deserialize, Serialize};

use super::{HarnessError, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub setting: String,
    pub model: String,
    pub n_items: usize,
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub chrf: f64,
    pub semantic: f64,
    pub returning_references: usize,
    pub not_returning_references: usize,
    pub pct_returning: f64,
    pub pct_grounded: f64,
    /// Left blank for a human annotator.
    pub pct_correct_human: String,
    pub d_bleu: f64,
    pub d_rouge1: f64,
    pub d_rouge2: f64,
    #[serde(rename = "d_rougeL")]
    pub d_rouge_l: f64,
    pub d_chrf: f64,
    pub d_semantic: f64,
    pub d_pct_returning: f64,
}

/// Side-by-side aggregates. Deltas are relative to the first run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset_fingerprint: String,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare_runs(runs: &[RunSummary]) -> Result<Comparison, HarnessError> {
    let [base, rest @ ..] = runs else {
        return Err(HarnessError::TooFewRuns);
    };
    if rest.is_empty() {
        return Err(HarnessError::TooFewRuns);
    }
    let fp = &base.run_metadata.dataset_fingerprint;
    if let Some(other) = rest.iter().find(|r| &r.run_metadata.dataset_fingerprint != fp) {
        return Err(HarnessError::DatasetMismatch(format!(
            "{} ({}) vs {} ({})",
            base.run_metadata.label, fp, other.run_metadata.label, other.run_metadata.dataset_fingerprint
        )));
    }
    let b = &base.metric_report.aggregates;
    let rows = runs
        .iter()
        .map(|r| {
            let a = &r.metric_report.aggregates;
            let s = &r.reference_stats;
            ComparisonRow {
                label: r.run_metadata.label.clone(),
                setting: r.run_metadata.setting.to_string(),
                model: r.run_metadata.model.clone(),
                n_items: r.metric_report.n_items,
                bleu: a.bleu,
                rouge1: a.rouge1,
                rouge2: a.rouge2,
                rouge_l: a.rouge_l,
                chrf: a.chrf,
                semantic: a.semantic,
                returning_references: s.n_returning,
                not_returning_references: s.n_total - s.n_returning,
                pct_returning: s.pct_returning,
                pct_grounded: s.pct_grounded,
                pct_correct_human: String::new(),
                d_bleu: a.bleu - b.bleu,
                d_rouge1: a.rouge1 - b.rouge1,
                d_rouge2: a.rouge2 - b.rouge2,
                d_rouge_l: a.rouge_l - b.rouge_l,
                d_chrf: a.chrf - b.chrf,
                d_semantic: a.semantic - b.semantic,
                d_pct_returning: s.pct_returning - base.reference_stats.pct_returning,
            }
        })
        .collect();
    Ok(Comparison {
        dataset_fingerprint: fp.clone(),
        rows,
    })
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Two tables: metric aggregates, then reference behavior.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Run | Setting | Model | N | BLEU | ROUGE-1 | ROUGE-2 | ROUGE-L | chrF | Semantic | ΔBLEU | ΔchrF |\n");
        out.push_str("|---|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.2} | {:.4} | {:+.4} | {:+.2} |\n",
                r.label, r.setting, r.model, r.n_items, r.bleu, r.rouge1, r.rouge2, r.rouge_l, r.chrf,
                r.semantic, r.d_bleu, r.d_chrf
            ));
        }
        out.push('\n');
        out.push_str("| Run | Returning References | Not Returning References | % Returning | % Grounded | % Correct (human) |\n");
        out.push_str("|---|---:|---:|---:|---:|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {:.1} | {:.1} | {} |\n",
                r.label,
                r.returning_references,
                r.not_returning_references,
                r.pct_returning,
                r.pct_grounded,
                r.pct_correct_human
            ));
        }
        out
    }
}
