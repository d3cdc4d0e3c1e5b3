//! Gold question-answer datasets: JSONL I/O, deduplication, seeded
//! train/test splits, leakage checks and draft synthesis.

mod synth;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

pub use synth::{synthesize_qa, SynthesisError, SynthesisOptions, SynthesisReport};

pub const DEFAULT_JACCARD: f64 = 0.8;
pub const SHINGLE_WORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub context: String,
    pub answer: String,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Machine-drafted and not yet curated.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unvalidated: bool,
}

impl QAPair {
    pub fn new(id: impl Into<String>, question: impl Into<String>, answer: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            question: question.into(),
            context: String::new(),
            answer: answer.into(),
            references: Vec::new(),
            split: None,
            unvalidated: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Read(#[from] JsonlError),
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("n_train {n_train} exceeds the {n_total} pairs available")]
    TooManyTrain { n_train: usize, n_total: usize },
}

/// Reads and validates a JSONL dataset. An empty file is a valid, empty
/// dataset.
pub fn load(path: impl AsRef<Path>) -> Result<Vec<QAPair>, DatasetError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let rows: Vec<(usize, QAPair)> = jsonl::read_numbered(path)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, pair) in rows {
        let invalid = |message: String| DatasetError::Invalid {
            path: display.clone(),
            line,
            message,
        };
        if pair.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        if pair.question.trim().is_empty() {
            return Err(invalid("empty question".into()));
        }
        if pair.answer.trim().is_empty() {
            return Err(invalid("empty answer".into()));
        }
        if let Some(first) = seen.insert(pair.id.clone(), line) {
            return Err(invalid(format!("duplicate id {:?} (first on line {first})", pair.id)));
        }
        out.push(pair);
    }
    Ok(out)
}

pub fn save(pairs: &[QAPair], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    jsonl::write(path, pairs).map_err(|source| DatasetError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Lowercased, whitespace runs collapsed to single spaces, trimmed.
pub fn normalize(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Word k-grams of the normalized text. Texts shorter than `k` words give
/// one shingle holding all their words.
pub fn shingles(text: &str, k: usize) -> HashSet<Vec<String>> {
    let norm = normalize(text);
    let words: Vec<String> = norm.split(' ').filter(|w| !w.is_empty()).map(String::from).collect();
    if words.is_empty() {
        return HashSet::new();
    }
    let k = k.clamp(1, words.len());
    words.windows(k).map(<[String]>::to_vec).collect()
}

/// Jaccard similarity of two shingle sets; 1 when both are empty.
pub fn jaccard_sets(a: &HashSet<Vec<String>>, b: &HashSet<Vec<String>>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Word-5-gram Jaccard similarity of two texts.
pub fn jaccard(a: &str, b: &str) -> f64 {
    jaccard_sets(&shingles(a, SHINGLE_WORDS), &shingles(b, SHINGLE_WORDS))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DedupReport {
    pub removed: usize,
    pub exact: usize,
    pub near: usize,
    /// `(removed id, id of the kept pair it duplicated)`.
    pub removed_pairs: Vec<(String, String)>,
}

/// Drops exact duplicates (normalized question and answer) and pairs whose
/// question is a near-duplicate (Jaccard ≥ `threshold`) of an earlier kept
/// question. The first occurrence wins and order is preserved.
pub fn dedup(pairs: Vec<QAPair>, threshold: f64) -> (Vec<QAPair>, DedupReport) {
    let mut report = DedupReport::default();
    let mut exact: HashMap<(String, String), String> = HashMap::new();
    let mut kept: Vec<QAPair> = Vec::new();
    let mut kept_shingles: Vec<HashSet<Vec<String>>> = Vec::new();
    for pair in pairs {
        let key = (normalize(&pair.question), normalize(&pair.answer));
        if let Some(first) = exact.get(&key) {
            report.exact += 1;
            report.removed_pairs.push((pair.id.clone(), first.clone()));
            continue;
        }
        let sh = shingles(&pair.question, SHINGLE_WORDS);
        if let Some(i) = kept_shingles.iter().position(|k| jaccard_sets(&sh, k) >= threshold) {
            report.near += 1;
            report.removed_pairs.push((pair.id.clone(), kept[i].id.clone()));
            continue;
        }
        exact.insert(key, pair.id.clone());
        kept_shingles.push(sh);
        kept.push(pair);
    }
    report.removed = report.exact + report.near;
    (kept, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub n_total: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Labels a uniformly random `n_train` pairs as train and the rest as
/// test. Order is preserved; the same seed gives the same labels.
pub fn split(
    mut pairs: Vec<QAPair>,
    n_train: usize,
    seed: u64,
) -> Result<(Vec<QAPair>, SplitManifest), DatasetError> {
    let n_total = pairs.len();
    if n_train > n_total {
        return Err(DatasetError::TooManyTrain { n_train, n_total });
    }
    let mut order: Vec<usize> = (0..n_total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for p in pairs.iter_mut() {
        p.split = Some(Split::Test);
    }
    for &i in &order[..n_train] {
        pairs[i].split = Some(Split::Train);
    }
    let manifest = SplitManifest {
        n_total,
        n_train,
        n_test: n_total - n_train,
        seed,
    };
    Ok((pairs, manifest))
}

pub fn subset(pairs: &[QAPair], which: Split) -> Vec<QAPair> {
    pairs.iter().filter(|p| p.split == Some(which)).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leak {
    pub train_id: String,
    pub test_id: String,
    pub jaccard: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub passed: bool,
    pub threshold: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub leaks: Vec<Leak>,
}

/// Fails when a test question equals (after normalization) or
/// near-duplicates a train question.
pub fn leakage_check(train: &[QAPair], test: &[QAPair], threshold: f64) -> LeakageReport {
    let train_sh: Vec<_> = train.iter().map(|p| shingles(&p.question, SHINGLE_WORDS)).collect();
    let train_norm: Vec<_> = train.iter().map(|p| normalize(&p.question)).collect();
    let mut leaks = Vec::new();
    for t in test {
        let sh = shingles(&t.question, SHINGLE_WORDS);
        let norm = normalize(&t.question);
        for (i, tr) in train.iter().enumerate() {
            let exact = train_norm[i] == norm;
            let j = jaccard_sets(&sh, &train_sh[i]);
            if exact || j >= threshold {
                leaks.push(Leak {
                    train_id: tr.id.clone(),
                    test_id: t.id.clone(),
                    jaccard: j,
                    exact,
                });
            }
        }
    }
    LeakageReport {
        passed: leaks.is_empty(),
        threshold,
        n_train: train.len(),
        n_test: test.len(),
        leaks,
    }
}
