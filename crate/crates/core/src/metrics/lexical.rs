use std::collections::HashMap;
use std::hash::Hash;

use super::{MetricError, Prf};

/// Lowercases, splits on whitespace, and makes every character that is
/// neither alphanumeric nor whitespace a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
            continue;
        }
        if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Contiguous n-grams with multiplicity. Empty when `n` is 0 or exceeds
/// the sequence length.
pub fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Σ min(count_cand, count_ref) over candidate n-grams, and the total
/// candidate n-gram count.
fn clipped_overlap<T: Eq + Hash>(cand: &HashMap<&[T], usize>, reference: &HashMap<&[T], usize>) -> (usize, usize) {
    let mut overlap = 0;
    let mut total = 0;
    for (gram, &c) in cand {
        total += c;
        overlap += c.min(reference.get(gram).copied().unwrap_or(0));
    }
    (overlap, total)
}

/// Clipped n-gram precision over token sequences; 0 when the candidate
/// has no n-grams.
pub fn modified_precision<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> f64 {
    let (overlap, total) = clipped_overlap(&ngram_counts(candidate, n), &ngram_counts(reference, n));
    if total == 0 {
        0.0
    } else {
        overlap as f64 / total as f64
    }
}

fn reference_tokens(reference: &str) -> Result<Vec<String>, MetricError> {
    let tokens = tokenize(reference);
    if tokens.is_empty() {
        Err(MetricError::EmptyReference)
    } else {
        Ok(tokens)
    }
}

/// Sentence BLEU with uniform weights over orders `1..=max_n`.
///
/// Precision denominators are floored at 1. For n ≥ 2 a zero numerator
/// is smoothed to `1 / (denominator + 1)`. An order where neither side
/// has any n-gram is skipped (precision 1), so identical short strings
/// still score 1. The score is 0 when unigram precision is 0.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> Result<f64, MetricError> {
    let r = reference_tokens(reference)?;
    let c = tokenize(candidate);
    if c.is_empty() || max_n == 0 {
        return Ok(0.0);
    }
    let weight = 1.0 / max_n as f64;
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        if c.len() < n && r.len() < n {
            continue;
        }
        let (overlap, total) = clipped_overlap(&ngram_counts(&c, n), &ngram_counts(&r, n));
        let denom = total.max(1) as f64;
        let p = if overlap > 0 {
            overlap as f64 / denom
        } else if n == 1 {
            return Ok(0.0);
        } else {
            1.0 / (denom + 1.0)
        };
        log_sum += weight * p.ln();
    }
    let (cl, rl) = (c.len() as f64, r.len() as f64);
    let bp = if c.len() < r.len() { (1.0 - rl / cl).exp() } else { 1.0 };
    Ok(bp * log_sum.exp())
}

fn prf(overlap: usize, cand_total: usize, ref_total: usize) -> Prf {
    let precision = overlap as f64 / cand_total.max(1) as f64;
    let recall = overlap as f64 / ref_total.max(1) as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// ROUGE-N precision, recall and F1 over clipped n-gram overlap.
///
/// When neither side is long enough to have an n-gram, the order backs off
/// to the largest one that exists, so a one-word answer is scored on
/// unigrams rather than getting 0 for a bigram match that cannot happen.
pub fn rouge_n_prf(candidate: &str, reference: &str, n: usize) -> Result<Prf, MetricError> {
    let r = reference_tokens(reference)?;
    let c = tokenize(candidate);
    let mut n = n.max(1);
    while n > 1 && c.len() < n && r.len() < n {
        n -= 1;
    }
    let rc = ngram_counts(&r, n);
    let (overlap, cand_total) = clipped_overlap(&ngram_counts(&c, n), &rc);
    Ok(prf(overlap, cand_total, rc.values().sum()))
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<f64, MetricError> {
    Ok(rouge_n_prf(candidate, reference, n)?.f1)
}

pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L from the longest common token subsequence.
pub fn rouge_l_prf(candidate: &str, reference: &str) -> Result<Prf, MetricError> {
    let r = reference_tokens(reference)?;
    let c = tokenize(candidate);
    Ok(prf(lcs_len(&c, &r), c.len(), r.len()))
}

pub fn rouge_l(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    Ok(rouge_l_prf(candidate, reference)?.f1)
}

/// Character n-gram F-score on a 0–100 scale. Whitespace is removed, case
/// is kept. Per-order F_β is averaged over the orders where at least one
/// side has an n-gram.
pub fn chrf(candidate: &str, reference: &str, n_max: usize, beta: f64) -> Result<f64, MetricError> {
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let c: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let b2 = beta * beta;
    let mut sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=n_max {
        if c.len() < n && r.len() < n {
            continue;
        }
        orders += 1;
        let rc = ngram_counts(&r, n);
        let (overlap, cand_total) = clipped_overlap(&ngram_counts(&c, n), &rc);
        let ref_total: usize = rc.values().sum();
        if cand_total == 0 || ref_total == 0 {
            continue;
        }
        let p = overlap as f64 / cand_total as f64;
        let rec = overlap as f64 / ref_total as f64;
        let denom = b2 * p + rec;
        if denom > 0.0 {
            sum += (1.0 + b2) * p * rec / denom;
        }
    }
    Ok(if orders == 0 { 0.0 } else { 100.0 * sum / orders as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn rouge_backs_off_when_neither_side_has_the_order() {
        assert_eq!(rouge_n("a", "a", 2).unwrap(), 1.0);
        assert_eq!(rouge_n("yes", "no", 2).unwrap(), 0.0);
        // the reference has bigrams, so no backoff
        assert_eq!(rouge_n("yes", "yes it is", 2).unwrap(), 0.0);
    }

    #[test]
    fn tokenizer_detaches_punctuation() {
        assert_eq!(tokenize("It's OK, Bob!"), ["it", "'", "s", "ok", ",", "bob", "!"]);
        assert!(tokenize(" \n").is_empty());
    }

    #[test]
    fn ngram_examples() {
        let t = toks("a b a");
        let c = ngram_counts(&t, 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c[&t[0..1]], 2);
        assert_eq!(c[&t[1..2]], 1);
        assert!(ngram_counts(&toks("a b"), 3).is_empty());
        let t = toks("a b a b");
        let c = ngram_counts(&t, 2);
        assert_eq!(c[&t[0..2]], 2);
        assert_eq!(c[&t[1..3]], 1);
    }

    #[test]
    fn modified_precision_clips() {
        assert_eq!(modified_precision(&toks("the the the the"), &toks("the cat"), 1), 0.25);
        assert_eq!(modified_precision(&toks("x y"), &toks("x y"), 2), 1.0);
        assert_eq!(modified_precision(&toks("x y"), &toks("p q"), 1), 0.0);
    }

    #[test]
    fn bleu_edges() {
        assert_eq!(bleu("", "a b", 4).unwrap(), 0.0);
        assert_eq!(bleu("hi there", "hi there", 4).unwrap(), 1.0);
        assert!(matches!(bleu("a", " ", 4), Err(MetricError::EmptyReference)));
    }

    #[test]
    fn rouge_hand_counts() {
        let p = rouge_n_prf("the cat sat", "the cat sat on the mat", 1).unwrap();
        assert_eq!((p.precision, p.recall), (1.0, 0.5));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rouge_l("a b c", "x y").unwrap(), 0.0);
        assert_eq!(lcs_len(&toks("a b c d"), &toks("b d a c")), 2);
    }

    #[test]
    fn chrf_abc_abd() {
        let v = chrf("abc", "abd", 6, 2.0).unwrap();
        assert!((v - (2.0 / 3.0 + 0.5 + 0.0) / 3.0 * 100.0).abs() < 1e-9);
        assert_eq!(chrf("abc", "xyz", 6, 2.0).unwrap(), 0.0);
        assert_eq!(chrf("a b", "ab", 6, 2.0).unwrap(), 100.0);
    }
}
