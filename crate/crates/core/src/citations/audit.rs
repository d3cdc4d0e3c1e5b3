use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ParsedAnswer;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CitationError {
    #[error("cannot aggregate zero audits")]
    Empty,
    #[error("{returning} returning out of {total} is not a valid count")]
    BadCounts { returning: usize, total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAudit {
    pub has_references: bool,
    pub n_references: usize,
    /// Every inline index has a reference entry.
    pub inline_resolved: bool,
    /// Share of reference URLs that were among the prompt's sources.
    pub grounded_fraction: f64,
    /// No reference marker lacked a usable URL.
    pub urls_wellformed: bool,
    /// `None` unless liveness was checked.
    pub urls_live: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub n_returning: usize,
    pub n_total: usize,
    /// `100 · n_returning / n_total`, one decimal.
    pub pct_returning: f64,
    /// Mean grounded fraction over the returning answers, as a percentage
    /// with one decimal; 0 when none return references.
    pub pct_grounded: f64,
}

/// `100 · num / den` rounded half-up to one decimal, in exact integer
/// arithmetic.
fn pct_one_decimal(num: u128, den: u128) -> f64 {
    let tenths = (2000 * num + den) / (2 * den);
    tenths as f64 / 10.0
}

impl ReferenceStats {
    pub fn from_counts(n_returning: usize, n_total: usize) -> Result<Self, CitationError> {
        if n_total == 0 {
            return Err(CitationError::Empty);
        }
        if n_returning > n_total {
            return Err(CitationError::BadCounts {
                returning: n_returning,
                total: n_total,
            });
        }
        Ok(Self {
            n_returning,
            n_total,
            pct_returning: pct_one_decimal(n_returning as u128, n_total as u128),
            pct_grounded: 0.0,
        })
    }
}

/// Lowercase scheme and host, no fragment, no trailing slash.
pub fn canonicalize_url(raw: &str) -> String {
    let raw = raw.trim();
    match url::Url::parse(raw) {
        Ok(mut u) => {
            u.set_fragment(None);
            let s = u.to_string();
            s.strip_suffix('/').map(str::to_string).unwrap_or(s)
        }
        Err(_) => raw.trim_end_matches('/').to_lowercase(),
    }
}

pub fn audit<S: AsRef<str>>(parsed: &ParsedAnswer, context_sources: &[S]) -> ReferenceAudit {
    let context: BTreeSet<String> = context_sources
        .iter()
        .map(|s| canonicalize_url(s.as_ref()))
        .collect();
    let n_references = parsed.references.len();
    let grounded = parsed
        .references
        .iter()
        .filter(|r| context.contains(&canonicalize_url(&r.url)))
        .count();
    let indices: BTreeSet<u32> = parsed.references.iter().map(|r| r.index).collect();
    ReferenceAudit {
        has_references: n_references > 0,
        n_references,
        inline_resolved: parsed.inline_citations.iter().all(|i| indices.contains(i)),
        grounded_fraction: if n_references == 0 {
            0.0
        } else {
            grounded as f64 / n_references as f64
        },
        urls_wellformed: parsed.unresolved_entries.is_empty(),
        urls_live: None,
    }
}

/// [`audit`] plus a liveness verdict over every reference URL.
pub fn audit_with_liveness<S: AsRef<str>>(
    parsed: &ParsedAnswer,
    context_sources: &[S],
    checker: &LivenessChecker,
) -> ReferenceAudit {
    let mut a = audit(parsed, context_sources);
    if a.has_references {
        a.urls_live = Some(parsed.references.iter().all(|r| checker.check(&r.url)));
    }
    a
}

pub fn aggregate(audits: &[ReferenceAudit]) -> Result<ReferenceStats, CitationError> {
    let n_returning = audits.iter().filter(|a| a.has_references).count();
    let mut stats = ReferenceStats::from_counts(n_returning, audits.len())?;
    if n_returning > 0 {
        // Sum in a fixed order so permutations give identical results.
        let mut fractions: Vec<f64> = audits
            .iter()
            .filter(|a| a.has_references)
            .map(|a| a.grounded_fraction)
            .collect();
        fractions.sort_by(f64::total_cmp);
        let mean = fractions.iter().sum::<f64>() / n_returning as f64;
        stats.pct_grounded = (mean * 1000.0).round() / 10.0;
    }
    Ok(stats)
}

/// HEAD (falling back to GET) with redirects followed. Verdicts are cached
/// for the checker's lifetime.
pub struct LivenessChecker {
    client: Option<reqwest::blocking::Client>,
    cache: Mutex<HashMap<String, bool>>,
}

impl LivenessChecker {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .redirect(reqwest::redirect::Policy::limited(10))
            .build()
            .ok();
        Self {
            client,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn check(&self, url: &str) -> bool {
        if let Some(&hit) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(url) {
            return hit;
        }
        let live = self.probe(url);
        self.cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(url.to_string(), live);
        live
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    fn probe(&self, url: &str) -> bool {
        let Some(client) = &self.client else {
            return false;
        };
        let ok = |r: reqwest::Result<reqwest::blocking::Response>| {
            r.map(|resp| resp.status().is_success() || resp.status().is_redirection())
                .unwrap_or(false)
        };
        ok(client.head(url).send()) || ok(client.get(url).send())
    }
}

/// One-off liveness check; never panics or errors.
pub fn check_url_live(url: &str, timeout: Duration) -> bool {
    LivenessChecker::new(timeout).check(url)
}
