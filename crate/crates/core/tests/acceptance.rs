//! Acceptance suite. One `PASS`/`FAIL` line per criterion, then a single
//! assertion over all of them. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use groundqa::citations::{aggregate, audit, ReferenceAudit, ReferenceStats};
use groundqa::corpus::{chunk_text, clean_text};
use groundqa::embeddings::{EmbeddingVector, HashEmbedder};
use groundqa::harness::{load_summary, RunSummary};
use groundqa::metrics::{bleu, chrf, evaluate_pair};
use groundqa::qa_dataset::{self, QAPair, Split};
use groundqa::vector_store::{Metric, VectorIndex};
use groundqa::{parse_answer, vanilla_prompt, Generator, StubBackend};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Check = fn();

const CRITERIA: &[(&str, Duration, Check)] = &[
    ("reference percentage arithmetic", Duration::from_secs(1), reference_arithmetic),
    ("citation parsing on published answers", Duration::from_secs(1), published_answers),
    ("metric oracle equivalence", Duration::from_secs(5), metric_oracle),
    ("metric maxima and minima", Duration::from_secs(30), metric_extremes),
    ("retrieval exactness", Duration::from_secs(10), retrieval_exactness),
    ("chunker properties", Duration::from_secs(10), chunker_properties),
    ("dataset pipeline", Duration::from_secs(5), dataset_pipeline),
    ("end-to-end offline run", Duration::from_secs(60), end_to_end),
    ("index persistence", Duration::from_secs(10), persistence),
];

/// Runs without the libtest harness so the verdict lines are always shown.
fn main() {
    // the verdict line carries the panic message
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    for (name, budget, check) in CRITERIA {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let took = started.elapsed();
        let verdict = match outcome {
            Ok(()) if took <= *budget => "PASS".to_string(),
            Ok(()) => format!("FAIL (took {took:.2?}, budget {budget:?})"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL ({msg})")
            }
        };
        println!("{:<42} {verdict}  [{took:.2?}]", name);
        if verdict != "PASS" {
            failed.push(*name);
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed.len(), CRITERIA.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn audits(returning: usize, total: usize) -> Vec<ReferenceAudit> {
    let with = parse_answer("Yes. References: [1] https://kb.example/a");
    let without = parse_answer("Yes.");
    (0..total)
        .map(|i| audit(if i < returning { &with } else { &without }, &[] as &[&str]))
        .collect()
}

fn reference_arithmetic() {
    // (returning, total, one-decimal percentage, printed whole percentage)
    let rows = [(46, 66, 69.7, 70), (61, 66, 92.4, 92), (17, 66, 25.8, 26), (66, 66, 100.0, 100), (0, 66, 0.0, 0)];
    for (n, total, pct, printed) in rows {
        let stats = aggregate(&audits(n, total)).unwrap();
        assert_eq!(stats, {
            let mut s = ReferenceStats::from_counts(n, total).unwrap();
            s.pct_grounded = stats.pct_grounded;
            s
        });
        assert_eq!(stats.pct_returning, pct, "{n}/{total}");
        assert_eq!(stats.pct_returning.round() as i64, printed, "{n}/{total}");
        assert_eq!(total - stats.n_returning, total - n);
    }
}

fn published_answers() {
    let expected: [(&str, &[&str]); 3] = [
        (
            "answers/answer_1.txt",
            &[
                "https://www.caregiver.org/resource/alzheimers-disease-caregiving/",
                "https://www.agingcare.com/articles/can-dementia-be-fatal-476368.htm",
            ],
        ),
        (
            "answers/answer_2.txt",
            &["https://www.agingcare.com/articles/alzheimers-disease-dementia-warning-signs-144253.htm"],
        ),
        (
            "answers/answer_4.txt",
            &["https://www.agingcare.com/articles/what-happens-after-alzheimers-diagnosis-154289.htm"],
        ),
    ];
    for (file, urls) in expected {
        let parsed = parse_answer(&common::read_fixture(file));
        assert!(!parsed.references.is_empty(), "{file}");
        assert_eq!(parsed.reference_urls(), urls.to_vec(), "{file}");
    }
    assert_eq!(parse_answer(&common::read_fixture("answers/answer_1.txt")).references.len(), 2);
}

#[derive(Deserialize)]
struct OraclePair {
    candidate: String,
    reference: String,
    bleu: f64,
    rouge1: f64,
    rouge2: f64,
    #[serde(rename = "rougeL")]
    rouge_l: f64,
    chrf: f64,
}

fn metric_oracle() {
    let pairs: Vec<OraclePair> = serde_json::from_str(&common::read_fixture("metric_oracle.json")).unwrap();
    assert_eq!(pairs.len(), 20);
    let e = HashEmbedder::new(64);
    for (i, p) in pairs.iter().enumerate() {
        let s = evaluate_pair(&i.to_string(), &p.candidate, &p.reference, &e).unwrap();
        for (got, want, name) in [
            (s.bleu, p.bleu, "bleu"),
            (s.rouge1, p.rouge1, "rouge1"),
            (s.rouge2, p.rouge2, "rouge2"),
            (s.rouge_l, p.rouge_l, "rougeL"),
            (s.chrf, p.chrf, "chrf"),
        ] {
            assert!((got - want).abs() <= 1e-6, "pair {i} {name}: {got} vs {want}");
        }
    }
    let c = chrf("abc", "abd", 6, 2.0).unwrap();
    assert!((c - 38.888_888_888_888_89).abs() <= 1e-6, "{c}");
}

fn metric_extremes() {
    let e = HashEmbedder::new(256);
    for text in ["The cat sat on the mat.", "a", "Respite care, adult day programs: 3 options!"] {
        let s = evaluate_pair("x", text, text, &e).unwrap();
        for v in [s.bleu, s.rouge1, s.rouge2, s.rouge_l, s.semantic] {
            assert!((v - 1.0).abs() <= 1e-9, "{text:?}: {s:?}");
        }
        assert!((s.chrf - 100.0).abs() <= 1e-9);
        let z = evaluate_pair("x", "", text, &e).unwrap();
        assert_eq!((z.bleu, z.rouge1, z.rouge2, z.rouge_l, z.chrf), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    let text = "[A-Za-z0-9 ,.!?'-]{0,60}";
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&(text, text), |(c, r)| {
            if r.trim().is_empty() {
                prop_assert!(bleu(&c, &r, 4).is_err());
                return Ok(());
            }
            let s = evaluate_pair("p", &c, &r, &e).unwrap();
            for v in [s.bleu, s.rouge1, s.rouge2, s.rouge_l, s.semantic] {
                prop_assert!((0.0..=1.0).contains(&v), "{:?}", s);
            }
            prop_assert!((0.0..=100.0).contains(&s.chrf));
            let same = evaluate_pair("p", &r, &r, &e).unwrap();
            for v in [same.bleu, same.rouge1, same.rouge_l, same.semantic] {
                prop_assert!((v - 1.0).abs() <= 1e-9, "{:?} {:?}", r, same);
            }
            prop_assert!((same.chrf - 100.0).abs() <= 1e-9 || !r.chars().any(|ch| !ch.is_whitespace()));
            Ok(())
        })
        .unwrap();
}

fn retrieval_exactness() {
    let vectors = common::unit_vectors(1000, 32, 11);
    let queries = common::unit_vectors(25, 32, 12);
    for metric in [Metric::Cosine, Metric::InnerProduct, Metric::SquaredL2] {
        let index = common::index_of(&vectors, metric);
        for q in queries.iter().chain(&vectors[..5]).chain(std::iter::once(&vectors[97])) {
            let query = EmbeddingVector::new(q.clone()).unwrap();
            for k in [1, 3, 10] {
                let got: Vec<(String, f64)> = index
                    .search(&query, k)
                    .unwrap()
                    .into_iter()
                    .map(|h| (h.chunk_id, h.score))
                    .collect();
                let want = common::brute_force(&vectors, q, k, metric);
                assert_eq!(
                    got.iter().map(|g| &g.0).collect::<Vec<_>>(),
                    want.iter().map(|w| &w.0).collect::<Vec<_>>(),
                    "{metric} k={k}"
                );
                for (g, w) in got.iter().zip(&want) {
                    assert!((g.1 - w.1).abs() < 1e-9, "{metric}: {} vs {}", g.1, w.1);
                }
            }
        }
    }
    // on unit vectors the three metrics order everything the same way
    let idx: Vec<VectorIndex> = [Metric::Cosine, Metric::InnerProduct, Metric::SquaredL2]
        .into_iter()
        .map(|m| common::index_of(&vectors, m))
        .collect();
    for q in &queries {
        let query = EmbeddingVector::new(q.clone()).unwrap();
        let ids: Vec<Vec<String>> = idx
            .iter()
            .map(|i| i.search(&query, 10).unwrap().into_iter().map(|h| h.chunk_id).collect())
            .collect();
        assert_eq!(ids[0], ids[1]);
        assert_eq!(ids[0], ids[2]);
    }
}

#[derive(Deserialize)]
struct ChunkCase {
    name: String,
    max_chars: usize,
    text: String,
    spans: Vec<(usize, usize)>,
}

fn chunker_properties() {
    let cases: Vec<ChunkCase> = serde_json::from_str(&common::read_fixture("chunk_oracle.json")).unwrap();
    for c in &cases {
        let got: Vec<(usize, usize)> = chunk_text(&c.text, c.max_chars).iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(got, c.spans, "{}", c.name);
    }
    let spaced = &cases.iter().find(|c| c.name == "spaced_2500").unwrap();
    assert_eq!(spaced.text.chars().count(), 2500);
    assert_eq!(chunk_text(&spaced.text, 1200).len(), 3);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz   \n\t.,!é".chars().collect();
    for _ in 0..500 {
        let len = rng.random_range(0..4000);
        let mut raw: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        if rng.random_bool(0.1) {
            raw.push_str(&"w".repeat(rng.random_range(1200..2600)));
        }
        let text = clean_text(&raw);
        let chars: Vec<char> = text.chars().collect();
        let spans = chunk_text(&text, 1200);
        let mut covered = vec![0u8; chars.len()];
        let mut prev_end = 0;
        for (i, s) in spans.iter().enumerate() {
            assert_eq!(s.ordinal, i);
            assert!(s.start >= prev_end && s.start < s.end);
            assert!(s.text.chars().count() <= 1200);
            assert_eq!(s.text, chars[s.start..s.end].iter().collect::<String>());
            covered[s.start..s.end].iter_mut().for_each(|c| *c += 1);
            prev_end = s.end;
        }
        for (i, ch) in chars.iter().enumerate() {
            if !ch.is_whitespace() {
                assert_eq!(covered[i], 1, "char {i} of {:?}", text);
            }
        }
    }
}

fn dataset_pipeline() {
    let pairs = common::synthetic_pairs(481, 3);
    let (once, report) = qa_dataset::dedup(pairs.clone(), qa_dataset::DEFAULT_JACCARD);
    assert_eq!(report.removed, 0);
    let (twice, again) = qa_dataset::dedup(once.clone(), qa_dataset::DEFAULT_JACCARD);
    assert_eq!(twice, once);
    assert_eq!(again.removed, 0);

    let (labeled, manifest) = qa_dataset::split(once, 415, 2024).unwrap();
    assert_eq!((manifest.n_train, manifest.n_test), (415, 66));
    let train = qa_dataset::subset(&labeled, Split::Train);
    let test = qa_dataset::subset(&labeled, Split::Test);
    assert_eq!((train.len(), test.len()), (415, 66));
    assert!(qa_dataset::leakage_check(&train, &test, qa_dataset::DEFAULT_JACCARD).passed);
    let (relabeled, _) = qa_dataset::split(labeled.clone(), 415, 2024).unwrap();
    assert_eq!(relabeled, labeled);

    let doubled: Vec<QAPair> = pairs
        .iter()
        .cloned()
        .chain(pairs.iter().map(|p| QAPair { id: format!("{}-copy", p.id), ..p.clone() }))
        .collect();
    let (kept, report) = qa_dataset::dedup(doubled, qa_dataset::DEFAULT_JACCARD);
    assert_eq!(report.removed, pairs.len());
    assert_eq!(kept, pairs);
}

fn end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let docs = root.join("docs");
    std::fs::create_dir_all(&docs).unwrap();
    let mut inputs = Vec::new();
    for i in 0..50 {
        let p = docs.join(format!("doc{i:02}.txt"));
        std::fs::write(&p, common::synthetic_doc(i, 3000)).unwrap();
        inputs.push(p.display().to_string());
    }
    let (corpus, index) = (root.join("corpus"), root.join("index"));
    let s = |p: &Path| p.display().to_string();

    let mut args = vec!["ingest".to_string(), "--out".into(), s(&corpus), "--input".into()];
    args.extend(inputs);
    let report: serde_json::Value =
        serde_json::from_str(&common::run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>())).unwrap();
    assert_eq!(report["manifest"]["n_documents"], 50);
    assert_eq!(report["manifest"]["n_chunks"], 150);
    common::run_cli(&["index", "build", "--corpus", &s(&corpus), "--out", &s(&index)]);

    let mut pairs = common::synthetic_pairs(20, 9);
    for (i, p) in pairs.iter_mut().enumerate() {
        if i % 4 != 0 {
            p.answer = format!("{} [1]\n\nReferences: [1] https://kb.example/doc{i:02}", p.answer);
        }
    }
    let expected_returning = pairs.iter().filter(|p| parse_answer(&p.answer).has_references()).count();
    let dataset = root.join("test.jsonl");
    qa_dataset::save(&pairs, &dataset).unwrap();

    let run = |out: &str| -> RunSummary {
        let dir = root.join(out);
        common::run_cli(&[
            "eval", "--setting", "rag", "--dataset", &s(&dataset), "--index", &s(&index), "--stub", "gold", "--out", &s(&dir),
        ]);
        load_summary(&dir).unwrap()
    };
    let first = run("run1");
    let a = &first.metric_report.aggregates;
    assert_eq!(first.metric_report.n_items, 20);
    for v in [a.bleu, a.rouge1, a.rouge2, a.rouge_l, a.semantic] {
        assert!((v - 1.0).abs() <= 1e-9, "{a:?}");
    }
    assert!((a.chrf - 100.0).abs() <= 1e-9);
    assert_eq!(first.reference_stats.n_returning, expected_returning);
    assert_eq!(
        (first.reference_stats.n_returning, first.reference_stats.pct_returning),
        (first.gold_reference_stats.n_returning, first.gold_reference_stats.pct_returning)
    );

    run("run2");
    for file in ["result.json", "items.jsonl"] {
        let x = std::fs::read(root.join("run1").join(file)).unwrap();
        let y = std::fs::read(root.join("run2").join(file)).unwrap();
        assert!(x == y, "{file} differs between reruns");
    }
    // the offline backend never leaves the process
    assert!(StubBackend::echo().generate(&vanilla_prompt("ping").unwrap()).is_ok());
}

fn persistence() {
    let tmp = tempfile::tempdir().unwrap();
    let vectors = common::unit_vectors(300, 48, 21);
    let index = common::index_of(&vectors, Metric::Cosine);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    index.persist(&a).unwrap();
    let loaded = VectorIndex::load(&a).unwrap();
    assert_eq!(loaded.len(), index.len());
    for row in 0..index.len() {
        let same = index.vector(row).iter().zip(loaded.vector(row)).all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(same, "row {row}");
    }
    loaded.persist(&b).unwrap();
    for f in ["vectors.f32le", "entries.jsonl", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    for q in common::unit_vectors(20, 48, 22) {
        let q = EmbeddingVector::new(q).unwrap();
        assert_eq!(index.search(&q, 5).unwrap(), loaded.search(&q, 5).unwrap());
    }

    let mut bytes = std::fs::read(a.join("vectors.f32le")).unwrap();
    bytes[100] ^= 0x01;
    std::fs::write(a.join("vectors.f32le"), &bytes).unwrap();
    assert!(VectorIndex::load(&a).is_err(), "flipped vector bit accepted");

    let entries = std::fs::read_to_string(b.join("entries.jsonl")).unwrap();
    std::fs::write(b.join("entries.jsonl"), entries.replacen("c0000", "c9999", 1)).unwrap();
    assert!(VectorIndex::load(&b).is_err(), "edited entries accepted");
}
