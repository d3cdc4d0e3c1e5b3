#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use groundqa::corpus::{ChunkMetadata, SourceType};
use groundqa::embeddings::EmbeddingVector;
use groundqa::qa_dataset::QAPair;
use groundqa::vector_store::{IndexEntry, Metric, VectorIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// `n` random unit vectors. Every 97th vector repeats an earlier one so
/// searches hit exact ties.
pub fn unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f32>> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && i % 97 == 0 {
            let j = rng.random_range(0..i);
            out.push(out[j].clone());
            continue;
        }
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push(v.iter().map(|x| (x / norm) as f32).collect());
    }
    out
}

pub fn index_of(vectors: &[Vec<f32>], metric: Metric) -> VectorIndex {
    let mut index = VectorIndex::new(vectors[0].len(), metric);
    let entries = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| IndexEntry {
            chunk_id: format!("c{i:04}"),
            vector: EmbeddingVector::new(v.clone()).unwrap(),
            metadata: ChunkMetadata {
                source_url: format!("https://kb.example/{i}"),
                source_type: SourceType::Literature,
            },
        })
        .collect();
    index.add(entries).unwrap();
    index
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

/// Full-sort reference search: score every row in f64, sort by score
/// descending then id ascending, take k.
pub fn brute_force(vectors: &[Vec<f32>], q: &[f32], k: usize, metric: Metric) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = match metric {
                Metric::InnerProduct => dot(q, v),
                Metric::Cosine => dot(q, v) / (dot(q, q).sqrt() * dot(v, v).sqrt()),
                Metric::SquaredL2 => -q.iter().zip(v).map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2)).sum::<f64>(),
            };
            (format!("c{i:04}"), s)
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

const VOCAB: &[&str] = &[
    "caregiver", "dementia", "memory", "routine", "sleep", "wandering", "respite", "medication",
    "appointment", "safety", "bathing", "nutrition", "hydration", "agitation", "evening", "family",
    "support", "doctor", "insurance", "home", "daily", "walk", "music", "patience", "calm",
    "confusion", "stress", "planning", "legal", "finance", "hospice", "comfort", "diagnosis",
];

/// A plain-text document of exactly `len` characters: words from a small
/// vocabulary, one space apart, ending on a letter.
pub fn synthetic_doc(seed: u64, len: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::new();
    while s.len() < len {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(VOCAB[rng.random_range(0..VOCAB.len())]);
    }
    s.truncate(len);
    while s.ends_with(' ') {
        s.pop();
        s.push('x');
    }
    s
}

/// Distinct questions built from random nonsense words, so no two share a
/// five-word run.
pub fn synthetic_pairs(n: usize, seed: u64) -> Vec<QAPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(4..9))
            .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
            .collect()
    };
    (0..n)
        .map(|i| {
            let q: Vec<String> = (0..8).map(|_| word(&mut rng)).collect();
            let a: Vec<String> = (0..12).map(|_| word(&mut rng)).collect();
            QAPair::new(format!("p{i:04}"), format!("How {}?", q.join(" ")), a.join(" "))
        })
        .collect()
}

pub fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_groundqa"))
}

pub fn run_cli(args: &[&str]) -> String {
    let out = cli().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "groundqa {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub body: String,
}

pub struct Reply {
    pub status: u16,
    pub headers: Vec<(&'static str, String)>,
    pub body: String,
}

impl Reply {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        Self {
            status,
            headers: Vec::new(),
            body: body.into(),
        }
    }

    pub fn header(mut self, name: &'static str, value: impl Into<String>) -> Self {
        self.headers.push((name, value.into()));
        self
    }
}

/// A one-connection-per-request HTTP/1.1 server on a free local port. The
/// handler sees each request and its 0-based sequence number. Returns the
/// base URL and the log of requests received.
pub fn scripted_server<F>(handler: F) -> (String, std::sync::Arc<std::sync::Mutex<Vec<Recorded>>>)
where
    F: Fn(&Recorded, usize) -> Reply + Send + 'static,
{
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let log = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let seen = log.clone();
    std::thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            if reader.read_line(&mut line).is_err() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let method = parts.next().unwrap_or_default().to_string();
            let path = parts.next().unwrap_or_default().to_string();
            let mut len = 0usize;
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0u8; len];
            let _ = reader.read_exact(&mut body);
            let req = Recorded {
                method,
                path,
                body: String::from_utf8_lossy(&body).into_owned(),
            };
            let reply = handler(&req, n);
            let is_head = req.method == "HEAD";
            seen.lock().unwrap().push(req);
            let mut head = format!(
                "HTTP/1.1 {} Scripted\r\nContent-Length: {}\r\nConnection: close\r\n",
                reply.status,
                reply.body.len()
            );
            for (k, v) in &reply.headers {
                head.push_str(&format!("{k}: {v}\r\n"));
            }
            head.push_str("\r\n");
            let _ = stream.write_all(head.as_bytes());
            if !is_head {
                let _ = stream.write_all(reply.body.as_bytes());
            }
        }
    });
    (base, log)
}

/// A URL on a local port nothing listens on.
pub fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    url
}
