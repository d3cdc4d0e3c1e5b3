use std::error::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use groundqa::citations::{aggregate, audit, audit_with_liveness, LivenessChecker, ReferenceAudit};
use groundqa::config::AppConfig;
use groundqa::corpus::{CorpusStore, IngestInput, SourceType};
use groundqa::harness::{self, compare_runs, EvalDeps, EvalRunConfig, Setting};
use groundqa::llm_client::{Generator, HttpChatBackend, StubBackend, StubMode};
use groundqa::metrics::evaluate_set;
use groundqa::qa_dataset::{self, Split, SynthesisOptions, DEFAULT_JACCARD};
use groundqa::retriever::{index_corpus, Retriever};
use groundqa::vector_store::{Metric, MANIFEST_FILE};
use groundqa::{parse_answer, service};

type Res<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "groundqa", version, about = "Grounded question answering and evaluation")]
struct Cli {
    /// JSON config; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Read documents into a corpus directory.
    Ingest {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<String>,
        #[arg(long, default_value = "web_article")]
        source_type: SourceType,
        #[arg(long)]
        max_chars: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or query a vector index.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Top-k chunks for a question, one JSON line per hit.
    Search {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(short, default_value_t = 3)]
        k: usize,
        question: String,
    },
    /// Answer one question with retrieval.
    Ask {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(short)]
        k: Option<usize>,
        #[command(flatten)]
        backend: BackendArgs,
        question: String,
    },
    /// Run a test set through one setting.
    Eval(EvalArgs),
    /// Side-by-side table of several runs over the same test set.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Deduplicate, split, leak-check or draft a QA dataset.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Audit the references of generated answers.
    Audit {
        #[arg(long)]
        answers: PathBuf,
        #[arg(long)]
        contexts: Option<PathBuf>,
        #[arg(long)]
        check_live: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold answers.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score whole answers including their reference lists.
        #[arg(long)]
        full_text: bool,
    },
    /// Run the HTTP service.
    Serve,
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Embed every corpus chunk and write the index.
    Build {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Nearest chunks to a query text.
    Search {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        query_text: String,
        #[arg(short, default_value_t = 3)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Drop exact and near-duplicate pairs.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_JACCARD)]
        jaccard: f64,
    },
    /// Label pairs train/test.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_train: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Near-duplicate leakage between the train and test splits.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_JACCARD)]
        jaccard: f64,
    },
    /// Draft pairs from random corpus chunks.
    Synthesize {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StubKind {
    Echo,
    Empty,
    /// Canned answers taken from the dataset's gold answers (eval only).
    Gold,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Offline backend instead of HTTP.
    #[arg(long)]
    stub: Option<StubKind>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "rag")]
    setting: Setting,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(short)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    check_live: bool,
    #[arg(long)]
    include_unvalidated: bool,
    #[arg(long)]
    full_text: bool,
    #[arg(long, default_value_t = 0.5)]
    failure_threshold: f64,
    #[command(flatten)]
    backend: BackendArgs,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Res {
    let cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    match cli.cmd {
        Cmd::Ingest {
            input,
            source_type,
            max_chars,
            out,
        } => {
            let mut opts = cfg.corpus.ingest.clone();
            if let Some(m) = max_chars {
                opts.max_chars = m;
            }
            let mut store = CorpusStore::open(out.unwrap_or(cfg.corpus.dir.clone()))?;
            let inputs: Vec<IngestInput> = input.into_iter().map(|l| IngestInput::new(l, source_type)).collect();
            let report = store.ingest(&inputs, &opts)?;
            for e in &report.errors {
                eprintln!("skipped {}: {}", e.location, e.message);
            }
            print_json(&report)
        }
        Cmd::Index(IndexCmd::Build { corpus, out, metric }) => {
            let store = CorpusStore::open(corpus.unwrap_or(cfg.corpus.dir.clone()))?;
            let embedder = cfg.embedding.build()?;
            let out = out.unwrap_or(cfg.index.dir.clone());
            index_corpus(&store, embedder.as_ref(), metric.unwrap_or(cfg.index.metric), &out)?;
            println!("{}", std::fs::read_to_string(out.join(MANIFEST_FILE))?);
            Ok(())
        }
        Cmd::Index(IndexCmd::Search { index, query_text, k }) | Cmd::Search { index, question: query_text, k } => {
            let retriever = open_retriever(&cfg, index.as_deref())?;
            let ctx = retriever.retrieve(&query_text, k)?;
            let mut out = std::io::stdout().lock();
            for hit in &ctx.hits {
                serde_json::to_writer(&mut out, hit)?;
                writeln!(out)?;
            }
            Ok(())
        }
        Cmd::Ask {
            index,
            k,
            backend,
            question,
        } => {
            let retriever = open_retriever(&cfg, index.as_deref())?;
            let state = service::ServiceState::new(
                generator(&cfg, &backend, None)?,
                retriever.embedder().clone(),
                Some(retriever),
                cfg.generation.prompt_builder()?,
            )
            .with_k(cfg.index.k)
            .with_snippet_chars(cfg.service.snippet_chars);
            let resp = state.ask(&service::AskRequest { question, k })?;
            print_json(&resp)
        }
        Cmd::Eval(args) => eval(&cfg, args),
        Cmd::Compare { runs, out, markdown } => {
            let summaries = runs
                .iter()
                .map(|p| harness::load_summary(p))
                .collect::<Result<Vec<_>, _>>()?;
            let table = compare_runs(&summaries)?;
            let csv = table.to_csv()?;
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            if let Some(p) = markdown {
                std::fs::write(p, table.to_markdown())?;
            }
            Ok(())
        }
        Cmd::Dataset(cmd) => dataset(&cfg, cmd),
        Cmd::Audit {
            answers,
            contexts,
            check_live,
            out,
        } => audit_cmd(&answers, contexts.as_deref(), check_live, out.as_deref()),
        Cmd::Score {
            pred,
            gold,
            out,
            full_text,
        } => {
            let preds: Vec<AnswerLine> = read_jsonl(&pred)?;
            let gold: std::collections::HashMap<String, String> =
                qa_dataset::load(&gold)?.into_iter().map(|p| (p.id, p.answer)).collect();
            let items = preds
                .into_iter()
                .map(|p| {
                    let reference = gold.get(&p.id).ok_or_else(|| format!("no gold answer for id {:?}", p.id))?;
                    Ok((p.id, p.answer, reference.clone()))
                })
                .collect::<Res<Vec<_>>>()?;
            let embedder = cfg.embedding.build()?;
            let report = evaluate_set(&items, embedder.as_ref(), !full_text)?;
            match out {
                Some(p) => std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?,
                None => print_json(&report.aggregates)?,
            }
            Ok(())
        }
        Cmd::Serve => Ok(service::serve(&cfg)?),
    }
}

fn print_json<T: Serialize>(value: &T) -> Res {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Res<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1).into()))
        .collect()
}

fn open_retriever(cfg: &AppConfig, index: Option<&Path>) -> Res<Retriever> {
    let embedder = cfg.embedding.build()?;
    let dir = index.unwrap_or(&cfg.index.dir);
    Ok(Retriever::open(dir, None, embedder)?.with_default_k(cfg.index.k))
}

fn generator(cfg: &AppConfig, args: &BackendArgs, gold: Option<&[qa_dataset::QAPair]>) -> Res<Arc<dyn Generator>> {
    Ok(match args.stub {
        Some(StubKind::Echo) => Arc::new(StubBackend::echo()),
        Some(StubKind::Empty) => Arc::new(StubBackend::empty()),
        Some(StubKind::Gold) => {
            let pairs = gold.ok_or("--stub gold only applies to eval")?;
            Arc::new(
                StubBackend::new(StubMode::Canned, pairs.iter().map(|p| (p.question.clone(), p.answer.clone())))
                    .with_name("stub-gold"),
            )
        }
        None if args.backend_url.is_none() && args.model.is_none() => cfg.generation.build()?,
        None => {
            let mut backend = cfg.generation.backend.clone();
            if let Some(u) = &args.backend_url {
                backend.base_url = u.clone();
            }
            if let Some(m) = &args.model {
                backend.model_name = m.clone();
            }
            Arc::new(HttpChatBackend::new(backend)?)
        }
    })
}

fn eval(cfg: &AppConfig, args: EvalArgs) -> Res {
    let pairs = qa_dataset::load(&args.dataset)?;
    let items = harness::select_items(pairs, args.include_unvalidated);
    let generator = generator(cfg, &args.backend, Some(&items))?;
    let embedder = cfg.embedding.build()?;
    let index_dir = args.index.clone().unwrap_or(cfg.index.dir.clone());
    let retriever = if args.setting.uses_retrieval() {
        Some(Retriever::open(&index_dir, None, embedder.clone())?)
    } else {
        None
    };
    let config = EvalRunConfig {
        setting: args.setting,
        label: args.label,
        k: args.k.unwrap_or(cfg.index.k),
        dataset_path: args.dataset,
        index_path: Some(index_dir),
        char_budget: cfg.generation.char_budget,
        output_dir: args.out,
        check_live: args.check_live,
        failure_threshold: args.failure_threshold,
        body_only: !args.full_text,
        include_unvalidated: args.include_unvalidated,
        vanilla_system_line: cfg.generation.vanilla_system_line.clone(),
        concurrency: cfg.generation.backend.max_in_flight,
        ..Default::default()
    };
    let deps = EvalDeps {
        generator: generator.as_ref(),
        retriever: retriever.as_ref(),
        embedder: embedder.as_ref(),
        prompts: cfg.generation.prompt_builder()?,
    };
    let result = harness::run_items(&config, items, &deps)?;
    print_json(&result.summary.metric_report.aggregates)?;
    print_json(&result.summary.reference_stats)
}

fn dataset(cfg: &AppConfig, cmd: DatasetCmd) -> Res {
    match cmd {
        DatasetCmd::Dedup { input, out, jaccard } => {
            let (kept, report) = qa_dataset::dedup(qa_dataset::load(&input)?, jaccard);
            qa_dataset::save(&kept, &out)?;
            print_json(&report)
        }
        DatasetCmd::Split {
            input,
            out,
            n_train,
            seed,
        } => {
            let (pairs, manifest) = qa_dataset::split(qa_dataset::load(&input)?, n_train, seed)?;
            qa_dataset::save(&pairs, &out)?;
            print_json(&manifest)
        }
        DatasetCmd::Check { input, jaccard } => {
            let pairs = qa_dataset::load(&input)?;
            let report = qa_dataset::leakage_check(
                &qa_dataset::subset(&pairs, Split::Train),
                &qa_dataset::subset(&pairs, Split::Test),
                jaccard,
            );
            print_json(&report)?;
            if report.passed {
                Ok(())
            } else {
                Err(format!("{} leaking pairs", report.leaks.len()).into())
            }
        }
        DatasetCmd::Synthesize {
            index,
            n,
            seed,
            out,
            backend,
        } => {
            let retriever = open_retriever(cfg, index.as_deref())?;
            let corpus_dir = retriever.index().corpus_dir().map(PathBuf::from).ok_or("index has no corpus dir")?;
            let store = CorpusStore::open(corpus_dir)?;
            let chunks = store.chunks();
            let mut picks = sample(&mut ChaCha8Rng::seed_from_u64(seed), chunks.len(), n.min(chunks.len())).into_vec();
            picks.sort_unstable();
            let seeds: Vec<_> = picks.into_iter().map(|i| chunks[i].clone()).collect();
            let opts = SynthesisOptions {
                k: cfg.index.k,
                char_budget: cfg.generation.char_budget,
                ..Default::default()
            };
            let report = qa_dataset::synthesize_qa(&seeds, &retriever, generator(cfg, &backend, None)?.as_ref(), &opts);
            for e in &report.errors {
                eprintln!("seed {}: {}", e.seed_chunk_id, e.message);
            }
            qa_dataset::save(&report.drafts, &out)?;
            eprintln!("{} drafts written to {}", report.drafts.len(), out.display());
            Ok(())
        }
    }
}

#[derive(Deserialize)]
struct AnswerLine {
    id: String,
    answer: String,
}

#[derive(Deserialize)]
struct ContextLine {
    id: String,
    sources: Vec<String>,
}

#[derive(Serialize)]
struct AuditLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    audit: &'a ReferenceAudit,
}

fn audit_cmd(answers: &Path, contexts: Option<&Path>, check_live: bool, out: Option<&Path>) -> Res {
    let answers: Vec<AnswerLine> = read_jsonl(answers)?;
    let contexts: std::collections::HashMap<String, Vec<String>> = match contexts {
        Some(p) => read_jsonl::<ContextLine>(p)?.into_iter().map(|c| (c.id, c.sources)).collect(),
        None => Default::default(),
    };
    let checker = check_live.then(|| LivenessChecker::new(Duration::from_secs(10)));
    let audits: Vec<ReferenceAudit> = answers
        .iter()
        .map(|a| {
            let parsed = parse_answer(&a.answer);
            let sources = contexts.get(&a.id).map(Vec::as_slice).unwrap_or(&[]);
            match &checker {
                Some(c) => audit_with_liveness(&parsed, sources, c),
                None => audit(&parsed, sources),
            }
        })
        .collect();
    let mut lines = String::new();
    for (a, audit) in answers.iter().zip(&audits) {
        lines.push_str(&serde_json::to_string(&AuditLine { id: &a.id, audit })?);
        lines.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, lines)?,
        None => print!("{lines}"),
    }
    let stats = aggregate(&audits)?;
    eprintln!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
