use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use hetqa::config::{parse_sources, BackendKind, PipelineConfig, Source};
use hetqa::eval::{self, EvalOptions};
use hetqa::fusion::pretty_json;
use hetqa::index::{generate_triplets, read_passages, write_triplets_tsv, Index, DEFAULT_NEGATIVES};
use hetqa::pipeline::Pipeline;
use hetqa::service::{self, AskResponse};
use hetqa::wikitext::{extract, read_pages};

#[derive(Parser)]
#[command(name = "hetqa", version, about = "Hybrid QA over knowledge base, text, tables and infoboxes")]
struct Cli {
    /// JSON pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Enabled sources, e.g. `text,tables,kb,llm_claim`.
    #[arg(long, global = true)]
    sources: Option<String>,
    /// Hits per retrieval source.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Seed for triplet negative sampling
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `mock` or `remote`.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linearize tables and infoboxes from an XML dump or a directory of pages.
    Extract {
        input: PathBuf,
        /// Also write sentence passages for a text index.
        #[arg(long)]
        text_out: Option<PathBuf>,
    },
    /// Build a BM25 index from passages or records (JSON lines).
    Index { input: PathBuf },
    /// Sample retriever training triplets.
    Triplets {
        /// TSV of `query <TAB> positive_doc_id`.
        #[arg(long)]
        positives: PathBuf,
        /// Passages or records whose ids form the negative pool.
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NEGATIVES)]
        n_neg: usize,
    },
    /// Answer one question and print the answer with its evidence.
    Ask { question: String },
    /// Run a dataset and report EM / Superset / judge rates.
    Eval {
        dataset: PathBuf,
        /// Evaluate each source subset (comma lists separated by `;`),
        /// e.g. `text;text,tables;text,tables,kb`.
        #[arg(long)]
        ablation: Option<String>,
        /// Skip the LLM judge pass
        #[arg(long)]
        no_judge: bool,
        /// Where to write the JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Serve `POST /ask` and `GET /health`.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

/// Exit 2 for usage and configuration problems, 1 for everything else.
enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Internal(e.into())
    }
}

fn usage<T>(r: Result<T, impl Into<anyhow::Error>>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.into()))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("HETQA_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => usage(PipelineConfig::load(path))?,
        None => PipelineConfig::default(),
    };
    config.apply_env();
    if let Some(list) = &cli.sources {
        config.sources = usage(parse_sources(list))?;
    }
    if let Some(k) = cli.k {
        config.k = k;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(backend) = &cli.backend {
        config.backend = usage(backend.parse::<BackendKind>())?;
    }
    usage(config.validate())?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()));
    Ok(BufWriter::new(usage(file)?))
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Extract { input, text_out } => {
            let out_path = cli.out.as_deref().ok_or_else(|| Failure::Usage(anyhow!("extract needs --out")))?;
            let pages = usage(read_pages(input))?;
            let extraction = extract(&pages);
            let mut out = create(out_path)?;
            for record in &extraction.records {
                writeln!(out, "{}", serde_json::to_string(record)?)?;
            }
            out.flush()?;
            if let Some(path) = text_out {
                let mut out = create(path)?;
                for passage in &extraction.passages {
                    writeln!(out, "{}", serde_json::to_string(passage)?)?;
                }
                out.flush()?;
            }
            let s = extraction.summary;
            writeln!(
                stdout,
                "pages: {}, tables: {}, infoboxes: {}, skipped: {}, records: {}",
                s.pages,
                s.tables,
                s.infoboxes,
                s.skipped,
                extraction.records.len()
            )?;
        }
        Command::Index { input } => {
            let out_path = cli.out.as_deref().ok_or_else(|| Failure::Usage(anyhow!("index needs --out")))?;
            let passages = usage(read_passages(input))?;
            let index = usage(Index::build(passages))?;
            index.save(out_path)?;
            writeln!(stdout, "indexed {} passages", index.len())?;
        }
        Command::Triplets { positives, pool, n_neg } => {
            let seed = cli.seed.unwrap_or(0);
            let file = usage(File::open(positives).with_context(|| format!("cannot open {}", positives.display())))?;
            let mut pairs = Vec::new();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let (query, doc) = line
                    .split_once('\t')
                    .ok_or_else(|| Failure::Usage(anyhow!("{}:{}: expected query<TAB>doc_id", positives.display(), i + 1)))?;
                pairs.push((query.to_string(), doc.trim().to_string()));
            }
            let ids: Vec<String> = usage(read_passages(pool))?.into_iter().map(|p| p.doc_id).collect();
            let triplets = usage(generate_triplets(&pairs, &ids, *n_neg, seed))?;
            match &cli.out {
                Some(path) => {
                    let mut out = create(path)?;
                    write_triplets_tsv(&mut out, &triplets)?;
                    out.flush()?;
                    writeln!(stdout, "wrote {} triplets", triplets.len())?;
                }
                None => write_triplets_tsv(&mut stdout, &triplets)?,
            }
        }
        Command::Ask { question } => {
            let config = load_config(&cli)?;
            let pipeline = usage(Pipeline::from_config(&config))?;
            let answered = runtime()?.block_on(pipeline.answer(question));
            let response = AskResponse::from(&answered);
            writeln!(stdout, "{}", pretty_json(&response))?;
            let d = &answered.diagnostics;
            if d.evidence_failures > 0 {
                eprintln!("evidence failures: {}", d.evidence_failures);
                for m in &d.messages {
                    eprintln!("  {m}");
                }
            }
            if let Some(path) = &cli.out {
                let mut out = create(path)?;
                writeln!(out, "{}", answered.prediction(None).to_pretty_json())?;
                out.flush()?;
            }
        }
        Command::Eval { dataset, ablation, no_judge, report } => {
            let config = load_config(&cli)?;
            let examples = usage(eval::load_dataset(dataset))?;
            let pipeline = usage(Pipeline::from_config(&config))?;
            let options = EvalOptions { judge: !no_judge, ..Default::default() };
            let configs: Vec<std::collections::BTreeSet<Source>> = match ablation {
                Some(spec) => usage(spec.split(';').map(parse_sources).collect::<Result<_, _>>())?,
                None => vec![config.sources.clone()],
            };
            let runs = runtime()?.block_on(eval::run_ablation(&examples, &pipeline, &configs, &options));
            let runs = usage(runs)?;
            if let Some(path) = &cli.out {
                let mut out = create(path)?;
                let last = runs.last().expect("at least one config");
                eval::write_predictions(&mut out, &last.predictions)?;
                out.flush()?;
            }
            let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
            write!(stdout, "{}", eval::render_table(&reports))?;
            writeln!(stdout)?;
            write!(stdout, "{}", eval::render_breakdown(&reports.last().expect("one report").errors))?;
            if let Some(path) = report {
                let mut out = create(path)?;
                writeln!(out, "{}", pretty_json(&reports))?;
                out.flush()?;
            }
        }
        Command::Serve { addr } => {
            let config = load_config(&cli)?;
            let pipeline = usage(Pipeline::from_config(&config))?;
            runtime()?.block_on(service::serve(pipeline, *addr))?;
        }
    }
    Ok(())
}
