use std::error::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use coursemate_core::corpus::{corpus_stats, ingest_corpus, load_documents, write_passages};
use coursemate_core::eval::{evaluate, load_records};
use coursemate_core::index::{EmbeddingProvider, ReferenceEmbedder, DEFAULT_DIM, DEFAULT_TOP_K};
use coursemate_core::rag::BackendKind;
use coursemate_core::{detect_language, Index, Pipeline, QuestionInput};
use coursemate_service::adapters::HttpEmbeddingProvider;
use coursemate_service::config::{credential, EMBED_ENDPOINT_ENV, EMBED_KEY_ENV};
use coursemate_service::server::{backend_for, provider_for};
use coursemate_service::{Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "coursemate", version, about = "Bilingual course Q&A: indexing, answering and the forum server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a JSONL corpus into passages and print per-language and per-tag counts.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Write the passages as JSONL here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Index(IndexCommand),
    /// Detect whether a text is English or French.
    Detect {
        #[arg(long)]
        text: String,
    },
    /// Answer one question from an index.
    Ask {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long, default_value = "stub")]
        backend: BackendKind,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
    },
    /// Run the forum HTTP server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the evaluation metrics from a labelled CSV.
    Eval {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Ingest a corpus and write an index directory.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ref")]
        provider: ProviderArg,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
    },
    /// Retrieve the top passages for a text, one JSON hit per line.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Ref,
    Http,
}

type CliResult = Result<(), Box<dyn Error>>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest { corpus, out } => {
            let passages = ingest_corpus(&load_documents(&corpus)?)?;
            if let Some(out) = out {
                write_passages(&out, &passages)?;
            }
            print_json(&corpus_stats(&passages))
        }
        Command::Index(IndexCommand::Build {
            corpus,
            out,
            provider,
            dim,
            timeout_ms,
        }) => {
            let provider: Box<dyn EmbeddingProvider> = match provider {
                ProviderArg::Ref => Box::new(ReferenceEmbedder::new(dim)),
                ProviderArg::Http => Box::new(HttpEmbeddingProvider::new(
                    credential(EMBED_ENDPOINT_ENV)?,
                    credential(EMBED_KEY_ENV)?,
                    dim,
                    timeout_ms,
                )),
            };
            let index = Index::build_from_documents(&load_documents(&corpus)?, provider.as_ref())?;
            index.save(&out)?;
            eprintln!("indexed {} passages into {}", index.len(), out.display());
            Ok(())
        }
        Command::Index(IndexCommand::Query { index, text, tags, k }) => {
            let index = Index::load(&index)?;
            let provider = provider_for(&index, 30_000)?;
            let language = detect_language(&text)?.language;
            let tags = (!tags.is_empty()).then_some(tags);
            let retrieval = index.retrieve(provider.as_ref(), &text, language, tags.as_deref(), k)?;
            let mut out = std::io::stdout().lock();
            for hit in &retrieval.hits {
                serde_json::to_writer(&mut out, hit)?;
                writeln!(out)?;
            }
            Ok(())
        }
        Command::Detect { text } => print_json(&detect_language(&text)?),
        Command::Ask {
            index,
            text,
            tags,
            backend,
            endpoint,
            timeout_ms,
        } => {
            let mut config = ServiceConfig::new(index.clone(), PathBuf::new());
            config.backend = backend;
            config.external_endpoint = endpoint;
            config.request_timeout_ms = timeout_ms;
            let index = Index::load(&index)?;
            let provider = provider_for(&index, timeout_ms)?;
            let pipeline = Pipeline::new(Arc::new(index), provider, backend_for(&config)?);
            let answer = pipeline.answer_question(&QuestionInput {
                text,
                tags,
                attachments: Vec::new(),
            })?;
            print_json(&answer)
        }
        Command::Serve { config } => serve(ServiceConfig::load(&config)?),
        Command::Eval { records, json } => {
            let report = evaluate(&load_records(&records)?)?;
            if json {
                print_json(&report)
            } else {
                print!("{report}");
                Ok(())
            }
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn serve(config: ServiceConfig) -> CliResult {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let address = config.listen_address.clone();
    let service = Service::build(config)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&address).await?;
        tracing::info!(address = %listener.local_addr()?, "listening");
        service
            .run(listener, async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down");
            })
            .await?;
        Ok(())
    })
}
