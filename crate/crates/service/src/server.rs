//! Service wiring: startup, the background AI answer worker, and a handle
//! for running the server on its own runtime thread.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch, Semaphore};
use tokio::task::JoinSet;
use tracing::{info, warn};

use coursemate_core::forum::{
    AnswerJobs, Forum, ForumError, QuestionId, SystemClock, DEFAULT_AI_NAME, DEFAULT_AI_USER,
};
use coursemate_core::index::{EmbeddingProvider, Index, IndexError, ReferenceEmbedder};
use coursemate_core::rag::{BackendKind, GenerationBackend, StubBackend};
use coursemate_core::Pipeline;

use crate::adapters::{ExternalBackend, HttpEmbeddingProvider, HTTP_PROVIDER_NAME};
use crate::api::{self, AppState};
use crate::auth::{TokenError, TokenTable};
use crate::config::{
    credential, ConfigError, ServiceConfig, EMBED_ENDPOINT_ENV, EMBED_KEY_ENV, LLM_KEY_ENV,
};

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load index from {path}: {source}")]
    Index {
        path: std::path::PathBuf,
        source: IndexError,
    },
    #[error("index was built with unknown embedding provider {0:?}")]
    UnknownProvider(String),
    #[error("cannot open forum data: {0}")]
    Forum(#[from] ForumError),
    #[error(transparent)]
    Tokens(#[from] TokenError),
    #[error("cannot listen on {address}: {source}")]
    Bind {
        address: String,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

/// The embedding provider matching an index's recorded provider name.
pub fn provider_for(index: &Index, timeout_ms: u64) -> Result<Arc<dyn EmbeddingProvider>, StartupError> {
    match index.provider_name() {
        ReferenceEmbedder::NAME => Ok(Arc::new(ReferenceEmbedder::new(index.dim()))),
        HTTP_PROVIDER_NAME => {
            let endpoint = credential(EMBED_ENDPOINT_ENV)?;
            let key = credential(EMBED_KEY_ENV)?;
            Ok(Arc::new(HttpEmbeddingProvider::new(endpoint, key, index.dim(), timeout_ms)))
        }
        other => Err(StartupError::UnknownProvider(other.to_string())),
    }
}

pub fn backend_for(config: &ServiceConfig) -> Result<Arc<dyn GenerationBackend>, StartupError> {
    Ok(match config.backend {
        BackendKind::Stub => Arc::new(StubBackend),
        BackendKind::External => Arc::new(ExternalBackend::new(
            config.external_endpoint()?,
            credential(LLM_KEY_ENV)?,
            config.request_timeout_ms,
        )),
    })
}

/// Loads the index named in the config and builds the answering pipeline.
pub fn pipeline_for(config: &ServiceConfig) -> Result<Pipeline, StartupError> {
    let index = Index::load(&config.index_dir).map_err(|source| StartupError::Index {
        path: config.index_dir.clone(),
        source,
    })?;
    let provider = provider_for(&index, config.request_timeout_ms)?;
    let backend = backend_for(config)?;
    Ok(Pipeline::new(Arc::new(index), provider, backend))
}

struct JobQueue(mpsc::UnboundedSender<QuestionId>);

impl AnswerJobs for JobQueue {
    fn enqueue(&self, question: QuestionId) {
        // a closed queue means the service is stopping; the question is
        // picked up again on the next start
        let _ = self.0.send(question);
    }
}

pub struct Service {
    state: AppState,
    config: ServiceConfig,
    jobs: mpsc::UnboundedReceiver<QuestionId>,
}

impl Service {
    /// Validates the config, loads the index and replays the forum data.
    pub fn build(config: ServiceConfig) -> Result<Service, StartupError> {
        config.validate()?;
        let pipeline = pipeline_for(&config)?;
        Service::with_pipeline(config, pipeline)
    }

    /// Like [`Service::build`] with a caller-supplied pipeline.
    pub fn with_pipeline(config: ServiceConfig, pipeline: Pipeline) -> Result<Service, StartupError> {
        config.validate()?;
        let (tx, rx) = mpsc::unbounded_channel();
        let forum = Forum::open(&config.data_dir, Arc::new(SystemClock), config.durable_log)?
            .with_jobs(Arc::new(JobQueue(tx.clone())));
        forum.ensure_ai_user(DEFAULT_AI_USER, DEFAULT_AI_NAME)?;

        let tokens = match &config.tokens_file {
            Some(path) => TokenTable::load(path)?,
            None => TokenTable::default(),
        };
        for e in tokens.entries() {
            if forum.read(|s| s.cohort(&e.cohort_id).is_none()) {
                forum.create_cohort(e.cohort_id.clone(), e.cohort_id.as_str(), None)?;
            }
            forum.register_user(e.user_id.clone(), &e.display_name, e.role, Some(e.cohort_id.clone()))?;
        }

        let pending = forum.questions_awaiting_ai();
        if !pending.is_empty() {
            info!(count = pending.len(), "re-queueing questions without an AI answer");
        }
        for q in pending {
            let _ = tx.send(q);
        }

        Ok(Service {
            state: AppState {
                forum: Arc::new(forum),
                pipeline: Arc::new(pipeline),
                tokens: Arc::new(tokens),
            },
            config,
            jobs: rx,
        })
    }

    pub fn forum(&self) -> Arc<Forum> {
        self.state.forum.clone()
    }

    pub fn router(&self) -> axum::Router {
        api::router(self.state.clone())
    }

    /// Serves until `shutdown` resolves, then lets in-flight AI answers
    /// finish and writes a snapshot.
    pub async fn run(
        self,
        listener: TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> Result<(), StartupError> {
        let router = self.router();
        let (stop_tx, stop_rx) = watch::channel(false);
        let worker = tokio::spawn(answer_worker(
            self.state.forum.clone(),
            self.state.pipeline.clone(),
            self.jobs,
            self.config.ai_answer_concurrency,
            self.config.ai_answer_attempts,
            stop_rx,
        ));

        let served = axum::serve(listener, router)
            .with_graceful_shutdown(shutdown)
            .await;
        let _ = stop_tx.send(true);
        if let Err(e) = worker.await {
            warn!(error = %e, "answer worker panicked");
        }
        self.state.forum.snapshot()?;
        info!("snapshot written");
        served.map_err(StartupError::Serve)
    }
}

async fn answer_worker(
    forum: Arc<Forum>,
    pipeline: Arc<Pipeline>,
    mut jobs: mpsc::UnboundedReceiver<QuestionId>,
    concurrency: usize,
    attempts: u32,
    mut stop: watch::Receiver<bool>,
) {
    let permits = Arc::new(Semaphore::new(concurrency));
    let mut running = JoinSet::new();
    loop {
        let question = tokio::select! {
            q = jobs.recv() => match q {
                Some(q) => q,
                None => break,
            },
            _ = stop.changed() => break,
        };
        let permit = tokio::select! {
            p = permits.clone().acquire_owned() => p.expect("semaphore is never closed"),
            _ = stop.changed() => break,
        };
        let (forum, pipeline) = (forum.clone(), pipeline.clone());
        running.spawn(async move {
            let _permit = permit;
            answer_with_retries(forum, pipeline, question, attempts).await;
        });
        while running.try_join_next().is_some() {}
    }
    while running.join_next().await.is_some() {}
}

async fn answer_with_retries(forum: Arc<Forum>, pipeline: Arc<Pipeline>, question: QuestionId, attempts: u32) {
    for attempt in 1..=attempts {
        let (f, p) = (forum.clone(), pipeline.clone());
        match tokio::task::spawn_blocking(move || f.post_ai_answer(question, &p)).await {
            Ok(Ok(answer)) => {
                info!(%question, answer = %answer.answer_id, fallback = answer.fallback, "AI answer posted");
                return;
            }
            Ok(Err(ForumError::UnknownQuestion(_))) => return,
            Ok(Err(e)) => warn!(%question, attempt, error = %e, "AI answer failed"),
            Err(e) => warn!(%question, attempt, error = %e, "AI answer task failed"),
        }
        if attempt < attempts {
            tokio::time::sleep(Duration::from_millis(200 << (attempt - 1).min(6))).await;
        }
    }
    warn!(%question, "giving up on AI answer until the next start");
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    addr: SocketAddr,
    forum: Arc<Forum>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<(), StartupError>>>,
}

impl ServerHandle {
    /// Binds `config.listen_address` (port 0 picks a free port) and starts
    /// serving in the background.
    pub fn spawn(service: Service) -> Result<ServerHandle, StartupError> {
        let address = service.config.listen_address.clone();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(StartupError::Serve)?;
        let listener = runtime
            .block_on(TcpListener::bind(&address))
            .map_err(|source| StartupError::Bind { address: address.clone(), source })?;
        let addr = listener.local_addr().map_err(StartupError::Serve)?;
        let forum = service.forum();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(service.run(listener, async {
                let _ = stop_rx.await;
            }))
        });
        Ok(ServerHandle {
            addr,
            forum,
            stop: Some(stop_tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn forum(&self) -> &Arc<Forum> {
        &self.forum
    }

    /// Stops the server, waits for it to finish and returns its result.
    pub fn stop(mut self) -> Result<(), StartupError> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> Result<(), StartupError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| {
                Err(StartupError::Serve(std::io::Error::other("server thread panicked")))
            }),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
