#![allow(dead_code)]

use std::sync::Arc;

use threadwise::api::{router, AppState};
use threadwise::clock::IdGen;
use threadwise::engine::{Engine, EngineOptions};
use threadwise::store::{InMemoryStore, Store};
use threadwise_core::llm::gateway::{Gateway, ProviderConfig};

pub const JANE: &str = "I retired after decades of work and planned to take up painting and travel. \
My daughter asked me to look after her newborn during the day. I love my grandson. \
Still, my own life feels overshadowed by these new responsibilities and I struggle with purposelessness.";

pub fn engine_with(store: Arc<dyn Store>, gateway: Gateway) -> Engine {
    Engine::new(
        store,
        gateway,
        EngineOptions {
            ids: IdGen::sequential(),
            ..EngineOptions::default()
        },
    )
}

pub fn mock_engine() -> Engine {
    engine_with(
        Arc::new(InMemoryStore::new()),
        Gateway::from_config(ProviderConfig::mock(7)).unwrap(),
    )
}

/// Serves `engine` on a free local port; returns the base URL.
pub async fn serve(engine: Engine, token: Option<String>) -> String {
    let app = router(AppState { engine, token });
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

pub fn trace(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("traces")
        .join(format!("{name}.json"))
}

use threadwise_core::llm::gateway::{GatewayError, Provider, ProviderCall};
use threadwise_core::llm::mock::MockProvider;
use tokio::sync::oneshot;

/// Mock provider that, once armed, pauses its next call until released.
/// Lets a test mutate the session while a generation is in flight.
pub struct GatedProvider {
    inner: MockProvider,
    gate: parking_lot::Mutex<Option<(oneshot::Sender<()>, oneshot::Receiver<()>)>>,
}

pub struct Gate {
    pub started: oneshot::Receiver<()>,
    pub release: oneshot::Sender<()>,
}

impl GatedProvider {
    pub fn new(seed: u64) -> Arc<Self> {
        Arc::new(Self {
            inner: MockProvider::new(seed),
            gate: parking_lot::Mutex::new(None),
        })
    }

    pub fn arm(&self) -> Gate {
        let (started_tx, started) = oneshot::channel();
        let (release, release_rx) = oneshot::channel();
        *self.gate.lock() = Some((started_tx, release_rx));
        Gate { started, release }
    }
}

#[async_trait::async_trait]
impl Provider for GatedProvider {
    async fn complete(&self, call: ProviderCall<'_>) -> Result<String, GatewayError> {
        let gate = self.gate.lock().take();
        if let Some((started, release)) = gate {
            let _ = started.send(());
            let _ = release.await;
        }
        self.inner.complete(call).await
    }
}

pub fn gated_engine(seed: u64) -> (Engine, Arc<GatedProvider>) {
    let provider = GatedProvider::new(seed);
    let gw = Gateway::with_provider(provider.clone(), ProviderConfig::mock(seed));
    (engine_with(Arc::new(InMemoryStore::new()), gw), provider)
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_threadwise"))
}

/// A `threadwise serve` child process.
pub struct Server {
    pub child: std::process::Child,
    pub base: String,
}

impl Server {
    pub fn start(config: &std::path::Path) -> Self {
        use std::io::BufRead;
        let mut child = bin()
            .args(["serve", "--config", config.to_str().unwrap()])
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        std::io::BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_owned();
        Self { child, base }
    }

    /// SIGTERM and wait; returns the exit code.
    pub fn stop(mut self) -> i32 {
        std::process::Command::new("kill")
            .args(["-TERM", &self.child.id().to_string()])
            .status()
            .unwrap();
        self.child.wait().unwrap().code().unwrap_or(-1)
    }

    /// SIGKILL, no chance to flush or settle.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        let _ = self.child.wait();
    }
}

/// Mock-provider config with the given storage directory.
pub fn write_config(dir: &std::path::Path, storage: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("threadwise.toml");
    std::fs::write(
        &path,
        format!(
            "[server]\nport = 0\nstorage_dir = {:?}\n\n[llm]\nprovider = \"mock\"\nseed = 3\n",
            storage.to_str().unwrap()
        ),
    )
    .unwrap();
    path
}
