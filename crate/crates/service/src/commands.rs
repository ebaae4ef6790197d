//! The `threadwise` command line. Exit codes: 0 success, 1 domain failure,
//! 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use threadwise_core::llm::gateway::Gateway;
use threadwise_core::metrics::{render_rows, usage_row, TableFormat};
use threadwise_core::model::{EventRecord, Session, SessionId};
use threadwise_core::validate::{validate_session, Failure, Report};

use crate::api::{router, AppState};
use crate::config::Config;
use crate::engine::{Engine, EngineOptions};
use crate::replay::{replay, TraceScript};
use crate::store::{FileStore, Store, StoreRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "threadwise", version, about = "Guided reflection service and tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay a trace script against the mock provider.
    Replay {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the script.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check an exported session against every invariant.
    Validate { path: PathBuf },
    /// Usage table over every session document found in a directory.
    Metrics {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Write a stored session's full record.
    Export {
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: PathBuf,
        /// Storage directory of the service.
        #[arg(long, default_value = "sessions")]
        store: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Serve { config } => serve(&config),
        Command::Replay { script, out, seed } => cmd_replay(&script, &out, seed),
        Command::Validate { path } => cmd_validate(&path),
        Command::Metrics { dir, format } => cmd_metrics(&dir, format),
        Command::Export { id, out, store } => cmd_export(&id, &out, &store),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_FAILURE
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, String> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| format!("cannot start runtime: {e}"))
}

fn serve(config_path: &Path) -> Result<i32, String> {
    let config = Config::load(config_path).map_err(|e| e.to_string())?;
    let dir = config.prepare_storage().map_err(|e| e.to_string())?;
    let store = FileStore::open(&dir).map_err(|e| e.to_string())?;
    let gateway = Gateway::from_config(config.llm.clone()).map_err(|e| format!("invalid config: {e}"))?;
    let engine = Engine::new(
        Arc::new(store),
        gateway,
        EngineOptions {
            default_locale: config.server.locale.clone(),
            ..EngineOptions::default()
        },
    );
    let app = router(AppState {
        engine: engine.clone(),
        token: config.auth_token(),
    });
    let rt = runtime()?;
    rt.block_on(async move {
        let addr = format!("{}:{}", config.server.host, config.server.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                format!("port in use: {addr}")
            } else {
                format!("cannot listen on {addr}: {e}")
            }
        })?;
        let local = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        tracing::info!(%local, storage = %dir.display(), "serving");
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| e.to_string())?;
        // let pending auto comments land before exiting
        if !engine.settle_all(Duration::from_secs(10)).await {
            tracing::warn!("pending generations did not finish before shutdown");
        }
        engine.shutdown();
        Ok(EXIT_OK)
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn cmd_replay(script: &Path, out: &Path, seed: Option<u64>) -> Result<i32, String> {
    let script = TraceScript::load(script).map_err(|e| e.to_string())?;
    let outcome = runtime()?
        .block_on(replay(&script, seed))
        .map_err(|e| e.to_string())?;
    outcome.write_to(out).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    println!("{}", outcome.metrics_json());
    Ok(EXIT_OK)
}

/// Reads a session plus events from an export document or a stored
/// session file.
pub fn read_document(path: &Path) -> Result<(Session, Vec<EventRecord>, Option<String>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("parse error in {}: {e}", path.display()))?;
    let session_value = value
        .get("session")
        .cloned()
        .ok_or_else(|| format!("parse error in {}: no session field", path.display()))?;
    let session: Session =
        serde_json::from_value(session_value).map_err(|e| format!("parse error in {}: {e}", path.display()))?;
    let events: Vec<EventRecord> = match value.get("events") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| format!("parse error in {}: {e}", path.display()))?,
        None => Vec::new(),
    };
    let checksum = value.get("checksum").and_then(Value::as_str).map(str::to_owned);
    Ok((session, events, checksum))
}

/// Full invariant report for an export document, checksum included.
pub fn validate_document(path: &Path) -> Result<Report, String> {
    let (session, events, checksum) = read_document(path)?;
    let mut report = validate_session(&session, &events);
    if let Some(sum) = checksum {
        if sum != crate::store::checksum(&session) {
            report.failures.push(Failure {
                invariant: "checksum",
                locator: "checksum".into(),
                message: "checksum does not match the session document".into(),
            });
        }
    }
    Ok(report)
}

fn cmd_validate(path: &Path) -> Result<i32, String> {
    let report = validate_document(path)?;
    if report.is_ok() {
        println!("ok: all invariants hold");
        Ok(EXIT_OK)
    } else {
        print!("{report}");
        Ok(EXIT_FAILURE)
    }
}

fn session_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| format!("cannot read {}: {e}", dir.display()))?;
    for entry in entries {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.is_dir() {
            let nested = path.join("export.json");
            if nested.is_file() {
                out.push(nested);
            }
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn cmd_metrics(dir: &Path, format: Format) -> Result<i32, String> {
    let mut rows = Vec::new();
    for path in session_files(dir)? {
        // metrics.json, timeline.json and other documents carry no session
        if let Ok((session, _, _)) = read_document(&path) {
            // replay outputs are labelled by their directory
            let label = match path.file_name().and_then(|n| n.to_str()) {
                Some("export.json") => path
                    .parent()
                    .and_then(Path::file_name)
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| session.id.to_string()),
                _ => session.id.to_string(),
            };
            rows.push((label, usage_row(&session)));
        }
    }
    if rows.is_empty() {
        return Err(format!("no session documents in {}", dir.display()));
    }
    let format = match format {
        Format::Csv => TableFormat::Csv,
        Format::Table => TableFormat::Table,
    };
    print!("{}", render_rows(&rows, format));
    Ok(EXIT_OK)
}

fn cmd_export(id: &str, out: &Path, store: &Path) -> Result<i32, String> {
    if !store.is_dir() {
        return Err(format!("storage directory {} does not exist", store.display()));
    }
    let store = FileStore::open(store).map_err(|e| e.to_string())?;
    let record: StoreRecord = store.load(&SessionId::from(id)).map_err(|e| e.to_string())?;
    std::fs::write(out, record.to_canonical()).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    Ok(EXIT_OK)
}
