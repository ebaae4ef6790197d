//! Mounts the REST API inside your own tokio program. Uses the mock
//! provider and keeps sessions in memory; pass a port as the first argument
//! (default: any free port). Stop with Ctrl-C.

use std::sync::Arc;

use threadwise::api::{router, AppState};
use threadwise::engine::{Engine, EngineOptions};
use threadwise::store::InMemoryStore;
use threadwise_core::llm::gateway::{Gateway, ProviderConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).map(|p| p.parse()).transpose()?.unwrap_or(0);
    let engine = Engine::new(
        Arc::new(InMemoryStore::new()),
        Gateway::from_config(ProviderConfig::mock(7))?,
        EngineOptions::default(),
    );
    let app = router(AppState {
        engine: engine.clone(),
        token: std::env::var("THREADWISE_TOKEN").ok(),
    });
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    println!("listening on http://{}", listener.local_addr()?);
    println!("try: curl -X POST -d '{{\"narrative\":\"I feel stuck.\"}}' -H 'content-type: application/json' http://{}/sessions", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    engine.settle_all(std::time::Duration::from_secs(5)).await;
    Ok(())
}
