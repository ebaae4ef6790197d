//! Replays a bundled trace script and prints its usage row and phase
//! timeline. Pass a script path to replay something else.

use std::path::PathBuf;

use threadwise::replay::{replay, TraceScript};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("traces/p7_like.json"));
    let script = TraceScript::load(&path)?;
    println!("{} steps, seed {}", script.steps.len(), script.seed);
    let out = replay(&script, None).await?;
    println!("{}", out.metrics_json());
    for seg in &out.timeline.segments {
        println!("{:>12} {:>6.1} min", seg.phase.as_str(), seg.duration_ms() as f64 / 60_000.0);
    }
    println!("export: {} bytes, checksum {}", out.export_json().len(), out.record.checksum);
    Ok(())
}
