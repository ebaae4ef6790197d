mod common;

use std::path::Path;
use std::process::Output;

use common::{bin, Server};

use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn replay_into(name: &str, out: &Path) {
    let o = run(&["replay", "--script", common::trace(name).to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["metrics", "--dir", ".", "--format", "xml"])), 2);
    assert_eq!(code(&run(&["replay", "--script", "x.json"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn replay_writes_outputs_and_prints_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p7");
    let o = run(&["replay", "--script", common::trace("p7_like").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(printed["question_count"], 15);
    for f in ["export.json", "metrics.json", "timeline.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let again = dir.path().join("again");
    replay_into("p7_like", &again);
    assert_eq!(
        std::fs::read(out.join("export.json")).unwrap(),
        std::fs::read(again.join("export.json")).unwrap()
    );

    let missing = run(&["replay", "--script", "/no/such/trace.json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&missing), 1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"steps\": [").unwrap();
    let o = run(&["replay", "--script", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parse"), "{}", stderr(&o));
}

#[test]
fn validate_reports_and_exits() {
    let dir = tempfile::tempdir().unwrap();
    replay_into("keyword_heavy", dir.path());
    let export = dir.path().join("export.json");
    let o = run(&["validate", export.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).starts_with("ok"));

    let mut doc: Value = serde_json::from_slice(&std::fs::read(&export).unwrap()).unwrap();
    doc["session"]["themes"][0]["suggestion"]["quote"] = json!("words from nowhere");
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, doc.to_string()).unwrap();
    let o = run(&["validate", broken.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("grounding"), "{}", stdout(&o));
    assert!(stdout(&o).contains("themes[0]"), "{}", stdout(&o));

    std::fs::write(&broken, "{\"session\": {").unwrap();
    let o = run(&["validate", broken.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));
}

#[test]
fn metrics_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    replay_into("p7_like", &dir.path().join("p7"));
    replay_into("broad_shallow", &dir.path().join("broad"));
    let d = dir.path().to_str().unwrap();
    let csv = run(&["metrics", "--dir", d, "--format", "csv"]);
    assert_eq!(code(&csv), 0, "{}", stderr(&csv));
    let text = stdout(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("narrative_syllables"), "{text}");
    assert!(lines.iter().any(|l| l.starts_with("p7,42,541,5,15,29,18")), "{text}");
    assert!(lines.iter().any(|l| l.starts_with("broad,")), "{text}");
    let table = run(&["metrics", "--dir", d]);
    assert_eq!(code(&table), 0);
    assert!(stdout(&table).contains("p7"));
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["metrics", "--dir", empty.path().to_str().unwrap()])), 1);
}

fn write_raw_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("threadwise.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[tokio::test]
async fn serve_then_export_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_raw_config(
        dir.path(),
        "[server]\nport = 0\nstorage_dir = \"data\"\n\n[llm]\nprovider = \"mock\"\nseed = 3\n",
    );
    assert!(!dir.path().join("data").exists());
    let server = Server::start(&config);
    assert!(dir.path().join("data").is_dir(), "missing storage dir is created");

    let http = reqwest::Client::new();
    let resp = http.get(format!("{}/sessions/unknown", server.base)).send().await.unwrap();
    assert_eq!(resp.status(), 404);
    let s: Value = http
        .post(format!("{}/sessions", server.base))
        .json(&json!({"narrative": common::JANE}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let sid = s["id"].as_str().unwrap().to_owned();
    let sugg: Value = http
        .post(format!("{}/sessions/{sid}/themes/suggest", server.base))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let resp = http
        .post(format!("{}/sessions/{sid}/themes", server.base))
        .json(&json!({"suggestion": sugg["suggestions"][0]}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(server.stop(), 0, "graceful shutdown");

    let out = dir.path().join("export.json");
    let store = dir.path().join("data");
    let o = run(&["export", "--id", &sid, "--out", out.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["validate", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let o = run(&["export", "--id", "nobody", "--out", out.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = run(&["export", "--id", &sid, "--out", out.to_str().unwrap(), "--store", "/no/such/dir"]);
    assert_eq!(code(&o), 1);

    // a restarted server sees the stored session
    let server = Server::start(&config);
    let resp = http.get(format!("{}/sessions/{sid}", server.base)).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["themes"].as_array().unwrap().len(), 1);
    server.stop();
}

#[test]
fn serve_rejects_bad_configs_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[llm]\nprovider = \"mock\"\ntemperature = 5.0\n", "llm.temperature"),
        ("[llm]\nprovider = \"remote\"\napi_key_env = \"K\"\n", "llm.model_name"),
        ("[llm]\nprovider = \"mock\"\ntimeout_ms = 0\n", "llm.timeout_ms"),
        ("[llm]\nprovider = \"mock\"\nbogus = 1\n", "bogus"),
        ("[llm]\nprovider = \"psychic\"\n", "psychic"),
        ("[server]\nstorage_dir = \"/no/such/parent/data\"\n[llm]\nprovider = \"mock\"\n", "server.storage_dir"),
    ];
    for (body, needle) in cases {
        let config = write_raw_config(dir.path(), body);
        let o = run(&["serve", "--config", config.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{body}");
        assert!(stderr(&o).contains(needle), "{body}: {}", stderr(&o));
    }
    let o = run(&["serve", "--config", "/no/such/config.toml"]);
    assert_eq!(code(&o), 1);
}
