//! Walks every REST route the way a browser client would, against an
//! in-process server: narrative, two themes, three questions, keywords, two
//! comments, a summary and its regeneration.

use std::sync::Arc;
use std::time::Duration;

use reqwest::Method;
use serde_json::{json, Value};
use threadwise::api::{router, AppState};
use threadwise::engine::{Engine, EngineOptions};
use threadwise::store::InMemoryStore;
use threadwise_core::llm::gateway::{Gateway, ProviderConfig};

struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    async fn call(&self, method: Method, path: &str, body: Option<Value>) -> Value {
        let mut req = self.http.request(method.clone(), format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.expect("server is up");
        let status = resp.status();
        let text = resp.text().await.unwrap();
        println!("{status:>3} {method} {path}");
        assert!(status.is_success(), "{text}");
        serde_json::from_str(&text).unwrap_or(Value::Null)
    }
}

#[tokio::main]
async fn main() {
    let engine = Engine::new(
        Arc::new(InMemoryStore::new()),
        Gateway::from_config(ProviderConfig::mock(7)).unwrap(),
        EngineOptions::default(),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, router(AppState { engine, token: None })).await });
    let c = Client {
        http: reqwest::Client::new(),
        base,
    };

    let s = c
        .call(
            Method::POST,
            "/sessions",
            Some(json!({"narrative": "Since my promotion I barely see my kids. I tell myself it is temporary. It has been two years."})),
        )
        .await;
    let sid = s["id"].as_str().unwrap();
    let at = |p: &str| format!("/sessions/{sid}{p}");
    c.call(Method::POST, &at("/events"), Some(json!({"kind": "page_enter", "payload": {"page": "exploration"}})))
        .await;

    let sugg = c.call(Method::POST, &at("/themes/suggest"), Some(json!({"n": 3}))).await;
    c.call(Method::POST, &at("/themes/pin"), Some(json!({"suggestion": sugg["suggestions"][2]}))).await;
    let mut themes = Vec::new();
    for i in 0..2 {
        let t = c.call(Method::POST, &at("/themes"), Some(json!({"suggestion": sugg["suggestions"][i]}))).await;
        themes.push(t["id"].as_str().unwrap().to_owned());
    }

    let mut questions = Vec::new();
    for (tid, picks) in [(&themes[0], 2), (&themes[1], 1)] {
        let cands = c.call(Method::POST, &at(&format!("/themes/{tid}/questions/suggest")), None).await;
        for k in 0..picks {
            let q = c
                .call(Method::POST, &at(&format!("/themes/{tid}/questions")), Some(cands["candidates"][k].clone()))
                .await;
            questions.push(q["id"].as_str().unwrap().to_owned());
        }
    }

    // the auto comment arrives in the background; poll for it
    let q1 = &questions[0];
    loop {
        let q = c.call(Method::GET, &at(&format!("/questions/{q1}")), None).await;
        if let Some(first) = q["comments"].as_array().and_then(|a| a.first()) {
            println!("    auto comment: {}", first["text"]);
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }

    c.call(Method::PATCH, &at(&format!("/questions/{q1}/answer")), Some(json!({"text": "I missed the school play."})))
        .await;
    let kw = c.call(Method::POST, &at(&format!("/questions/{q1}/keywords")), Some(json!({"mode": "initial"}))).await;
    println!("    keywords: {}", kw["keywords"]);
    for _ in 0..2 {
        let cm = c.call(Method::POST, &at(&format!("/questions/{q1}/comments")), None).await;
        println!("    comment: {}", cm["text"]);
    }

    c.call(Method::POST, &at("/events"), Some(json!({"kind": "page_enter", "payload": {"page": "summary"}})))
        .await;
    let first = c.call(Method::POST, &at("/summary"), None).await;
    c.call(Method::PATCH, &at(&format!("/questions/{}/answer", questions[2])), Some(json!({"text": "Guilt, mostly."})))
        .await;
    let again = c.call(Method::POST, &at("/summary"), None).await;
    let latest = c.call(Method::GET, &at("/summary/latest"), None).await;
    println!("    summary v{} -> v{}", first["state_version"], again["state_version"]);
    assert_eq!(latest, again);

    c.call(Method::POST, &at("/survey"), Some(json!({"phase": "pre", "items": [4, 5, 4, 5]}))).await;
    let m = c.call(Method::GET, &at("/metrics"), None).await;
    println!("    metrics: {m}");
    let export = c.call(Method::GET, &at("/export"), None).await;
    println!("    export holds {} events", export["events"].as_array().unwrap().len());
    c.call(Method::GET, &at(""), None).await;
}
