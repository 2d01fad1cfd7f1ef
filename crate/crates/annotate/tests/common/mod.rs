#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use conjnli_annotate::{router, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Harness {
    pub dir: tempfile::TempDir,
    pub app: Router,
}

impl Harness {
    pub fn new() -> Harness {
        let dir = tempfile::tempdir().unwrap();
        let app = router(Arc::new(Store::open(dir.path()).unwrap()), None);
        Harness { dir, app }
    }

    /// A fresh router over the same journal directory, as after a restart.
    pub fn restart(&mut self) {
        self.app = router(Arc::new(Store::open(self.dir.path()).unwrap()), None);
    }

    pub async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call("GET", uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call("POST", uri, Some(body)).await
    }

    pub fn journal_lines(&self, id: &str) -> usize {
        std::fs::read_to_string(self.dir.path().join(format!("{id}.jsonl"))).unwrap().lines().count()
    }

    pub async fn label(&self, id: &str, annotator: &str, pair: &str, verdict: &str) -> (StatusCode, Value) {
        self.post(
            &format!("/sessions/{id}/labels"),
            json!({"annotator": annotator, "pair_id": pair, "verdict": verdict}),
        )
        .await
    }
}

pub fn pairs(n: usize) -> Value {
    Value::Array(
        (0..n)
            .map(|i| json!({"id": format!("p{i}"), "premise": format!("A{i} and B{i} left."), "hypothesis": format!("A{i} left.")}))
            .collect(),
    )
}

pub async fn create(h: &Harness, id: &str, n: usize) {
    let (s, body) =
        h.post("/sessions", json!({"session_id": id, "annotators": ["ann", "bob"], "pairs": pairs(n)})).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
}

pub fn verdict(c: char) -> &'static str {
    match c {
        'E' => "entailment",
        'N' => "neutral",
        'C' => "contradiction",
        _ => "ungrammatical",
    }
}
