#![allow(dead_code)]

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

pub fn example_session() -> Value {
    json!({ "table_csv": read("example.csv"), "kb_text": read("example.xkb") })
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    send_raw(app, req).await
}

pub async fn send_raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

pub async fn create(app: &Router, body: Value) -> String {
    let (status, v) = send(app, "POST", "/api/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// The candidate with the given label.
pub fn candidate<'a>(proposal: &'a Value, label: &str) -> &'a Value {
    proposal["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["label"] == label)
        .unwrap_or_else(|| panic!("no candidate {label} in {proposal}"))
}

pub fn ids(rules: &Value) -> Vec<String> {
    let mut out: Vec<String> = rules.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap().to_string()).collect();
    out.sort();
    out
}

pub fn verdict<'a>(candidate: &'a Value, postulate: &str) -> &'a str {
    candidate["postulates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["postulate"] == postulate)
        .unwrap_or_else(|| panic!("no verdict for {postulate}"))["status"]
        .as_str()
        .unwrap()
}
