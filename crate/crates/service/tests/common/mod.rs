#![allow(dead_code)]

pub mod golden;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use synroute_core::corpus::{FixtureCorpus, FullTextCache};
use synroute_core::extraction::ScriptedLlm;
use synroute_service::api::router;
use synroute_service::app::{AppState, Providers, Settings, SharedState};
use synroute_service::store::WorkspaceStore;
use tempfile::TempDir;
use tower::ServiceExt;

pub const FMOC_VAL_OSU: &str = "CC(C)C(NC(=O)OCC1c2ccccc2-c2ccccc21)C(=O)ON1C(=O)CCC1=O";
pub const FMOC_VAL_NHBN: &str = "CC(C)C(NC(=O)OCC1c2ccccc2-c2ccccc21)C(=O)NCc1ccccc1";
pub const SALICYLIC_ACID: &str = "O=C(O)c1ccccc1O";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures")).join(name)
}

/// An offline service over a fresh temporary data directory.
pub struct TestApp {
    pub dir: TempDir,
    pub state: SharedState,
    pub router: Router,
}

impl TestApp {
    pub fn new() -> TestApp {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Arc::new(FixtureCorpus::load(&fixture("corpus.jsonl")).unwrap());
        let llm = ScriptedLlm::load(&fixture("llm_script.json")).unwrap();
        let state = Arc::new(AppState::new(
            WorkspaceStore::open(dir.path().join("workspaces")).unwrap(),
            Providers::offline(corpus, llm),
            FullTextCache::new(dir.path().join("fulltext")).unwrap(),
            Settings::default(),
        ));
        let router = router(state.clone(), None);
        TestApp { dir, state, router }
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    pub async fn put(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::PUT, uri, Some(body)).await
    }

    pub async fn delete(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::DELETE, uri, None).await
    }

    /// Polls a job until it leaves the queued and running states.
    pub async fn wait_job(&self, id: &str) -> Value {
        for _ in 0..2000 {
            let (status, job) = self.get(&format!("/jobs/{id}")).await;
            assert_eq!(status, StatusCode::OK, "{job}");
            if !matches!(job["state"].as_str(), Some("queued" | "running")) {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("job {id} did not finish");
    }

    /// Creates a workspace and waits for its literature search.
    pub async fn workspace(&self, smiles: &str, expected: &[&str]) -> String {
        let (status, body) = self
            .post(
                "/workspaces",
                serde_json::json!({ "starting_smiles": smiles, "expected_reactions": expected }),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        let job = self.wait_job(body["search_job"]["id"].as_str().unwrap()).await;
        assert_eq!(job["state"], "done", "{job}");
        body["id"].as_str().unwrap().to_string()
    }

    /// Runs an extraction job to completion and returns the job snapshot.
    pub async fn extract(&self, ws: &str, paper: &str, expected: &str, reactant: Option<&str>) -> Value {
        let mut body = serde_json::json!({ "paper_id": paper, "expected_reaction": expected });
        if let Some(r) = reactant {
            body["reactant"] = Value::from(r);
        }
        let (status, job) = self.post(&format!("/workspaces/{ws}/extractions"), body).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{job}");
        self.wait_job(job["id"].as_str().unwrap()).await
    }

    pub fn workspace_file(&self, ws: &str) -> PathBuf {
        self.state.store.path(ws)
    }

    pub fn checksum(&self, ws: &str) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(std::fs::read(self.workspace_file(ws)).unwrap()))
    }
}

/// Builds a workspace touching every persisted field through the API.
pub async fn populated(app: &TestApp) -> String {
    let ws = app.workspace(FMOC_VAL_OSU, &["amidation", "Fmoc deprotection"]).await;
    let (status, _) = app.get(&format!("/workspaces/{ws}/projection?perplexity=15")).await;
    assert_eq!(status, StatusCode::OK);
    let ex = app.extract(&ws, "P001", "amidation", None).await;
    let nodes = format!("/workspaces/{ws}/tree/nodes");
    let (status, _) = app
        .post(
            &nodes,
            serde_json::json!({ "parent": 0, "extraction_id": ex["result"]["id"], "difficulty": { "material": 2, "operation": 2, "equipment": 1 } }),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = app
        .post(
            &nodes,
            serde_json::json!({ "parent": 1, "record": record(FMOC_VAL_NHBN, "CC(C)C(N)C(=O)NCc1ccccc1", 0.95, 0.5) }),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    app.post(
        &format!("/workspaces/{ws}/comparison"),
        serde_json::json!({ "node_id": 2 }),
    )
    .await;
    app.put(
        &format!("/workspaces/{ws}/weights"),
        serde_json::json!({ "steps": 0.1, "duration": 0.3, "yield": 0.6 }),
    )
    .await;
    ws
}

/// Adds `count` alternative first steps under the root.
pub async fn fan(app: &TestApp, ws: &str, count: usize) -> Vec<u64> {
    let products = ["CCN", "CCCN", "CCCCN", "CC(C)N", "CCOC", "CCCl", "CCBr"];
    let mut ids = Vec::new();
    for (i, product) in products.iter().take(count).enumerate() {
        let (status, node) = app
            .post(
                &format!("/workspaces/{ws}/tree/nodes"),
                serde_json::json!({ "parent": 0, "record": record(FMOC_VAL_OSU, product, 0.5 + 0.05 * i as f64, 1.0 + i as f64) }),
            )
            .await;
        assert_eq!(status, axum::http::StatusCode::CREATED, "{node}");
        ids.push(node["node_id"].as_u64().unwrap());
    }
    ids
}

/// A reaction record body for `POST /tree/nodes`.
pub fn record(reactant: &str, product: &str, yield_fraction: f64, hours: f64) -> Value {
    serde_json::json!({
        "reactant": reactant,
        "product": product,
        "yield": yield_fraction,
        "duration": hours,
    })
}
