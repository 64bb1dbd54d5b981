//! A fixed API session against the offline providers, compared response by
//! response with the recorded files in `tests/golden`.

use std::path::PathBuf;

use axum::http::Method;
use serde_json::{json, Value};

use super::*;

const FLOAT_TOLERANCE: f64 = 1e-9;

fn golden_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden"))
}

/// Structural equality with a relative tolerance on numbers.
fn diff(expected: &Value, actual: &Value, path: &str, out: &mut Vec<String>) {
    match (expected, actual) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            if (a - b).abs() > FLOAT_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
                out.push(format!("{path}: expected {a}, got {b}"));
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                out.push(format!("{path}: expected {} items, got {}", a.len(), b.len()));
                return;
            }
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                diff(x, y, &format!("{path}[{i}]"), out);
            }
        }
        (Value::Object(a), Value::Object(b)) => {
            for key in a.keys().chain(b.keys().filter(|k| !a.contains_key(*k))) {
                match (a.get(key), b.get(key)) {
                    (Some(x), Some(y)) => diff(x, y, &format!("{path}.{key}"), out),
                    (Some(_), None) => out.push(format!("{path}.{key}: missing")),
                    (None, _) => out.push(format!("{path}.{key}: unexpected")),
                }
            }
        }
        (a, b) if a != b => out.push(format!("{path}: expected {a}, got {b}")),
        _ => {}
    }
}

struct Session {
    app: TestApp,
    update: bool,
    failures: Vec<String>,
    seen: Vec<String>,
}

impl Session {
    async fn step(&mut self, name: &str, method: Method, uri: &str, body: Option<Value>) -> Value {
        let (status, response) = self.app.call(method.clone(), uri, body.clone()).await;
        let record = json!({
            "request": { "method": method.as_str(), "uri": uri, "body": body },
            "status": status.as_u16(),
            "response": response,
        });
        let path = golden_dir().join(format!("{name}.json"));
        self.seen.push(format!("{name}.json"));
        if self.update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, serde_json::to_string_pretty(&record).unwrap() + "\n").unwrap();
        } else {
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    let expected: Value = serde_json::from_str(&text).unwrap();
                    let mut out = Vec::new();
                    diff(&expected, &record, name, &mut out);
                    self.failures.extend(out.into_iter().take(10));
                }
                Err(_) => self
                    .failures
                    .push(format!("{name}: no golden file at {}", path.display())),
            }
        }
        record["response"].clone()
    }

    async fn settle(&self, job: &Value) {
        self.app.wait_job(job["id"].as_str().unwrap()).await;
    }
}

pub struct Outcome {
    pub steps: usize,
    pub failures: Vec<String>,
    /// Golden files that no step produced.
    pub stale: Vec<String>,
}

pub async fn run_session(update: bool) -> Outcome {
    let mut s = Session {
        app: TestApp::new(),
        update,
        failures: Vec::new(),
        seen: Vec::new(),
    };
    let created = s
        .step(
            "01_create_workspace",
            Method::POST,
            "/workspaces",
            Some(json!({ "starting_smiles": FMOC_VAL_OSU, "expected_reactions": ["amidation", "Fmoc deprotection"] })),
        )
        .await;
    s.settle(&created["search_job"]).await;
    let ws = format!("/workspaces/{}", created["id"].as_str().unwrap());
    s.step(
        "02_create_bad_smiles",
        Method::POST,
        "/workspaces",
        Some(json!({ "starting_smiles": "C1CC" })),
    )
    .await;
    s.step("03_search_job", Method::GET, "/jobs/job-000001", None).await;
    s.step("04_papers", Method::GET, &format!("{ws}/papers"), None).await;
    s.step(
        "05_projection",
        Method::GET,
        &format!("{ws}/projection?perplexity=10&display_count=15"),
        None,
    )
    .await;
    s.step(
        "06_projection_cached",
        Method::GET,
        &format!("{ws}/projection?perplexity=10&display_count=15"),
        None,
    )
    .await;
    s.step(
        "07_projection_bad_perplexity",
        Method::GET,
        &format!("{ws}/projection?perplexity=100"),
        None,
    )
    .await;

    let extractions = format!("{ws}/extractions");
    let job = s
        .step(
            "08_start_extraction",
            Method::POST,
            &extractions,
            Some(json!({ "paper_id": "P001", "expected_reaction": "amidation" })),
        )
        .await;
    s.settle(&job).await;
    s.step(
        "09_extraction_job",
        Method::GET,
        &format!("/jobs/{}", job["id"].as_str().unwrap()),
        None,
    )
    .await;
    let job = s
        .step(
            "10_start_extraction_no_fulltext",
            Method::POST,
            &extractions,
            Some(json!({ "paper_id": "P005", "expected_reaction": "amidation" })),
        )
        .await;
    s.settle(&job).await;
    s.step(
        "11_extraction_job_failed",
        Method::GET,
        &format!("/jobs/{}", job["id"].as_str().unwrap()),
        None,
    )
    .await;
    s.step(
        "12_extraction_unknown_paper",
        Method::POST,
        &extractions,
        Some(json!({ "paper_id": "P404", "expected_reaction": "amidation" })),
    )
    .await;
    s.step(
        "13_get_extraction",
        Method::GET,
        &format!("{extractions}/ex-000001"),
        None,
    )
    .await;

    let nodes = format!("{ws}/tree/nodes");
    s.step(
        "14_add_node_from_extraction",
        Method::POST,
        &nodes,
        Some(json!({ "parent": 0, "extraction_id": "ex-000001", "difficulty": { "material": 3, "operation": 2, "equipment": 3 } })),
    )
    .await;
    let job = s
        .step(
            "15_start_deprotection",
            Method::POST,
            &extractions,
            Some(json!({ "paper_id": "P001", "expected_reaction": "Fmoc deprotection", "reactant": FMOC_VAL_NHBN })),
        )
        .await;
    s.settle(&job).await;
    s.step(
        "16_add_child",
        Method::POST,
        &nodes,
        Some(json!({ "parent": 1, "extraction_id": "ex-000002" })),
    )
    .await;
    s.step(
        "17_add_mismatch",
        Method::POST,
        &nodes,
        Some(json!({ "parent": 0, "record": record(SALICYLIC_ACID, "CC(=O)Oc1ccccc1C(=O)O", 0.91, 0.5) })),
    )
    .await;
    s.step(
        "18_add_alternative",
        Method::POST,
        &nodes,
        Some(json!({ "parent": 0, "record": record(FMOC_VAL_OSU, "CC(C)C(NC(=O)OCC1c2ccccc2-c2ccccc21)C(=O)N", 0.6, 1.0) })),
    )
    .await;
    s.step(
        "19_set_difficulty",
        Method::POST,
        &format!("{nodes}/3/difficulty"),
        Some(json!({ "material": 2, "operation": 3, "equipment": 3, "note": "bench top" })),
    )
    .await;
    s.step("20_similarity", Method::GET, &format!("{nodes}/1/similarity"), None)
        .await;
    s.step("21_tree", Method::GET, &format!("{ws}/tree"), None).await;
    s.step(
        "22_add_comparison",
        Method::POST,
        &format!("{ws}/comparison"),
        Some(json!({ "node_id": 2 })),
    )
    .await;
    s.step("23_rankings_default", Method::GET, &format!("{ws}/rankings"), None)
        .await;
    s.step(
        "24_put_weights",
        Method::PUT,
        &format!("{ws}/weights"),
        Some(json!({ "steps": 0.1, "duration": 0.3, "yield": 0.6 })),
    )
    .await;
    s.step(
        "25_put_weights_invalid",
        Method::PUT,
        &format!("{ws}/weights"),
        Some(json!({ "steps": 0.5, "duration": 0.6, "yield": 0.2 })),
    )
    .await;
    s.step("26_rankings", Method::GET, &format!("{ws}/rankings"), None)
        .await;
    s.step("27_relevancy", Method::GET, &format!("{ws}/relevancy"), None)
        .await;
    s.step(
        "28_recommendation",
        Method::GET,
        &format!("{ws}/recommendation?operation=Stir%20at%20room%20temperature%2C%20aqueous%20workup%2C%20recrystallize%20from%20ethanol"),
        None,
    )
    .await;
    s.step("29_remove_root", Method::DELETE, &format!("{nodes}/0"), None)
        .await;
    s.step("30_remove_subtree", Method::DELETE, &format!("{nodes}/1"), None)
        .await;
    s.step("31_workspace", Method::GET, &ws, None).await;
    s.step("32_job_not_found", Method::GET, "/jobs/job-999999", None).await;

    let mut stale = Vec::new();
    if !s.update {
        stale = std::fs::read_dir(golden_dir())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| !s.seen.contains(n))
            .collect();
        stale.sort();
    }
    Outcome {
        steps: s.seen.len(),
        failures: s.failures,
        stale,
    }
}
