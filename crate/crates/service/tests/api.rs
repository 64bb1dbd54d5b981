mod common;

use axum::http::StatusCode;
use common::*;
use serde_json::{json, Value};

#[tokio::test(flavor = "multi_thread")]
async fn create_validates_smiles_and_allocates_distinct_ids() {
    let app = TestApp::new();
    let (status, a) = app.post("/workspaces", json!({ "starting_smiles": "CCO" })).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, b) = app.post("/workspaces", json!({ "starting_smiles": "CCO" })).await;
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["search_job"]["kind"], "search");

    let (status, err) = app.post("/workspaces", json!({ "starting_smiles": "C1CC" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "UnmatchedRing");
    assert!(err["message"].is_string());
    assert!(err.get("details").is_some());

    let (status, err) = app.post("/workspaces", json!({ "smiles": "CCO" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "InvalidBody");
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_resources_are_404() {
    let app = TestApp::new();
    assert_eq!(app.get("/workspaces/ws-000404").await.1["code"], "WorkspaceNotFound");
    assert_eq!(app.get("/jobs/job-999999").await.0, StatusCode::NOT_FOUND);
    let ws = app.workspace(FMOC_VAL_OSU, &[]).await;
    let (status, err) = app
        .post(
            &format!("/workspaces/{ws}/extractions"),
            json!({ "paper_id": "P999", "expected_reaction": "amidation" }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "PaperNotFound");
}

#[tokio::test(flavor = "multi_thread")]
async fn pending_search_blocks_papers_and_projection() {
    let app = TestApp::new();
    // Created without a search job, so the search stays pending.
    let ws = app.state.create_workspace("CCO", vec![]).unwrap();
    for uri in ["papers", "projection"] {
        let (status, err) = app.get(&format!("/workspaces/{}/{uri}", ws.id)).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(err["code"], "SearchPending");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn search_snapshot_is_capped_and_ranked() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &["amidation"]).await;
    let (status, body) = app.get(&format!("/workspaces/{ws}/papers")).await;
    assert_eq!(status, StatusCode::OK);
    let papers = body["papers"].as_array().unwrap();
    assert_eq!(papers.len(), 100);
    for (i, p) in papers.iter().enumerate() {
        assert_eq!(p["retrieval_rank"], i + 1);
        let r = p["relevance"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r));
    }
    assert_eq!(body["no_results"], false);

    let empty = app.workspace("CCCCCCCCCCCCCCCCCCCC", &[]).await;
    let (_, body) = app.get(&format!("/workspaces/{empty}/papers")).await;
    assert_eq!(body["no_results"], true);
    assert_eq!(body["papers"], json!([]));
}

#[tokio::test(flavor = "multi_thread")]
async fn projection_filters_caches_and_validates() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &["amidation"]).await;
    let (status, first) = app
        .get(&format!("/workspaces/{ws}/projection?perplexity=20&display_count=10"))
        .await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["total"], 100);
    assert_eq!(first["cached"], false);
    let points = first["points"].as_array().unwrap();
    assert_eq!(points.len(), 10);
    assert!(points.iter().all(|p| p["retrieval_rank"].as_u64().unwrap() <= 10));

    let (_, second) = app
        .get(&format!("/workspaces/{ws}/projection?perplexity=20&display_count=10"))
        .await;
    assert_eq!(second["cached"], true);
    assert_eq!(first["points"], second["points"]);

    let (_, all) = app.get(&format!("/workspaces/{ws}/projection?perplexity=20")).await;
    let all = all["points"].as_array().unwrap();
    assert_eq!(all.len(), 100);
    assert_eq!(&all[..0], &points[..0]);
    for p in points {
        assert!(all.contains(p));
    }
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            let d = ((a["x"].as_f64().unwrap() - b["x"].as_f64().unwrap()).powi(2)
                + (a["y"].as_f64().unwrap() - b["y"].as_f64().unwrap()).powi(2))
            .sqrt();
            assert!(d >= 4.0, "points closer than d_min: {d}");
        }
    }

    let (status, err) = app.get(&format!("/workspaces/{ws}/projection?perplexity=99")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "BadPerplexity");

    let small = app.workspace(SALICYLIC_ACID, &[]).await;
    let (status, err) = app.get(&format!("/workspaces/{small}/projection")).await;
    assert_eq!(status, StatusCode::OK, "{err}");
    let tiny = app.state.create_workspace("CCO", vec![]).unwrap();
    app.state.run_search(&tiny.id).unwrap();
    let (status, err) = app.get(&format!("/workspaces/{}/projection", tiny.id)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "TooFewPoints");
}

#[tokio::test(flavor = "multi_thread")]
async fn extraction_jobs_report_results_and_failures() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &["amidation"]).await;

    let done = app.extract(&ws, "P001", "amidation", None).await;
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(done["kind"], "extraction");
    let stored = &done["result"];
    assert_eq!(stored["id"], "ex-000001");
    assert_eq!(stored["result"]["status"], "found");
    assert_eq!(stored["result"]["parsed_yield"], 0.82);
    assert_eq!(stored["result"]["parsed_duration"]["hours"], 3.0);

    let missing = app.extract(&ws, "P005", "amidation", None).await;
    assert_eq!(missing["state"], "failed");
    assert_eq!(missing["error"]["code"], "FullTextUnavailable");

    let no_text = app.extract(&ws, "P004", "amidation", None).await;
    assert_eq!(no_text["state"], "failed");
    assert_eq!(no_text["error"]["code"], "ExtractionFailed");

    let not_found = app.extract(&ws, "P002", "hydrogenation", None).await;
    assert_eq!(not_found["state"], "done");
    assert_eq!(not_found["result"]["result"]["status"], "not_found");

    let (_, relevancy) = app.get(&format!("/workspaces/{ws}/relevancy")).await;
    assert_eq!(relevancy["count"], 1);
    let mean = relevancy["stats"]["mean"].as_f64().unwrap();
    assert_eq!(mean, stored["result"]["context_relevancy"].as_f64().unwrap());
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_extractions_on_different_papers_complete() {
    let app = TestApp::new();
    let ws = app.workspace(SALICYLIC_ACID, &["acetylation"]).await;
    let start = |paper: &'static str, expected: &'static str, reactant: &'static str| {
        let body = json!({ "paper_id": paper, "expected_reaction": expected, "reactant": reactant });
        let uri = format!("/workspaces/{ws}/extractions");
        let app = &app;
        async move { app.post(&uri, body).await }
    };
    let (a, b) = tokio::join!(
        start("P001", "amidation", FMOC_VAL_OSU),
        start("P002", "acetylation", SALICYLIC_ACID)
    );
    assert_eq!(a.0, StatusCode::ACCEPTED);
    assert_eq!(b.0, StatusCode::ACCEPTED);
    let (a, b) = tokio::join!(
        app.wait_job(a.1["id"].as_str().unwrap()),
        app.wait_job(b.1["id"].as_str().unwrap())
    );
    assert_eq!(a["state"], "done", "{a}");
    assert_eq!(b["state"], "done", "{b}");
    let (_, ws_body) = app.get(&format!("/workspaces/{ws}")).await;
    let extractions = ws_body["extractions"].as_object().unwrap();
    assert_eq!(extractions.len(), 2);
    let papers: Vec<&str> = extractions.values().map(|e| e["paper_id"].as_str().unwrap()).collect();
    assert!(papers.contains(&"P001") && papers.contains(&"P002"));
}

#[tokio::test(flavor = "multi_thread")]
async fn fulltext_jobs_fetch_through_the_cache() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &[]).await;
    let (status, job) = app
        .post(&format!("/workspaces/{ws}/papers/P001/fulltext"), json!(null))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let job = app.wait_job(job["id"].as_str().unwrap()).await;
    assert_eq!(job["kind"], "fulltext");
    assert_eq!(job["state"], "done");
    assert!(job["result"]["characters"].as_u64().unwrap() > 100);
    let cached = std::fs::read_dir(app.dir.path().join("fulltext")).unwrap().count();
    assert_eq!(cached, 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn tree_mutations_follow_route_rules() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &["amidation", "Fmoc deprotection"]).await;
    let ex = app.extract(&ws, "P001", "amidation", None).await;
    let ex_id = ex["result"]["id"].as_str().unwrap();
    let nodes = format!("/workspaces/{ws}/tree/nodes");

    let difficulty = json!({ "material": 3, "operation": 2, "equipment": 3 });
    let (status, node) = app
        .post(
            &nodes,
            json!({ "parent": 0, "extraction_id": ex_id, "difficulty": difficulty }),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{node}");
    let first = node["node_id"].as_u64().unwrap();
    assert_eq!(node["node"]["total_yield"], 0.82);
    assert_eq!(node["node"]["reaction"]["source_doi"], "10.5555/synroute.0001");

    let dep = app.extract(&ws, "P001", "Fmoc deprotection", Some(FMOC_VAL_NHBN)).await;
    let (status, child) = app
        .post(&nodes, json!({ "parent": first, "extraction_id": dep["result"]["id"] }))
        .await;
    assert_eq!(status, StatusCode::CREATED, "{child}");
    let total = child["node"]["total_yield"].as_f64().unwrap();
    assert!((total - 0.82 * 0.95).abs() < 1e-12);
    assert_eq!(child["node"]["total_duration"], 3.5);

    // Reactant of the record does not match the parent's product.
    let before = app.checksum(&ws);
    let (status, err) = app
        .post(
            &nodes,
            json!({ "parent": 0, "record": record(SALICYLIC_ACID, "CC(=O)Oc1ccccc1C(=O)O", 0.9, 1.0) }),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "ReactantMismatch");
    assert_eq!(app.checksum(&ws), before);
    let (status, forced) = app
        .post(
            &nodes,
            json!({ "parent": 0, "allow_mismatch": true, "record": record(SALICYLIC_ACID, "CC(=O)Oc1ccccc1C(=O)O", 0.9, 1.0) }),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(forced["node"]["chain_override"], true);

    let (status, err) = app
        .post(
            &nodes,
            json!({ "parent": 77, "record": record(FMOC_VAL_OSU, "C", 0.5, 1.0) }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "ParentNotFound");

    let (status, node) = app
        .post(
            &format!("{nodes}/{first}/difficulty"),
            json!({ "material": 1, "operation": 1, "equipment": 2, "note": "cold room" }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{node}");
    assert_eq!(node["node"]["reaction"]["difficulty"]["material"], 1);
    let (status, err) = app
        .post(
            &format!("{nodes}/{first}/difficulty"),
            json!({ "material": 4, "operation": 1, "equipment": 1 }),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
    let (status, err) = app
        .post(
            &format!("{nodes}/0/difficulty"),
            json!({ "material": 1, "operation": 1, "equipment": 1 }),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "RootHasNoProduct");

    let (_, ws_body) = app.get(&format!("/workspaces/{ws}")).await;
    assert_eq!(ws_body["annotation_history"].as_array().unwrap().len(), 2);
    let op = ws_body["annotation_history"][0]["operation"]
        .as_str()
        .unwrap()
        .to_string();
    let (_, rec) = app
        .get(&format!(
            "/workspaces/{ws}/recommendation?operation={}",
            op.replace(' ', "%20")
        ))
        .await;
    assert_eq!(rec["recommendation"]["source"], 0);

    let (_, marks) = app.get(&format!("{nodes}/{first}/similarity")).await;
    assert_eq!(marks["marks"][first.to_string()], 1.0);

    let (status, err) = app.delete(&format!("{nodes}/0")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "CannotRemoveRoot");
    let (status, removed) = app.delete(&format!("{nodes}/{first}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(removed["removed"], 2);
    let (status, _) = app.delete(&format!("{nodes}/{first}")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn comparison_set_holds_at_most_five() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &[]).await;
    let ids = fan(&app, &ws, 6).await;
    let uri = format!("/workspaces/{ws}/comparison");
    for id in &ids[..5] {
        let (status, body) = app.post(&uri, json!({ "node_id": id })).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let (_, again) = app.post(&uri, json!({ "node_id": ids[0] })).await;
    assert_eq!(again["comparison_set"].as_array().unwrap().len(), 5);
    let before = app.checksum(&ws);
    let (status, err) = app.post(&uri, json!({ "node_id": ids[5] })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "ComparisonFull");
    assert_eq!(app.checksum(&ws), before);

    let (_, matrix) = app.post(&uri, json!({ "node_id": ids[4] })).await;
    assert_eq!(matrix["matrix"]["cells"].as_array().unwrap().len(), 5);
    assert_eq!(matrix["matrix"]["sequence_leaves"].as_array().unwrap().len(), 6);

    let (status, after) = app.delete(&format!("{uri}/{}", ids[0])).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["comparison_set"].as_array().unwrap().len(), 4);
    let (status, _) = app.post(&uri, json!({ "node_id": ids[5] })).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = app.delete(&format!("{uri}/{}", ids[0])).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

fn order(rankings: &Value) -> Vec<u64> {
    rankings["rankings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["leaf"].as_u64().unwrap())
        .collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn weights_validate_and_reorder_rankings() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &[]).await;
    // Node a: high yield but slow. Node b: fast but low yield.
    let nodes = format!("/workspaces/{ws}/tree/nodes");
    let (_, a) = app
        .post(
            &nodes,
            json!({ "parent": 0, "record": record(FMOC_VAL_OSU, "CCN", 0.9, 20.0) }),
        )
        .await;
    let (_, b) = app
        .post(
            &nodes,
            json!({ "parent": 0, "record": record(FMOC_VAL_OSU, "CCCN", 0.3, 1.0) }),
        )
        .await;
    let (a, b) = (a["node_id"].as_u64().unwrap(), b["node_id"].as_u64().unwrap());

    let uri = format!("/workspaces/{ws}/weights");
    let (status, yield_heavy) = app
        .put(&uri, json!({ "steps": 0.1, "duration": 0.3, "yield": 0.6 }))
        .await;
    assert_eq!(status, StatusCode::OK, "{yield_heavy}");
    assert_eq!(order(&yield_heavy), vec![a, b]);
    let (_, fetched) = app.get(&format!("/workspaces/{ws}/rankings")).await;
    assert_eq!(fetched, yield_heavy);
    assert_eq!(fetched["rankings"][0]["path"], json!([0, a]));

    let (_, time_heavy) = app
        .put(&uri, json!({ "steps": 0.1, "duration": 0.6, "yield": 0.3 }))
        .await;
    assert_eq!(order(&time_heavy), vec![b, a]);

    let before = app.checksum(&ws);
    let (status, err) = app
        .put(&uri, json!({ "steps": 0.5, "duration": 0.6, "yield": 0.2 }))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "InvalidWeights");
    let (status, _) = app
        .put(&uri, json!({ "steps": -0.1, "duration": 0.5, "yield": 0.6 }))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(app.checksum(&ws), before);
}

#[tokio::test(flavor = "multi_thread")]
async fn manual_edits_reparse_measurements() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &[]).await;
    let ex = app.extract(&ws, "P001", "amidation", None).await;
    let uri = format!("/workspaces/{ws}/extractions/{}", ex["result"]["id"].as_str().unwrap());
    let (status, edited) = app
        .call(
            axum::http::Method::PATCH,
            &uri,
            Some(json!({ "yield": "64%", "duration": "2-4 h" })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{edited}");
    assert_eq!(edited["extraction"]["edited"], true);
    assert_eq!(edited["extraction"]["result"]["parsed_yield"], 0.64);
    assert_eq!(edited["extraction"]["result"]["parsed_duration"]["hours"], 3.0);

    let before = app.checksum(&ws);
    let (status, err) = app
        .call(axum::http::Method::PATCH, &uri, Some(json!({ "colour": "blue" })))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "UnknownField");
    assert_eq!(app.checksum(&ws), before);
    let (status, _) = app.get(&format!("/workspaces/{ws}/extractions/ex-000099")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn queued_and_finished_jobs_handle_cancel() {
    let app = TestApp::new();
    let ws = app.workspace(FMOC_VAL_OSU, &[]).await;
    let done = app.extract(&ws, "P001", "amidation", None).await;
    let id = done["id"].as_str().unwrap();
    let (status, after) = app.post(&format!("/jobs/{id}/cancel"), json!(null)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, done);
}
