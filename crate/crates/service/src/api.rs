use std::collections::BTreeMap;
use std::path::PathBuf;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use synroute_core::chem::parse_smiles;
use synroute_core::extraction::{recommend_difficulty, relevancy_stats, AnnotationRecord, Recommendation};
use synroute_core::projection::{ProjectedPoint, Projection, TsneParams};
use synroute_core::ranking::CriteriaWeights;
use synroute_core::route::{DifficultyAnnotation, NodeId, ReactionRecord, RouteNode};
use tower_http::services::ServeDir;

use crate::app::{AppState, SharedState};
use crate::error::ApiError;
use crate::jobs::{JobKind, JobSnapshot, JobState};
use crate::workspace::{RankedSequence, StoredExtraction, Workspace};

type ApiResult<T> = Result<T, ApiError>;

/// JSON body extractor whose rejections use the common error body.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct ApiQuery<T>(pub T);

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), "InvalidBody", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidQuery", r.body_text())
    }
}

/// Runs store and provider work off the async executor.
async fn blocking<T, F>(state: &SharedState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> ApiResult<T> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

pub fn router(state: SharedState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/workspaces", post(create_workspace))
        .route("/workspaces/{id}", get(get_workspace))
        .route("/workspaces/{id}/papers", get(get_papers))
        .route("/workspaces/{id}/papers/{pid}/fulltext", post(start_fulltext))
        .route("/workspaces/{id}/projection", get(get_projection))
        .route("/workspaces/{id}/extractions", post(start_extraction))
        .route(
            "/workspaces/{id}/extractions/{eid}",
            get(get_extraction).patch(edit_extraction),
        )
        .route("/workspaces/{id}/tree", get(get_tree))
        .route("/workspaces/{id}/tree/nodes", post(add_node))
        .route("/workspaces/{id}/tree/nodes/{nid}", delete(remove_node))
        .route("/workspaces/{id}/tree/nodes/{nid}/difficulty", post(set_difficulty))
        .route("/workspaces/{id}/tree/nodes/{nid}/similarity", get(get_similarity))
        .route("/workspaces/{id}/comparison", post(add_comparison))
        .route("/workspaces/{id}/comparison/{nid}", delete(remove_comparison))
        .route("/workspaces/{id}/rankings", get(get_rankings))
        .route("/workspaces/{id}/weights", put(put_weights))
        .route("/workspaces/{id}/relevancy", get(get_relevancy))
        .route("/workspaces/{id}/recommendation", get(get_recommendation))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/cancel", post(cancel_job))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateWorkspace {
    pub starting_smiles: String,
    #[serde(default)]
    pub expected_reactions: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Created {
    pub id: String,
    pub search_job: JobSnapshot,
}

async fn create_workspace(
    State(state): State<SharedState>,
    ApiJson(req): ApiJson<CreateWorkspace>,
) -> ApiResult<impl IntoResponse> {
    let ws = blocking(&state, move |s| {
        s.create_workspace(&req.starting_smiles, req.expected_reactions)
    })
    .await?;
    let id = ws.id.clone();
    let job = {
        let st = state.clone();
        let ws_id = id.clone();
        state
            .jobs
            .spawn(JobKind::Search, Some(id.clone()), move |_, _| st.run_search(&ws_id))
    };
    let job_id = job.id.clone();
    blocking(&state, {
        let id = id.clone();
        move |s| {
            s.store.mutate(&id, |w| {
                w.search.job_id = Some(job_id);
                Ok(())
            })
        }
    })
    .await?;
    Ok((StatusCode::CREATED, Json(Created { id, search_job: job })))
}

async fn get_workspace(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Workspace>> {
    Ok(Json(blocking(&state, move |s| s.store.load(&id)).await?))
}

#[derive(Debug, Serialize)]
struct PaperView {
    #[serde(flatten)]
    paper: synroute_core::corpus::PaperRecord,
    relevance: f64,
}

async fn get_papers(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ws = blocking(&state, move |s| s.store.load(&id)).await?;
    AppState::require_search_done(&ws)?;
    let papers: Vec<PaperView> = ws
        .papers
        .into_iter()
        .zip(ws.relevance)
        .map(|(paper, relevance)| PaperView { paper, relevance })
        .collect();
    Ok(Json(json!({ "no_results": ws.search.no_results, "papers": papers })))
}

#[derive(Debug, Deserialize)]
pub struct ProjectionQuery {
    pub perplexity: Option<f64>,
    pub display_count: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct ProjectionView {
    pub perplexity: f64,
    pub seed: u64,
    pub cached: bool,
    pub total: usize,
    pub overlap_converged: bool,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub points: Vec<ProjectedPoint>,
}

fn projection_view(p: Projection, cached: bool, display_count: Option<usize>) -> ProjectionView {
    let total = p.points.len();
    let limit = display_count.unwrap_or(total) as u32;
    ProjectionView {
        perplexity: p.perplexity,
        seed: p.seed,
        cached,
        total,
        overlap_converged: p.overlap_converged,
        initial_kl: p.initial_kl,
        final_kl: p.final_kl,
        points: p.points.into_iter().filter(|pt| pt.retrieval_rank <= limit).collect(),
    }
}

/// Serves a cached layout, or computes one as a cancelable projection job and
/// waits for it.
async fn get_projection(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<ProjectionQuery>,
) -> ApiResult<Json<ProjectionView>> {
    let ws = blocking(&state, {
        let id = id.clone();
        move |s| s.store.load(&id)
    })
    .await?;
    AppState::require_search_done(&ws)?;
    let perplexity = AppState::resolve_perplexity(&ws, q.perplexity);
    if let Some(p) = ws.cached_projection(perplexity, state.settings.seed) {
        return Ok(Json(projection_view(p.clone(), true, q.display_count)));
    }
    TsneParams::with_perplexity(perplexity, state.settings.seed).validate(ws.papers.len())?;

    let st = state.clone();
    let ws_id = id.clone();
    let job = state.jobs.spawn(JobKind::Projection, Some(id), move |_, cancel| {
        let (p, cached) = st.projection(&ws_id, perplexity, cancel)?;
        Ok(json!({ "projection": p, "cached": cached }))
    });
    let done = state
        .jobs
        .wait(&job.id)
        .await
        .ok_or_else(|| ApiError::internal("projection job vanished"))?;
    match done.state {
        JobState::Done => {
            let mut result = done.result.unwrap_or(Value::Null);
            let projection: Projection =
                serde_json::from_value(result["projection"].take()).map_err(|e| ApiError::internal(e.to_string()))?;
            let cached = result["cached"].as_bool().unwrap_or(false);
            Ok(Json(projection_view(projection, cached, q.display_count)))
        }
        JobState::Canceled => Err(ApiError::conflict("Canceled", "projection job canceled")),
        _ => {
            let body = done
                .error
                .unwrap_or_else(|| ApiError::internal("projection failed").body);
            Err(ApiError {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body,
            })
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartExtraction {
    pub paper_id: String,
    pub expected_reaction: String,
    /// Defaults to the workspace's starting molecule.
    pub reactant: Option<String>,
}

async fn start_extraction(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<StartExtraction>,
) -> ApiResult<impl IntoResponse> {
    let ws = blocking(&state, {
        let id = id.clone();
        move |s| s.store.load(&id)
    })
    .await?;
    AppState::require_search_done(&ws)?;
    if ws.paper(&req.paper_id).is_none() {
        return Err(ApiError::not_found("PaperNotFound", format!("paper {}", req.paper_id)));
    }
    if req.expected_reaction.trim().is_empty() {
        return Err(ApiError::unprocessable("MissingQuery", "expected_reaction is empty"));
    }
    let reactant = req.reactant.unwrap_or_else(|| ws.starting_smiles.clone());
    parse_smiles(&reactant)?;

    let st = state.clone();
    let ws_id = id.clone();
    let job = state.jobs.spawn(JobKind::Extraction, Some(id), move |job_id, cancel| {
        let stored = st.run_extraction(&ws_id, job_id, &req.paper_id, &reactant, &req.expected_reaction, cancel)?;
        serde_json::to_value(stored).map_err(|e| ApiError::internal(e.to_string()))
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn start_fulltext(
    State(state): State<SharedState>,
    Path((id, pid)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let ws = blocking(&state, {
        let id = id.clone();
        move |s| s.store.load(&id)
    })
    .await?;
    AppState::require_search_done(&ws)?;
    let paper = ws
        .paper(&pid)
        .cloned()
        .ok_or_else(|| ApiError::not_found("PaperNotFound", format!("paper {pid}")))?;
    let st = state.clone();
    let job = state.jobs.spawn(JobKind::Fulltext, Some(id), move |_, _| {
        let text = st.fulltext(&paper)?;
        Ok(json!({ "paper_id": paper.id, "characters": text.chars().count() }))
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

#[derive(Debug, Serialize)]
struct ExtractionView {
    extraction: StoredExtraction,
    recommendation: Option<Recommendation>,
}

fn extraction_view(state: &AppState, ws: &Workspace, extraction: StoredExtraction) -> ExtractionView {
    let recommendation = extraction
        .result
        .fields
        .operation
        .as_deref()
        .and_then(|op| recommend_difficulty(op, &ws.annotation_history, state.providers.embedding.as_ref()));
    ExtractionView {
        extraction,
        recommendation,
    }
}

fn find_extraction(ws: &Workspace, eid: &str) -> ApiResult<StoredExtraction> {
    ws.extractions
        .get(eid)
        .cloned()
        .ok_or_else(|| ApiError::not_found("ExtractionNotFound", format!("extraction {eid}")))
}

async fn get_extraction(
    State(state): State<SharedState>,
    Path((id, eid)): Path<(String, String)>,
) -> ApiResult<Json<ExtractionView>> {
    let view = blocking(&state, move |s| {
        let ws = s.store.load(&id)?;
        let extraction = find_extraction(&ws, &eid)?;
        Ok(extraction_view(s, &ws, extraction))
    })
    .await?;
    Ok(Json(view))
}

/// Manual corrections: a map from field name to a new value or null.
async fn edit_extraction(
    State(state): State<SharedState>,
    Path((id, eid)): Path<(String, String)>,
    ApiJson(edits): ApiJson<BTreeMap<String, Option<String>>>,
) -> ApiResult<Json<ExtractionView>> {
    let view = blocking(&state, move |s| {
        s.store.mutate(&id, |w| {
            let entry = w
                .extractions
                .get_mut(&eid)
                .ok_or_else(|| ApiError::not_found("ExtractionNotFound", format!("extraction {eid}")))?;
            for (key, value) in edits {
                if !entry.result.fields.set(&key, value) {
                    return Err(ApiError::unprocessable("UnknownField", format!("unknown field {key}"))
                        .with_details(json!({ "field": key })));
                }
            }
            entry.result.reparse();
            entry.edited = true;
            Ok(())
        })?;
        let ws = s.store.load(&id)?;
        let extraction = find_extraction(&ws, &eid)?;
        Ok(extraction_view(s, &ws, extraction))
    })
    .await?;
    Ok(Json(view))
}

async fn get_tree(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ws = blocking(&state, move |s| s.store.load(&id)).await?;
    Ok(Json(json!({
        "tree": ws.tree,
        "sequences": ws.tree.decision_sequences(),
        "comparison": ws.tree.comparison_matrix(),
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddNode {
    pub parent: NodeId,
    pub extraction_id: Option<String>,
    pub record: Option<ReactionRecord>,
    pub difficulty: Option<DifficultyAnnotation>,
    #[serde(default)]
    pub allow_mismatch: bool,
}

#[derive(Debug, Serialize)]
struct NodeView {
    node_id: NodeId,
    node: RouteNode,
}

fn node_view(ws: &Workspace, id: NodeId) -> ApiResult<NodeView> {
    let node = ws
        .tree
        .node(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("NodeNotFound", format!("node {id}")))?;
    Ok(NodeView { node_id: id, node })
}

fn remember_annotation(ws: &mut Workspace, node: NodeId, annotation: &DifficultyAnnotation) {
    let operation = ws
        .tree
        .node(node)
        .and_then(|n| n.reaction.as_ref())
        .map(|r| r.operation.clone())
        .unwrap_or_default();
    if !operation.trim().is_empty() {
        ws.annotation_history.push(AnnotationRecord {
            operation,
            annotation: annotation.clone(),
        });
    }
}

async fn add_node(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<AddNode>,
) -> ApiResult<impl IntoResponse> {
    let view = blocking(&state, move |s| {
        s.store.mutate(&id, |w| {
            let mut record = match (&req.extraction_id, req.record) {
                (Some(eid), None) => {
                    let stored = find_extraction(w, eid)?;
                    let preferred = w
                        .tree
                        .outgoing_molecule(req.parent)
                        .ok_or(synroute_core::route::RouteError::ParentNotFound(req.parent))?
                        .clone();
                    let doi = w.paper(&stored.paper_id).and_then(|p| p.doi.clone());
                    stored.result.to_record(Some(&preferred), doi)?
                }
                (None, Some(record)) => record,
                _ => {
                    return Err(ApiError::unprocessable(
                        "InvalidBody",
                        "give exactly one of extraction_id and record",
                    ))
                }
            };
            record.difficulty = req.difficulty.clone();
            let node = w.tree.add_reaction(req.parent, record, req.allow_mismatch)?;
            if let Some(d) = &req.difficulty {
                remember_annotation(w, node, d);
            }
            node_view(w, node)
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn remove_node(State(state): State<SharedState>, Path((id, nid)): Path<(String, u64)>) -> ApiResult<Json<Value>> {
    let removed = blocking(&state, move |s| {
        s.store.mutate(&id, |w| Ok(w.tree.remove_subtree(NodeId(nid))?))
    })
    .await?;
    Ok(Json(json!({ "removed": removed })))
}

async fn set_difficulty(
    State(state): State<SharedState>,
    Path((id, nid)): Path<(String, u64)>,
    ApiJson(annotation): ApiJson<DifficultyAnnotation>,
) -> ApiResult<Json<NodeView>> {
    let view = blocking(&state, move |s| {
        s.store.mutate(&id, |w| {
            let node = NodeId(nid);
            w.tree.set_difficulty(node, annotation.clone())?;
            remember_annotation(w, node, &annotation);
            node_view(w, node)
        })
    })
    .await?;
    Ok(Json(view))
}

async fn get_similarity(
    State(state): State<SharedState>,
    Path((id, nid)): Path<(String, u64)>,
) -> ApiResult<Json<Value>> {
    let ws = blocking(&state, move |s| s.store.load(&id)).await?;
    let marks = ws.tree.similarity_marks(NodeId(nid))?;
    Ok(Json(json!({ "selected": nid, "marks": marks })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRequest {
    pub node_id: NodeId,
}

fn comparison_view(ws: &Workspace) -> Value {
    json!({
        "comparison_set": ws.tree.comparison_set(),
        "matrix": ws.tree.comparison_matrix(),
    })
}

async fn add_comparison(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<ComparisonRequest>,
) -> ApiResult<Json<Value>> {
    let view = blocking(&state, move |s| {
        s.store.mutate(&id, |w| {
            w.tree.add_to_comparison(req.node_id)?;
            Ok(comparison_view(w))
        })
    })
    .await?;
    Ok(Json(view))
}

async fn remove_comparison(
    State(state): State<SharedState>,
    Path((id, nid)): Path<(String, u64)>,
) -> ApiResult<Json<Value>> {
    let view = blocking(&state, move |s| {
        s.store.mutate(&id, |w| {
            if !w.tree.remove_from_comparison(NodeId(nid)) {
                return Err(ApiError::not_found("NodeNotFound", format!("comparison node {nid}")));
            }
            Ok(comparison_view(w))
        })
    })
    .await?;
    Ok(Json(view))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RankingsView {
    pub weights: CriteriaWeights,
    pub rankings: Vec<RankedSequence>,
}

async fn get_rankings(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<RankingsView>> {
    let ws = blocking(&state, move |s| s.store.load(&id)).await?;
    Ok(Json(RankingsView {
        weights: ws.weights,
        rankings: ws.rankings(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsRequest {
    pub steps: f64,
    pub duration: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

async fn put_weights(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<WeightsRequest>,
) -> ApiResult<Json<RankingsView>> {
    let weights = CriteriaWeights::new(req.steps, req.duration, req.yield_)?;
    let view = blocking(&state, move |s| {
        s.store.mutate(&id, |w| {
            w.weights = weights;
            Ok(RankingsView {
                weights,
                rankings: w.rankings(),
            })
        })
    })
    .await?;
    Ok(Json(view))
}

async fn get_relevancy(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ws = blocking(&state, move |s| s.store.load(&id)).await?;
    let stats = if ws.relevancy_history.is_empty() {
        None
    } else {
        Some(relevancy_stats(&ws.relevancy_history)?)
    };
    Ok(Json(json!({ "count": ws.relevancy_history.len(), "stats": stats })))
}

#[derive(Debug, Deserialize)]
pub struct RecommendationQuery {
    pub operation: String,
}

async fn get_recommendation(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<RecommendationQuery>,
) -> ApiResult<Json<Value>> {
    let rec = blocking(&state, move |s| {
        let ws = s.store.load(&id)?;
        Ok(recommend_difficulty(
            &q.operation,
            &ws.annotation_history,
            s.providers.embedding.as_ref(),
        ))
    })
    .await?;
    Ok(Json(json!({ "recommendation": rec })))
}

fn job_not_found(id: &str) -> ApiError {
    ApiError::not_found("JobNotFound", format!("job {id}"))
}

async fn get_job(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<JobSnapshot>> {
    state.jobs.get(&id).map(Json).ok_or_else(|| job_not_found(&id))
}

async fn cancel_job(State(state): State<SharedState>, Path(id): Path<String>) -> ApiResult<Json<JobSnapshot>> {
    state.jobs.cancel(&id).map(Json).ok_or_else(|| job_not_found(&id))
}
