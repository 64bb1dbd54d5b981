use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use synroute_core::chem::{parse_smiles, SmilesError};
use synroute_core::corpus::PaperRecord;
use synroute_core::extraction::{AnnotationRecord, ExtractionResult};
use synroute_core::projection::Projection;
use synroute_core::ranking::{score, CriteriaWeights, RankEntry, SequenceCriteria};
use synroute_core::route::{NodeId, RouteTree};
use thiserror::Error;

use crate::error::ErrorBody;

/// Version written by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("workspace json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("workspace schema version {0} is newer than supported {SCHEMA_VERSION}")]
    UnsupportedVersion(u64),
    #[error("workspace file is not a JSON object")]
    NotAnObject,
    #[error("route tree: {0}")]
    InvalidTree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub status: SearchStatus,
    pub job_id: Option<String>,
    /// The provider returned nothing.
    pub no_results: bool,
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExtraction {
    pub id: String,
    pub paper_id: String,
    pub reactant: String,
    pub expected_reaction: String,
    pub job_id: String,
    pub result: ExtractionResult,
    /// Fields were changed by hand after extraction.
    pub edited: bool,
}

/// A rank entry together with its root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSequence {
    #[serde(flatten)]
    pub entry: RankEntry,
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub schema_version: u32,
    pub id: String,
    pub starting_smiles: String,
    pub expected_reactions: Vec<String>,
    pub search: SearchState,
    /// Corpus snapshot in retrieval order.
    pub papers: Vec<PaperRecord>,
    /// Aligned with `papers`.
    pub relevance: Vec<f64>,
    /// Cached layouts, one per (perplexity, seed).
    pub projections: Vec<Projection>,
    pub tree: RouteTree,
    pub weights: CriteriaWeights,
    pub annotation_history: Vec<AnnotationRecord>,
    pub relevancy_history: Vec<f64>,
    pub extractions: BTreeMap<String, StoredExtraction>,
    pub next_extraction: u64,
}

impl Workspace {
    pub fn new(id: String, starting_smiles: &str, expected_reactions: Vec<String>) -> Result<Workspace, SmilesError> {
        let molecule = parse_smiles(starting_smiles)?;
        Ok(Workspace {
            schema_version: SCHEMA_VERSION,
            id,
            starting_smiles: starting_smiles.trim().to_string(),
            expected_reactions,
            search: SearchState {
                status: SearchStatus::Pending,
                job_id: None,
                no_results: false,
                error: None,
            },
            papers: Vec::new(),
            relevance: Vec::new(),
            projections: Vec::new(),
            tree: RouteTree::new(molecule),
            weights: CriteriaWeights::default(),
            annotation_history: Vec::new(),
            relevancy_history: Vec::new(),
            extractions: BTreeMap::new(),
            next_extraction: 1,
        })
    }

    /// Pretty JSON with a trailing newline; the on-disk form.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("workspace serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Workspace, FormatError> {
        let value: Value = serde_json::from_str(text)?;
        let ws: Workspace = serde_json::from_value(migrate(value)?)?;
        ws.tree.validate().map_err(FormatError::InvalidTree)?;
        Ok(ws)
    }

    pub fn paper(&self, id: &str) -> Option<&PaperRecord> {
        self.papers.iter().find(|p| p.id == id)
    }

    pub fn cached_projection(&self, perplexity: f64, seed: u64) -> Option<&Projection> {
        self.projections
            .iter()
            .find(|p| p.perplexity.to_bits() == perplexity.to_bits() && p.seed == seed)
    }

    /// Allocates the next extraction id, `ex-000001` style.
    pub fn next_extraction_id(&mut self) -> String {
        let id = format!("ex-{:06}", self.next_extraction);
        self.next_extraction += 1;
        id
    }

    pub fn rankings(&self) -> Vec<RankedSequence> {
        rank_tree(&self.tree, &self.weights)
    }
}

/// Scores every decision sequence of `tree`, best first.
pub fn rank_tree(tree: &RouteTree, weights: &CriteriaWeights) -> Vec<RankedSequence> {
    let sequences = tree.decision_sequences();
    let criteria: Vec<SequenceCriteria> = sequences.iter().map(SequenceCriteria::from).collect();
    score(&criteria, weights)
        .into_iter()
        .map(|entry| {
            let path = sequences
                .iter()
                .find(|s| s.leaf == entry.leaf)
                .map(|s| s.path.clone())
                .unwrap_or_default();
            RankedSequence { entry, path }
        })
        .collect()
}

/// Brings an older workspace document up to [`SCHEMA_VERSION`]. Files written
/// before versioning carry no `schema_version` and are read as version 1.
pub fn migrate(mut value: Value) -> Result<Value, FormatError> {
    let obj = value.as_object_mut().ok_or(FormatError::NotAnObject)?;
    let version = obj.get("schema_version").and_then(Value::as_u64).unwrap_or(0);
    if version > SCHEMA_VERSION as u64 {
        return Err(FormatError::UnsupportedVersion(version));
    }
    if version == 0 {
        obj.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    Ok(value)
}
