//! Paper embeddings, t-SNE layout and overlap removal.

mod embedding;
mod overlap;
mod sigma;
mod tsne;

pub use embedding::{
    normalize_text, trigrams, EmbedError, Embedder, EmbeddingBackend, EmbeddingVector, FallbackBackend, SharedBackend,
    TrigramEmbedder, FALLBACK_DIMENSION,
};
pub use overlap::{overlap_removal, OverlapResult, DEFAULT_MAX_ITERATIONS};
pub use sigma::{conditional_distribution, search_sigma, SigmaSearch, MAX_BISECTION_STEPS, PERPLEXITY_TOLERANCE};
pub use tsne::{
    default_perplexity_for, gradient, joint_probabilities, kl_divergence, tsne, tsne_with_cancel, JointProbabilities,
    KlCheckpoint, TsneOutput, TsneParams, KL_CHECKPOINT_EVERY, MIN_ITERATIONS, MIN_POINTS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PaperRecord;

/// Minimum separation on the layout canvas.
pub const DEFAULT_MIN_DISTANCE: f64 = 4.0;
/// Side length of the square layout canvas.
pub const CANVAS_SIZE: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("t-SNE needs at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} must be positive and below {points} - 1")]
    BadPerplexity { perplexity: f64, points: usize },
    #[error("invalid t-SNE parameters: {0}")]
    BadParams(String),
    #[error("sigma search needs at least 2 distances, got {0}")]
    TooFewDistances(usize),
    #[error("input dimension {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in input or layout")]
    NonFinite,
    #[error("minimum distance must be positive and finite, got {0}")]
    InvalidMinDistance(f64),
    #[error("{papers} papers but {scores} relevance scores")]
    RelevanceLength { papers: usize, scores: usize },
    #[error("projection canceled")]
    Canceled,
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub paper_id: String,
    pub retrieval_rank: u32,
    pub x: f64,
    pub y: f64,
    pub relevance: f64,
    pub citation_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub tsne: TsneParams,
    pub min_distance: f64,
    pub overlap_iterations: usize,
}

impl ProjectionParams {
    pub fn new(perplexity: f64, seed: u64) -> ProjectionParams {
        ProjectionParams {
            tsne: TsneParams::with_perplexity(perplexity, seed),
            min_distance: DEFAULT_MIN_DISTANCE,
            overlap_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub perplexity: f64,
    pub seed: u64,
    pub points: Vec<ProjectedPoint>,
    pub overlap_converged: bool,
    pub initial_kl: f64,
    pub final_kl: f64,
}

/// Scales a layout uniformly into the square canvas, centered on the shorter axis.
pub fn fit_to_canvas(points: &[[f64; 2]], size: f64) -> Vec<[f64; 2]> {
    if points.is_empty() {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let extent = [hi[0] - lo[0], hi[1] - lo[1]];
    let span = extent[0].max(extent[1]);
    if span == 0.0 {
        return vec![[size / 2.0; 2]; points.len()];
    }
    let scale = size / span;
    points
        .iter()
        .map(|p| {
            let mut out = [0.0; 2];
            for d in 0..2 {
                out[d] = (p[d] - lo[d]) * scale + (size - extent[d] * scale) / 2.0;
            }
            out
        })
        .collect()
}

/// Embeds each paper's title and abstract, runs t-SNE, fits the result to the
/// canvas and removes overlaps. `relevance` is aligned with `papers`.
pub fn project_corpus(
    papers: &[PaperRecord],
    relevance: &[f64],
    backend: &dyn EmbeddingBackend,
    params: &ProjectionParams,
    cancel: &dyn Fn() -> bool,
) -> Result<Projection, ProjectionError> {
    if papers.len() != relevance.len() {
        return Err(ProjectionError::RelevanceLength {
            papers: papers.len(),
            scores: relevance.len(),
        });
    }
    params.tsne.validate(papers.len())?;
    let texts: Vec<String> = papers.iter().map(PaperRecord::document_text).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let embedder = backend.embedder_for(&refs);
    let vectors = embedder.embed_batch(&refs)?;
    let layout = tsne_with_cancel(&vectors, &params.tsne, cancel)?;
    let canvas = fit_to_canvas(&layout.coords, CANVAS_SIZE);
    let separated = overlap_removal(
        &canvas,
        params.min_distance,
        params.overlap_iterations,
        params.tsne.seed,
    )?;
    let points = papers
        .iter()
        .zip(relevance)
        .zip(&separated.points)
        .map(|((paper, &rel), p)| ProjectedPoint {
            paper_id: paper.id.clone(),
            retrieval_rank: paper.retrieval_rank,
            x: p[0],
            y: p[1],
            relevance: rel,
            citation_count: paper.citation_count,
        })
        .collect();
    Ok(Projection {
        perplexity: params.tsne.perplexity,
        seed: params.tsne.seed,
        points,
        overlap_converged: separated.converged,
        initial_kl: layout.initial_kl(),
        final_kl: layout.final_kl(),
    })
}
