use serde::{Deserialize, Serialize};

use crate::projection::{EmbedError, Embedder, EmbeddingBackend};
use crate::route::DifficultyAnnotation;

use super::text::split_sentences;
use super::ExtractionError;

/// Cosine threshold for a context sentence to count as supporting the answer.
pub const RELEVANCY_THRESHOLD: f64 = 0.5;
/// Minimum cosine for a difficulty recommendation.
pub const RECOMMENDATION_THRESHOLD: f64 = 0.6;

/// Fraction of context sentences whose cosine similarity to `answer` is at
/// least `threshold`.
pub fn context_relevancy(
    answer: &str,
    context: &[String],
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<f64, ExtractionError> {
    let sentences: Vec<String> = context.iter().flat_map(|p| split_sentences(p)).collect();
    if sentences.is_empty() {
        return Err(ExtractionError::EmptyContext);
    }
    let answer = match embedder.embed(answer) {
        Ok(v) => v,
        Err(EmbedError::EmptyText) => return Ok(0.0),
        Err(e) => return Err(e.into()),
    };
    let mut supported = 0;
    for s in &sentences {
        if embedder.embed(s)?.cosine(&answer) >= threshold {
            supported += 1;
        }
    }
    Ok(supported as f64 / sentences.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevancyStats {
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub history: Vec<f64>,
}

/// Quantile by linear interpolation between closest ranks of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn relevancy_stats(history: &[f64]) -> Result<RelevancyStats, ExtractionError> {
    if history.is_empty() {
        return Err(ExtractionError::EmptyHistory);
    }
    if let Some(&bad) = history.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ExtractionError::RelevancyOutOfRange(bad));
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(RelevancyStats {
        mean: history.iter().sum::<f64>() / history.len() as f64,
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        history: history.to_vec(),
    })
}

/// A past difficulty annotation and the operation text it was given for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub operation: String,
    pub annotation: DifficultyAnnotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub annotation: DifficultyAnnotation,
    pub similarity: f64,
    /// Position of the source entry in the history.
    pub source: usize,
}

/// The annotation of the most similar past operation, if its cosine similarity
/// reaches [`RECOMMENDATION_THRESHOLD`]. Ties go to the earlier entry.
pub fn recommend_difficulty(
    operation: &str,
    history: &[AnnotationRecord],
    backend: &dyn EmbeddingBackend,
) -> Option<Recommendation> {
    if history.is_empty() {
        return None;
    }
    let mut docs: Vec<&str> = history.iter().map(|h| h.operation.as_str()).collect();
    docs.push(operation);
    let embedder = backend.embedder_for(&docs);
    let query = embedder.embed(operation).ok()?;
    let mut best: Option<Recommendation> = None;
    for (source, entry) in history.iter().enumerate() {
        let Ok(v) = embedder.embed(&entry.operation) else {
            continue;
        };
        let similarity = v.cosine(&query);
        if best.as_ref().is_none_or(|b| similarity > b.similarity) {
            best = Some(Recommendation {
                annotation: entry.annotation.clone(),
                similarity,
                source,
            });
        }
    }
    best.filter(|b| b.similarity >= RECOMMENDATION_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_stats() {
        let s = relevancy_stats(&[0.5]).unwrap();
        assert_eq!((s.mean, s.q1, s.q3), (0.5, 0.5, 0.5));
    }

    #[test]
    fn interpolated_quartiles() {
        let s = relevancy_stats(&[1.0, 0.0, 0.5]).unwrap();
        assert_eq!((s.mean, s.q1, s.q3), (0.5, 0.25, 0.75));
        assert_eq!(s.history, vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn stats_errors() {
        assert!(matches!(relevancy_stats(&[]), Err(ExtractionError::EmptyHistory)));
        assert!(matches!(
            relevancy_stats(&[1.5]),
            Err(ExtractionError::RelevancyOutOfRange(_))
        ));
    }
}
