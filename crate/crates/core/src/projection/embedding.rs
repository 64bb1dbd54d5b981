use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::Fnv64;

/// Bucket count of the offline trigram embedder.
pub const FALLBACK_DIMENSION: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding vector is empty, zero or non-finite")]
    InvalidVector,
    #[error("embedding dimension {found} does not match expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values` to unit L2 norm.
    pub fn new(values: Vec<f64>) -> Result<EmbeddingVector, EmbedError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidVector);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::InvalidVector);
        }
        Ok(EmbeddingVector(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity. Both vectors are unit length, so this is the dot product.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        EmbeddingVector::new(raw).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Something that turns text into embeddings.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Produces an embedder for a given document set. The offline backend fits
/// IDF weights on the documents; remote backends ignore them.
pub trait EmbeddingBackend: Send + Sync {
    fn embedder_for(&self, documents: &[&str]) -> Arc<dyn Embedder>;
}

/// Fits a fresh [`TrigramEmbedder`] per document set.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackBackend;

impl EmbeddingBackend for FallbackBackend {
    fn embedder_for(&self, documents: &[&str]) -> Arc<dyn Embedder> {
        Arc::new(TrigramEmbedder::fit(documents))
    }
}

/// Wraps a single shared embedder, such as a remote provider client.
#[derive(Clone)]
pub struct SharedBackend(pub Arc<dyn Embedder>);

impl EmbeddingBackend for SharedBackend {
    fn embedder_for(&self, _documents: &[&str]) -> Arc<dyn Embedder> {
        Arc::clone(&self.0)
    }
}

/// Character-trigram TF-IDF hashed into a fixed number of buckets.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    idf: HashMap<String, f64>,
    unseen_idf: f64,
    dimension: usize,
}

impl TrigramEmbedder {
    /// Fits IDF weights as `1 + ln(N / df)` over `documents`. Trigrams absent
    /// from the corpus get the largest observed weight.
    pub fn fit(documents: &[&str]) -> TrigramEmbedder {
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in documents {
            let unique: HashSet<String> = trigrams(doc).into_iter().collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n = documents.len() as f64;
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, count)| (t, 1.0 + (n / count as f64).ln()))
            .collect();
        let unseen_idf = idf.values().copied().fold(1.0, f64::max);
        TrigramEmbedder {
            idf,
            unseen_idf,
            dimension: FALLBACK_DIMENSION,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Bucket index a trigram hashes into.
    pub fn bucket(&self, trigram: &str) -> usize {
        (Fnv64::new().bytes(trigram.as_bytes()).finish() % self.dimension as u64) as usize
    }

    pub fn idf(&self, trigram: &str) -> f64 {
        self.idf.get(trigram).copied().unwrap_or(self.unseen_idf)
    }
}

impl Embedder for TrigramEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let grams = trigrams(text);
        if grams.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut values = vec![0.0; self.dimension];
        for g in &grams {
            values[self.bucket(g)] += self.idf(g);
        }
        EmbeddingVector::new(values)
    }
}

/// Lowercases, collapses whitespace and pads with one space on each side.
pub fn normalize_text(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return String::new();
    }
    format!(" {} ", words.join(" ").to_lowercase())
}

/// Character trigrams of the normalized text, with repetition.
pub fn trigrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = normalize_text(text).chars().collect();
    if chars.len() < 3 {
        return Vec::new();
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}
