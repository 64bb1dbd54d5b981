//! Reaction extraction from paper text with a language model.

mod llm;
mod prompt;
mod relevancy;
mod text;
mod units;

pub use llm::{ChatMessage, LlmError, LlmProvider, LlmScript, Role, ScriptError, ScriptRule, ScriptedLlm};
pub use prompt::{build_prompt, strict_prompt, FORMAT_DIRECTIVE, REQUIRED_KEYS, STRICTNESS_DIRECTIVE};
pub use relevancy::{
    context_relevancy, quantile, recommend_difficulty, relevancy_stats, AnnotationRecord, Recommendation,
    RelevancyStats, RECOMMENDATION_THRESHOLD, RELEVANCY_THRESHOLD,
};
pub use text::{
    chunk_document, retrieve_relevant, split_sentences, RankedParagraph, MAX_PARAGRAPH_CHARS, TARGET_PARAGRAPH_CHARS,
};
pub use units::{parse_duration, parse_yield, ParsedDuration, OVERNIGHT_HOURS};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::chem::{parse_smiles, same_molecule, Molecule};
use crate::projection::{EmbedError, EmbeddingBackend};
use crate::route::{ReactionRecord, RecordError};

pub const DEFAULT_MAX_RETRIES: usize = 3;
pub const DEFAULT_TOP_K: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("reactant and expected reaction must be non-empty")]
    MissingQuery,
    #[error("no valid JSON answer after {attempts} attempts")]
    MalformedAfterRetries { attempts: usize, last_answer: String },
    #[error("language model provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("context has no sentences")]
    EmptyContext,
    #[error("relevancy history is empty")]
    EmptyHistory,
    #[error("relevancy value {0} outside [0, 1]")]
    RelevancyOutOfRange(f64),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

impl From<LlmError> for ExtractionError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Unavailable(msg) => ExtractionError::ProviderUnavailable(msg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Found,
    NotFound,
}

/// Extracted values as text; `None` marks a missing or null value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedFields {
    pub reactants: Option<String>,
    pub products: Option<String>,
    pub solvent: Option<String>,
    pub reagent: Option<String>,
    pub catalysts: Option<String>,
    pub duration: Option<String>,
    pub instruments: Option<String>,
    pub operation: Option<String>,
    #[serde(rename = "yield")]
    pub yield_text: Option<String>,
    #[serde(default)]
    pub purification: Option<String>,
}

impl ExtractedFields {
    fn slot(&mut self, key: &str) -> Option<&mut Option<String>> {
        Some(match key {
            "reactants" => &mut self.reactants,
            "products" => &mut self.products,
            "solvent" => &mut self.solvent,
            "reagent" => &mut self.reagent,
            "catalysts" => &mut self.catalysts,
            "duration" => &mut self.duration,
            "instruments" => &mut self.instruments,
            "operation" => &mut self.operation,
            "yield" => &mut self.yield_text,
            "purification" => &mut self.purification,
            _ => return None,
        })
    }

    /// Sets a field by its JSON key. Returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: Option<String>) -> bool {
        match self.slot(key) {
            Some(slot) => {
                *slot = value;
                true
            }
            None => false,
        }
    }

    /// Non-empty values joined into one passage, in key order.
    pub fn answer_text(&self) -> String {
        [
            &self.reactants,
            &self.products,
            &self.solvent,
            &self.reagent,
            &self.catalysts,
            &self.duration,
            &self.instruments,
            &self.operation,
            &self.yield_text,
            &self.purification,
        ]
        .into_iter()
        .flatten()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(". ")
    }
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) if s.trim().is_empty() || s.trim() == "null" => None,
        Value::String(s) => Some(s.trim().to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(value_text).collect();
            (!parts.is_empty()).then(|| parts.join("; "))
        }
        other => Some(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub status: ExtractionStatus,
    pub fields: ExtractedFields,
    /// Required keys absent from the answer, filled with null.
    pub missing_keys: Vec<String>,
    pub attempts: usize,
    pub context_relevancy: f64,
    pub source_paragraphs: Vec<String>,
    pub raw_answer: String,
    pub parsed_yield: Option<f64>,
    pub parsed_duration: Option<ParsedDuration>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConversionError {
    #[error("extraction found no reaction")]
    NotFound,
    #[error("field {0} has no parseable SMILES")]
    UnparseableMolecule(&'static str),
    #[error("yield is missing or unparseable")]
    MissingYield,
    #[error("duration is missing or unparseable")]
    MissingDuration,
    #[error(transparent)]
    Record(#[from] RecordError),
}

impl ExtractionResult {
    /// Re-derives parsed yield and duration after a manual edit.
    pub fn reparse(&mut self) {
        self.parsed_yield = self.fields.yield_text.as_deref().and_then(parse_yield);
        self.parsed_duration = self.fields.duration.as_deref().and_then(parse_duration);
    }

    /// Builds a reaction record. Multi-valued molecule fields are `; `
    /// separated; the reactant prefers a piece matching `preferred_reactant`.
    pub fn to_record(
        &self,
        preferred_reactant: Option<&Molecule>,
        source_doi: Option<String>,
    ) -> Result<ReactionRecord, ConversionError> {
        if self.status == ExtractionStatus::NotFound {
            return Err(ConversionError::NotFound);
        }
        let molecules = |field: &Option<String>| -> Vec<Molecule> {
            field
                .as_deref()
                .unwrap_or("")
                .split(';')
                .filter_map(|p| parse_smiles(p.trim()).ok())
                .collect()
        };
        let reactants = molecules(&self.fields.reactants);
        let reactant = preferred_reactant
            .and_then(|want| reactants.iter().find(|m| same_molecule(m, want)))
            .or(reactants.first())
            .cloned()
            .ok_or(ConversionError::UnparseableMolecule("reactants"))?;
        let product = molecules(&self.fields.products)
            .into_iter()
            .next()
            .ok_or(ConversionError::UnparseableMolecule("products"))?;
        let y = self.parsed_yield.ok_or(ConversionError::MissingYield)?;
        let d = self.parsed_duration.ok_or(ConversionError::MissingDuration)?;
        let mut record = ReactionRecord::new(reactant, product, y, d.hours)?;
        let text = |f: &Option<String>| f.clone().unwrap_or_default();
        record.solvent = text(&self.fields.solvent);
        record.reagent = text(&self.fields.reagent);
        record.catalysts = text(&self.fields.catalysts);
        record.instruments = text(&self.fields.instruments);
        record.operation = text(&self.fields.operation);
        record.purification = text(&self.fields.purification);
        record.source_doi = source_doi.unwrap_or_default();
        record.context_relevancy = Some(self.context_relevancy);
        Ok(record)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOptions {
    pub max_retries: usize,
    pub top_k: usize,
    pub relevancy_threshold: f64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            max_retries: DEFAULT_MAX_RETRIES,
            top_k: DEFAULT_TOP_K,
            relevancy_threshold: RELEVANCY_THRESHOLD,
        }
    }
}

enum Answer {
    Null,
    Object(Map<String, Value>),
}

fn parse_answer(text: &str) -> Option<Answer> {
    let trimmed = text.trim();
    if trimmed == "null" || trimmed == "\"null\"" {
        return Some(Answer::Null);
    }
    match serde_json::from_str::<Value>(trimmed).ok()? {
        Value::Object(map) => Some(Answer::Object(map)),
        Value::Null => Some(Answer::Null),
        _ => None,
    }
}

/// Chunks the document, retrieves the paragraphs closest to the query, asks
/// the model and parses its JSON answer, retrying malformed answers with a
/// stricter prompt up to `max_retries` times.
pub fn extract_reaction(
    document: &str,
    reactant: &str,
    expected_reaction: &str,
    options: &ExtractionOptions,
    llm: &dyn LlmProvider,
    backend: &dyn EmbeddingBackend,
) -> Result<ExtractionResult, ExtractionError> {
    if reactant.trim().is_empty() || expected_reaction.trim().is_empty() {
        return Err(ExtractionError::MissingQuery);
    }
    let paragraphs = chunk_document(document);
    if paragraphs.is_empty() {
        return Err(ExtractionError::EmptyDocument);
    }
    let refs: Vec<&str> = paragraphs.iter().map(String::as_str).collect();
    let embedder = backend.embedder_for(&refs);
    let query = format!("{expected_reaction} {reactant}");
    let context: Vec<String> = retrieve_relevant(&paragraphs, &query, options.top_k, embedder.as_ref())?
        .into_iter()
        .map(|r| r.text)
        .collect();
    let prompt = build_prompt(reactant, expected_reaction, &context);

    let mut attempts = 0;
    let mut last_answer = String::new();
    while attempts <= options.max_retries {
        let text = if attempts == 0 {
            prompt.clone()
        } else {
            strict_prompt(&prompt)
        };
        attempts += 1;
        let answer = llm.complete(&[ChatMessage::user(text)])?;
        let parsed = parse_answer(&answer);
        last_answer = answer;
        let Some(parsed) = parsed else {
            continue;
        };
        let mut result = ExtractionResult {
            status: ExtractionStatus::NotFound,
            fields: ExtractedFields::default(),
            missing_keys: Vec::new(),
            attempts,
            context_relevancy: 0.0,
            source_paragraphs: context,
            raw_answer: last_answer,
            parsed_yield: None,
            parsed_duration: None,
        };
        if let Answer::Object(map) = parsed {
            result.status = ExtractionStatus::Found;
            for key in REQUIRED_KEYS {
                match map.get(key) {
                    Some(v) => {
                        result.fields.set(key, value_text(v));
                    }
                    None => result.missing_keys.push(key.to_string()),
                }
            }
            if let Some(v) = map.get("purification") {
                result.fields.purification = value_text(v);
            }
            result.reparse();
            result.context_relevancy = context_relevancy(
                &result.fields.answer_text(),
                &result.source_paragraphs,
                embedder.as_ref(),
                options.relevancy_threshold,
            )
            .or_else(|e| match e {
                ExtractionError::EmptyContext => Ok(0.0),
                other => Err(other),
            })?;
        }
        return Ok(result);
    }
    Err(ExtractionError::MalformedAfterRetries { attempts, last_answer })
}
