//! Paper retrieval, relevance scoring and the full-text cache.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::{parse_smiles, same_molecule, Molecule, SmilesError};
use crate::projection::{EmbedError, EmbeddingBackend};

/// Result cap for a literature search.
pub const DEFAULT_SEARCH_LIMIT: usize = 100;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid query molecule: {0}")]
    InvalidQuery(#[from] SmilesError),
    #[error("literature provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("full text unavailable for {paper}: {reason}")]
    FullTextUnavailable { paper: String, reason: String },
    #[error("document for {paper} has no extractable text")]
    ExtractionFailed { paper: String },
    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("duplicate paper id {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error("cache i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub doi: Option<String>,
    #[serde(default)]
    pub citation_count: u64,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub pdf_url: Option<String>,
    /// 1-based position in the search result; 0 before ranks are assigned.
    #[serde(default)]
    pub retrieval_rank: u32,
}

impl PaperRecord {
    /// Title and abstract, the text that gets embedded.
    pub fn document_text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_text)
    }
}

/// Lowercased DOI without resolver prefixes.
pub fn normalize_doi(doi: &str) -> String {
    let d = doi.trim().to_lowercase();
    for prefix in ["https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "doi:"] {
        if let Some(rest) = d.strip_prefix(prefix) {
            return rest.trim().to_string();
        }
    }
    d
}

pub trait LiteratureProvider: Send + Sync {
    /// Records matching the query molecule in provider order. `limit` is a hint.
    fn search(&self, query: &Molecule, limit: usize) -> Result<Vec<PaperRecord>, CorpusError>;
}

pub trait FullTextProvider: Send + Sync {
    fn fetch(&self, paper: &PaperRecord) -> Result<String, CorpusError>;
}

/// One line of a fixture corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(flatten)]
    pub record: PaperRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fulltext: Option<String>,
    /// SMILES this paper is returned for; empty means every query.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<String>,
}

impl FixtureEntry {
    fn matches(&self, query: &Molecule) -> bool {
        self.queries.is_empty()
            || self
                .queries
                .iter()
                .filter_map(|q| parse_smiles(q).ok())
                .any(|m| same_molecule(&m, query))
    }
}

/// An offline corpus loaded from JSON lines, serving both search and full text.
#[derive(Debug, Clone, Default)]
pub struct FixtureCorpus {
    entries: Vec<FixtureEntry>,
}

impl FixtureCorpus {
    pub fn new(entries: Vec<FixtureEntry>) -> Result<FixtureCorpus, CorpusError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.record.id.clone()) {
                return Err(CorpusError::DuplicateId(e.record.id.clone()));
            }
        }
        Ok(FixtureCorpus { entries })
    }

    /// Parses one JSON object per non-blank line.
    pub fn from_jsonl(text: &str) -> Result<FixtureCorpus, CorpusError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(line).map_err(|e| CorpusError::Fixture {
                line: idx + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        FixtureCorpus::new(entries)
    }

    pub fn load(path: &Path) -> Result<FixtureCorpus, CorpusError> {
        FixtureCorpus::from_jsonl(&fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[FixtureEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl LiteratureProvider for FixtureCorpus {
    fn search(&self, query: &Molecule, _limit: usize) -> Result<Vec<PaperRecord>, CorpusError> {
        Ok(self
            .entries
            .iter()
            .filter(|e| e.matches(query))
            .map(|e| e.record.clone())
            .collect())
    }
}

impl FullTextProvider for FixtureCorpus {
    fn fetch(&self, paper: &PaperRecord) -> Result<String, CorpusError> {
        let wanted = paper.doi.as_deref().map(normalize_doi);
        let entry = self.entries.iter().find(|e| {
            e.record.id == paper.id || (wanted.is_some() && e.record.doi.as_deref().map(normalize_doi) == wanted)
        });
        match entry.and_then(|e| e.fulltext.as_ref()) {
            Some(text) if text.trim().is_empty() => Err(CorpusError::ExtractionFailed {
                paper: paper.id.clone(),
            }),
            Some(text) => Ok(text.clone()),
            None => Err(CorpusError::FullTextUnavailable {
                paper: paper.id.clone(),
                reason: "no fixture document".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub papers: Vec<PaperRecord>,
    /// Set when the provider returned nothing.
    pub no_results: bool,
}

/// Runs a literature search for `query_smiles`, drops repeated DOIs and ids
/// (keeping the first), truncates to `limit` and assigns ranks `1..=k`.
pub fn search_papers(
    provider: &dyn LiteratureProvider,
    query_smiles: &str,
    limit: usize,
) -> Result<SearchOutcome, CorpusError> {
    let query = parse_smiles(query_smiles)?;
    let raw = provider.search(&query, limit)?;
    let mut seen_doi = HashSet::new();
    let mut seen_id = HashSet::new();
    let mut papers = Vec::new();
    for mut p in raw {
        if papers.len() == limit {
            break;
        }
        if let Some(doi) = &p.doi {
            if !seen_doi.insert(normalize_doi(doi)) {
                continue;
            }
        }
        if !seen_id.insert(p.id.clone()) {
            continue;
        }
        p.retrieval_rank = papers.len() as u32 + 1;
        papers.push(p);
    }
    Ok(SearchOutcome {
        no_results: papers.is_empty(),
        papers,
    })
}

/// Query text used for relevance: the SMILES followed by the expected reactions.
pub fn query_context(smiles: &str, expected_reactions: &[String]) -> String {
    let mut parts = vec![smiles.to_string()];
    parts.extend(expected_reactions.iter().cloned());
    parts.join(" ")
}

/// Min-max rescales values to [0, 1]; a single value or a constant set maps to 1.
pub fn min_max_rescale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() == 1 || hi - lo <= 0.0 {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Cosine similarity of each paper to `context`, rescaled over the result set.
pub fn relevance_scores(
    papers: &[PaperRecord],
    context: &str,
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<f64>, CorpusError> {
    if papers.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = papers.iter().map(PaperRecord::document_text).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let embedder = backend.embedder_for(&refs);
    let query = embedder.embed(context)?;
    let docs = embedder.embed_batch(&refs)?;
    let cos: Vec<f64> = docs.iter().map(|d| d.cosine(&query)).collect();
    Ok(min_max_rescale(&cos))
}

/// On-disk document cache addressed by the SHA-256 of the normalized DOI.
#[derive(Debug, Clone)]
pub struct FullTextCache {
    dir: PathBuf,
}

impl FullTextCache {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<FullTextCache> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(FullTextCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Cache key for a paper, or `None` when it has neither DOI nor URL.
    pub fn key(paper: &PaperRecord) -> Option<String> {
        let source = match (&paper.doi, &paper.pdf_url) {
            (Some(doi), _) if !doi.trim().is_empty() => normalize_doi(doi),
            (_, Some(url)) if !url.trim().is_empty() => format!("url:{}", url.trim()),
            _ => return None,
        };
        Some(hex::encode(Sha256::digest(source.as_bytes())))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> io::Result<Option<String>> {
        match fs::read_to_string(self.path(key)) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes to a temporary file in the cache directory, then renames it into place.
    pub fn put(&self, key: &str, text: &str) -> io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Returns the paper's document text, serving repeat requests from the cache.
pub fn fetch_fulltext(
    paper: &PaperRecord,
    provider: &dyn FullTextProvider,
    cache: &FullTextCache,
) -> Result<String, CorpusError> {
    let Some(key) = FullTextCache::key(paper) else {
        return Err(CorpusError::FullTextUnavailable {
            paper: paper.id.clone(),
            reason: "no DOI or PDF URL".into(),
        });
    };
    if let Some(text) = cache.get(&key)? {
        return Ok(text);
    }
    let text = provider.fetch(paper)?;
    if text.trim().is_empty() {
        return Err(CorpusError::ExtractionFailed {
            paper: paper.id.clone(),
        });
    }
    cache.put(&key, &text)?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doi_normalization() {
        assert_eq!(normalize_doi(" https://doi.org/10.1000/ABC "), "10.1000/abc");
        assert_eq!(normalize_doi("doi:10.1/x"), "10.1/x");
        assert_eq!(normalize_doi("10.1/X"), "10.1/x");
    }

    #[test]
    fn rescale_rules() {
        assert_eq!(min_max_rescale(&[0.3]), vec![1.0]);
        assert_eq!(min_max_rescale(&[0.2, 0.2]), vec![1.0, 1.0]);
        assert_eq!(min_max_rescale(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
        assert!(min_max_rescale(&[]).is_empty());
    }

    #[test]
    fn context_joins_reactions() {
        let ctx = query_context("CCO", &["oxidation".into(), "esterification".into()]);
        assert_eq!(ctx, "CCO oxidation esterification");
    }

    #[test]
    fn fixture_line_errors_carry_line_numbers() {
        let err = FixtureCorpus::from_jsonl("\n{\"id\":\"a\"}\n").unwrap_err();
        assert!(matches!(err, CorpusError::Fixture { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id":"p","title":"t","abstract":"a"}"#;
        let err = FixtureCorpus::from_jsonl(&format!("{line}\n{line}")).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(id) if id == "p"));
    }
}
