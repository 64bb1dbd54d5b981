//! Blocking HTTP clients for the remote providers. Each client must be built
//! and used outside an async context (for example inside `spawn_blocking`).

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder, Response};
use serde::Deserialize;
use serde_json::{json, Value};
use synroute_core::chem::{write_smiles, Molecule};
use synroute_core::corpus::{CorpusError, FullTextProvider, LiteratureProvider, PaperRecord};
use synroute_core::extraction::{ChatMessage, LlmError, LlmProvider};
use synroute_core::projection::{EmbedError, Embedder, EmbeddingVector};

const TIMEOUT: Duration = Duration::from_secs(60);

fn client() -> Client {
    Client::builder().timeout(TIMEOUT).build().expect("http client")
}

fn trim_base(url: &str) -> String {
    url.trim_end_matches('/').to_string()
}

fn authorize(req: RequestBuilder, token: &Option<String>) -> RequestBuilder {
    match token {
        Some(t) => req.bearer_auth(t),
        None => req,
    }
}

fn checked(resp: reqwest::Result<Response>) -> Result<Response, String> {
    let resp = resp.map_err(|e| e.to_string())?;
    let status = resp.status();
    if status.is_success() {
        Ok(resp)
    } else {
        Err(format!("HTTP {status}"))
    }
}

/// Literature search: `GET {base}/search?smiles=..&limit=..` answering with a
/// JSON array of paper records, or an object holding one under `results`.
pub struct HttpLiterature {
    client: Client,
    base_url: String,
    token: Option<String>,
}

impl HttpLiterature {
    pub fn new(base_url: &str, token: Option<String>) -> HttpLiterature {
        HttpLiterature {
            client: client(),
            base_url: trim_base(base_url),
            token,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SearchBody {
    List(Vec<PaperRecord>),
    Wrapped { results: Vec<PaperRecord> },
}

impl LiteratureProvider for HttpLiterature {
    fn search(&self, query: &Molecule, limit: usize) -> Result<Vec<PaperRecord>, CorpusError> {
        let smiles = match query.smiles_source() {
            "" => write_smiles(query),
            s => s.to_string(),
        };
        let req = self
            .client
            .get(format!("{}/search", self.base_url))
            .query(&[("smiles", smiles.as_str()), ("limit", &limit.to_string())]);
        let resp = checked(authorize(req, &self.token).send()).map_err(CorpusError::ProviderUnavailable)?;
        let body: SearchBody = resp
            .json()
            .map_err(|e| CorpusError::ProviderUnavailable(format!("bad search response: {e}")))?;
        Ok(match body {
            SearchBody::List(v) | SearchBody::Wrapped { results: v } => v,
        })
    }
}

/// Full text by DOI: resolves `GET {base}/v2/{doi}?email=..` to an
/// open-access location, then downloads it. Papers without a DOI are fetched
/// from their `pdf_url` directly. Only plain-text or HTML documents are
/// usable; a PDF body counts as having no extractable text.
pub struct HttpFullText {
    client: Client,
    base_url: String,
    email: Option<String>,
    token: Option<String>,
}

impl HttpFullText {
    pub fn new(base_url: &str, email: Option<String>, token: Option<String>) -> HttpFullText {
        HttpFullText {
            client: client(),
            base_url: trim_base(base_url),
            email,
            token,
        }
    }

    fn resolve(&self, paper: &PaperRecord, doi: &str) -> Result<String, CorpusError> {
        let unavailable = |reason: String| CorpusError::FullTextUnavailable {
            paper: paper.id.clone(),
            reason,
        };
        let mut req = self.client.get(format!("{}/v2/{}", self.base_url, doi.trim()));
        if let Some(email) = &self.email {
            req = req.query(&[("email", email)]);
        }
        let body: Value = checked(authorize(req, &self.token).send())
            .map_err(unavailable)?
            .json()
            .map_err(|e| unavailable(format!("bad resolver response: {e}")))?;
        let location = &body["best_oa_location"];
        ["url_for_pdf", "url"]
            .iter()
            .find_map(|k| location[*k].as_str().filter(|s| !s.is_empty()))
            .map(str::to_string)
            .or_else(|| paper.pdf_url.clone())
            .ok_or_else(|| unavailable("no open-access location".into()))
    }
}

impl FullTextProvider for HttpFullText {
    fn fetch(&self, paper: &PaperRecord) -> Result<String, CorpusError> {
        let url = match (&paper.doi, &paper.pdf_url) {
            (Some(doi), _) if !doi.trim().is_empty() => self.resolve(paper, doi)?,
            (_, Some(url)) => url.clone(),
            _ => {
                return Err(CorpusError::FullTextUnavailable {
                    paper: paper.id.clone(),
                    reason: "no DOI or PDF URL".into(),
                })
            }
        };
        let bytes = checked(self.client.get(&url).send())
            .and_then(|r| r.bytes().map_err(|e| e.to_string()))
            .map_err(|reason| CorpusError::FullTextUnavailable {
                paper: paper.id.clone(),
                reason,
            })?;
        if bytes.starts_with(b"%PDF") {
            return Err(CorpusError::ExtractionFailed {
                paper: paper.id.clone(),
            });
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Embeddings: `POST {base}/embeddings` with `{model, input: [texts]}`,
/// answered by `{data: [{index, embedding}]}`.
pub struct HttpEmbedder {
    client: Client,
    base_url: String,
    model: String,
    token: Option<String>,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, token: Option<String>) -> HttpEmbedder {
        HttpEmbedder {
            client: client(),
            base_url: trim_base(base_url),
            model: model.to_string(),
            token,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingBody {
    data: Vec<EmbeddingItem>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_batch(&[text])?;
        v.pop().ok_or(EmbedError::InvalidVector)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let req = self
            .client
            .post(format!("{}/embeddings", self.base_url))
            .json(&json!({ "model": self.model, "input": texts }));
        let mut body: EmbeddingBody = checked(authorize(req, &self.token).send())
            .and_then(|r| r.json().map_err(|e| e.to_string()))
            .map_err(EmbedError::ProviderUnavailable)?;
        if body.data.len() != texts.len() {
            return Err(EmbedError::ProviderUnavailable(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        body.data.sort_by_key(|d| d.index);
        let vectors: Vec<EmbeddingVector> = body
            .data
            .into_iter()
            .map(|d| EmbeddingVector::new(d.embedding))
            .collect::<Result<_, _>>()?;
        let dim = vectors[0].dimension();
        if let Some(bad) = vectors.iter().find(|v| v.dimension() != dim) {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: bad.dimension(),
            });
        }
        Ok(vectors)
    }
}

/// Chat completions: `POST {base}/chat/completions` with `{model, messages}`,
/// reading `choices[0].message.content`.
pub struct HttpLlm {
    client: Client,
    base_url: String,
    model: String,
    token: Option<String>,
}

impl HttpLlm {
    pub fn new(base_url: &str, model: &str, token: Option<String>) -> HttpLlm {
        HttpLlm {
            client: client(),
            base_url: trim_base(base_url),
            model: model.to_string(),
            token,
        }
    }
}

impl LlmProvider for HttpLlm {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let req = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&json!({
                "model": self.model,
                "messages": messages,
                "temperature": 0,
            }));
        let body: Value = checked(authorize(req, &self.token).send())
            .and_then(|r| r.json().map_err(|e| e.to_string()))
            .map_err(LlmError::Unavailable)?;
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Unavailable("response has no message content".into()))
    }
}
