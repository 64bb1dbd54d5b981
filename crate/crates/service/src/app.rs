use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use serde_json::Value;
use synroute_core::chem::parse_smiles;
use synroute_core::corpus::{
    fetch_fulltext, query_context, relevance_scores, search_papers, FixtureCorpus, FullTextCache, FullTextProvider,
    LiteratureProvider, PaperRecord, DEFAULT_SEARCH_LIMIT,
};
use synroute_core::extraction::{
    extract_reaction, ExtractionOptions, ExtractionResult, ExtractionStatus, LlmProvider, ScriptedLlm,
};
use synroute_core::projection::{
    default_perplexity_for, project_corpus, EmbeddingBackend, FallbackBackend, Projection, ProjectionParams,
    SharedBackend,
};

use crate::config::{Config, EmbeddingKind, LlmKind, ProviderKind};
use crate::error::ApiError;
use crate::http_providers::{HttpEmbedder, HttpFullText, HttpLiterature, HttpLlm};
use crate::jobs::{CancelToken, JobManager};
use crate::store::WorkspaceStore;
use crate::workspace::{SearchStatus, StoredExtraction, Workspace};

/// The external services a deployment talks to, or their offline stand-ins.
#[derive(Clone)]
pub struct Providers {
    pub literature: Arc<dyn LiteratureProvider>,
    pub fulltext: Arc<dyn FullTextProvider>,
    pub embedding: Arc<dyn EmbeddingBackend>,
    pub llm: Arc<dyn LlmProvider>,
}

impl Providers {
    /// Fixture corpus for search and full text, the fallback embedder and a
    /// scripted model.
    pub fn offline(corpus: Arc<FixtureCorpus>, llm: ScriptedLlm) -> Providers {
        Providers {
            literature: corpus.clone(),
            fulltext: corpus,
            embedding: Arc::new(FallbackBackend),
            llm: Arc::new(llm),
        }
    }

    /// Builds the providers selected by `config`. Creates blocking HTTP
    /// clients, so call it outside an async runtime.
    pub fn from_config(config: &Config) -> anyhow::Result<Providers> {
        config.validate()?;
        let load_corpus = |path: &Path| -> anyhow::Result<Arc<FixtureCorpus>> {
            Ok(Arc::new(
                FixtureCorpus::load(path).with_context(|| format!("loading corpus {}", path.display()))?,
            ))
        };
        let lit_fixture = match (&config.literature.provider, &config.literature.fixture) {
            (ProviderKind::Fixture, Some(p)) => Some((p.clone(), load_corpus(p)?)),
            _ => None,
        };
        let literature: Arc<dyn LiteratureProvider> = match config.literature.provider {
            ProviderKind::Fixture => lit_fixture.as_ref().expect("validated").1.clone(),
            ProviderKind::Http => Arc::new(HttpLiterature::new(
                config.literature.base_url.as_deref().expect("validated"),
                config.literature.token.clone(),
            )),
        };
        let fulltext: Arc<dyn FullTextProvider> = match config.fulltext.provider {
            ProviderKind::Fixture => {
                let path = config
                    .fulltext
                    .fixture
                    .clone()
                    .or_else(|| config.literature.fixture.clone())
                    .expect("validated");
                match &lit_fixture {
                    Some((p, corpus)) if *p == path => corpus.clone(),
                    _ => load_corpus(&path)?,
                }
            }
            ProviderKind::Http => Arc::new(HttpFullText::new(
                config.fulltext.base_url.as_deref().expect("validated"),
                config.fulltext.email.clone(),
                config.fulltext.token.clone(),
            )),
        };
        let embedding: Arc<dyn EmbeddingBackend> = match config.embedding.provider {
            EmbeddingKind::Fallback => Arc::new(FallbackBackend),
            EmbeddingKind::Http => Arc::new(SharedBackend(Arc::new(HttpEmbedder::new(
                config.embedding.base_url.as_deref().expect("validated"),
                config.embedding.model.as_deref().expect("validated"),
                config.embedding.token.clone(),
            )))),
        };
        let llm: Arc<dyn LlmProvider> = match config.llm.provider {
            LlmKind::Scripted => {
                let path = config.llm.script.as_deref().expect("validated");
                Arc::new(ScriptedLlm::load(path).with_context(|| format!("loading script {}", path.display()))?)
            }
            LlmKind::Http => Arc::new(HttpLlm::new(
                config.llm.base_url.as_deref().expect("validated"),
                config.llm.model.as_deref().expect("validated"),
                config.llm.token.clone(),
            )),
        };
        Ok(Providers {
            literature,
            fulltext,
            embedding,
            llm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub min_distance: f64,
    pub search_limit: usize,
    pub extraction: ExtractionOptions,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            min_distance: synroute_core::projection::DEFAULT_MIN_DISTANCE,
            search_limit: DEFAULT_SEARCH_LIMIT,
            extraction: ExtractionOptions::default(),
        }
    }
}

impl Settings {
    pub fn from_config(config: &Config) -> Settings {
        Settings {
            seed: config.projection.seed,
            min_distance: config.projection.min_distance,
            search_limit: DEFAULT_SEARCH_LIMIT,
            extraction: ExtractionOptions {
                max_retries: config.extraction.max_retries,
                top_k: config.extraction.top_k,
                ..ExtractionOptions::default()
            },
        }
    }
}

/// Everything request handlers and CLI verbs share.
pub struct AppState {
    pub store: WorkspaceStore,
    pub jobs: JobManager,
    pub providers: Providers,
    pub cache: FullTextCache,
    pub settings: Settings,
}

pub type SharedState = Arc<AppState>;

fn canceled() -> ApiError {
    ApiError::conflict("Canceled", "job canceled")
}

impl AppState {
    pub fn new(store: WorkspaceStore, providers: Providers, cache: FullTextCache, settings: Settings) -> AppState {
        AppState {
            store,
            jobs: JobManager::new(),
            providers,
            cache,
            settings,
        }
    }

    /// Opens the data directory and builds providers from `config`.
    pub fn from_config(config: &Config) -> anyhow::Result<AppState> {
        let providers = Providers::from_config(config)?;
        let store =
            WorkspaceStore::open(config.server.data_dir.join("workspaces")).context("opening workspace directory")?;
        let cache = FullTextCache::new(config.fulltext_cache_dir()).context("opening full-text cache")?;
        Ok(AppState::new(store, providers, cache, Settings::from_config(config)))
    }

    /// Validates the molecule and persists a fresh workspace.
    pub fn create_workspace(&self, smiles: &str, expected_reactions: Vec<String>) -> Result<Workspace, ApiError> {
        let ws = Workspace::new(self.store.allocate_id(), smiles, expected_reactions)?;
        self.store.insert(&ws)?;
        Ok(ws)
    }

    /// Runs the literature search for a workspace and stores the snapshot.
    /// A failed search is recorded on the workspace as well as returned.
    pub fn run_search(&self, ws_id: &str) -> Result<Value, ApiError> {
        let ws = self.store.load(ws_id)?;
        let outcome = search_papers(
            self.providers.literature.as_ref(),
            &ws.starting_smiles,
            self.settings.search_limit,
        )
        .and_then(|o| {
            let context = query_context(&ws.starting_smiles, &ws.expected_reactions);
            let relevance = relevance_scores(&o.papers, &context, self.providers.embedding.as_ref())?;
            Ok((o, relevance))
        });
        match outcome {
            Ok((o, relevance)) => self.store.mutate(ws_id, |w| {
                w.search.status = SearchStatus::Done;
                w.search.no_results = o.no_results;
                w.search.error = None;
                w.papers = o.papers;
                w.relevance = relevance;
                w.projections.clear();
                Ok(serde_json::json!({ "papers": w.papers.len(), "no_results": w.search.no_results }))
            }),
            Err(e) => {
                let err = ApiError::from(e);
                self.store.mutate(ws_id, |w| {
                    w.search.status = SearchStatus::Failed;
                    w.search.error = Some(err.body.clone());
                    Ok(())
                })?;
                Err(err)
            }
        }
    }

    /// Fails with 409 unless the workspace's search has finished.
    pub fn require_search_done(ws: &Workspace) -> Result<(), ApiError> {
        match ws.search.status {
            SearchStatus::Done => Ok(()),
            SearchStatus::Pending => Err(ApiError::conflict(
                "SearchPending",
                "literature search has not finished",
            )),
            SearchStatus::Failed => Err(ApiError::conflict("SearchFailed", "literature search failed")
                .with_details(serde_json::to_value(&ws.search.error).unwrap_or(Value::Null))),
        }
    }

    pub fn resolve_perplexity(ws: &Workspace, perplexity: Option<f64>) -> f64 {
        perplexity.unwrap_or_else(|| default_perplexity_for(ws.papers.len()))
    }

    /// Returns the cached layout for `(perplexity, seed)` or computes and
    /// caches it. The flag tells whether the cache was used.
    pub fn projection(
        &self,
        ws_id: &str,
        perplexity: f64,
        cancel: &CancelToken,
    ) -> Result<(Projection, bool), ApiError> {
        let seed = self.settings.seed;
        let ws = self.store.load(ws_id)?;
        Self::require_search_done(&ws)?;
        if let Some(p) = ws.cached_projection(perplexity, seed) {
            return Ok((p.clone(), true));
        }
        let mut params = ProjectionParams::new(perplexity, seed);
        params.min_distance = self.settings.min_distance;
        let projection = project_corpus(
            &ws.papers,
            &ws.relevance,
            self.providers.embedding.as_ref(),
            &params,
            &|| cancel.is_canceled(),
        )?;
        let stored = projection.clone();
        self.store.mutate(ws_id, move |w| {
            if w.cached_projection(perplexity, seed).is_none() {
                w.projections.push(stored);
            }
            Ok(())
        })?;
        Ok((projection, false))
    }

    /// Fetches the paper's full text through the cache.
    pub fn fulltext(&self, paper: &PaperRecord) -> Result<String, ApiError> {
        Ok(fetch_fulltext(paper, self.providers.fulltext.as_ref(), &self.cache)?)
    }

    /// Extracts `expected_reaction` from one paper without touching any workspace.
    pub fn extract(
        &self,
        paper: &PaperRecord,
        reactant: &str,
        expected_reaction: &str,
    ) -> Result<ExtractionResult, ApiError> {
        parse_smiles(reactant)?;
        let document = self.fulltext(paper)?;
        Ok(extract_reaction(
            &document,
            reactant,
            expected_reaction,
            &self.settings.extraction,
            self.providers.llm.as_ref(),
            self.providers.embedding.as_ref(),
        )?)
    }

    /// Runs an extraction for a workspace paper and stores the result.
    pub fn run_extraction(
        &self,
        ws_id: &str,
        job_id: &str,
        paper_id: &str,
        reactant: &str,
        expected_reaction: &str,
        cancel: &CancelToken,
    ) -> Result<StoredExtraction, ApiError> {
        let ws = self.store.load(ws_id)?;
        let paper = ws
            .paper(paper_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("PaperNotFound", format!("paper {paper_id}")))?;
        let result = self.extract(&paper, reactant, expected_reaction)?;
        if cancel.is_canceled() {
            return Err(canceled());
        }
        self.store.mutate(ws_id, |w| {
            let stored = StoredExtraction {
                id: w.next_extraction_id(),
                paper_id: paper.id.clone(),
                reactant: reactant.to_string(),
                expected_reaction: expected_reaction.to_string(),
                job_id: job_id.to_string(),
                edited: false,
                result,
            };
            if stored.result.status == ExtractionStatus::Found {
                w.relevancy_history.push(stored.result.context_relevancy);
            }
            w.extractions.insert(stored.id.clone(), stored.clone());
            Ok(stored)
        })
    }
}
