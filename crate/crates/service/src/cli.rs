use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use synroute_core::corpus::{FixtureCorpus, FullTextCache, PaperRecord};
use synroute_core::eval::{evaluate_by_tool, parse_gold, parse_predictions, render_csv, render_table};
use synroute_core::extraction::ScriptedLlm;
use synroute_core::ranking::CriteriaWeights;

use crate::api::RankingsView;
use crate::app::{AppState, Providers, Settings};
use crate::config::Config;
use crate::store::WorkspaceStore;
use crate::workspace::{rank_tree, Workspace};

#[derive(Debug, Parser)]
#[command(
    name = "synroute",
    version,
    about = "Literature-backed synthetic route planning workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "synroute.toml")]
        config: PathBuf,
        /// Directory of static web assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Check a fixture corpus, or build a workspace from it.
    Ingest {
        fixture: PathBuf,
        /// Starting molecule; when given, a workspace is created and searched.
        #[arg(long)]
        smiles: Option<String>,
        #[arg(long = "expected")]
        expected: Vec<String>,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Extract one reaction from a paper and print the result as JSON.
    Extract {
        #[arg(long)]
        doi: String,
        #[arg(long)]
        reactant: String,
        #[arg(long)]
        expected: String,
        #[arg(long, default_value = "synroute.toml")]
        config: PathBuf,
    },
    /// Rank the decision sequences of a saved workspace.
    Rank {
        #[arg(long)]
        workspace: PathBuf,
        /// steps,duration,yield; defaults to the workspace's weights.
        #[arg(long)]
        weights: Option<String>,
        /// Print the same JSON as `GET /workspaces/{id}/rankings`.
        #[arg(long)]
        json: bool,
    },
    /// Score predicted extractions against gold annotations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

/// Loads a config file and applies token overrides from the environment.
pub fn load_config(path: &Path) -> anyhow::Result<Config> {
    let mut config = Config::load(path)?;
    config.apply_env(|var| std::env::var(var).ok());
    config.validate()?;
    Ok(config)
}

pub fn parse_weights(text: &str) -> anyhow::Result<CriteriaWeights> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("weights must be three numbers, got {text:?}"))?;
    let [steps, duration, yield_] = parts[..] else {
        bail!("weights must be three numbers: steps,duration,yield");
    };
    Ok(CriteriaWeights::new(steps, duration, yield_)?)
}

/// Runs every verb except `serve`, writing its report to `out`.
pub fn run(command: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Serve { .. } => bail!("serve is handled by the binary entry point"),
        Command::Ingest {
            fixture,
            smiles,
            expected,
            data_dir,
        } => ingest(&fixture, smiles.as_deref(), expected, &data_dir, out),
        Command::Extract {
            doi,
            reactant,
            expected,
            config,
        } => {
            let config = load_config(&config)?;
            let state = AppState::from_config(&config)?;
            let paper = PaperRecord {
                id: doi.clone(),
                title: String::new(),
                abstract_text: String::new(),
                doi: Some(doi),
                citation_count: 0,
                keywords: Vec::new(),
                pdf_url: None,
                retrieval_rank: 0,
            };
            let result = state.extract(&paper, &reactant, &expected)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&result)?)?;
            Ok(())
        }
        Command::Rank {
            workspace,
            weights,
            json,
        } => {
            let text =
                std::fs::read_to_string(&workspace).with_context(|| format!("reading {}", workspace.display()))?;
            let ws = Workspace::from_json(&text)?;
            let weights = match weights {
                Some(w) => parse_weights(&w)?,
                None => ws.weights,
            };
            let view = RankingsView {
                weights,
                rankings: rank_tree(&ws.tree, &weights),
            };
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&view)?)?;
            } else {
                out.write_all(render_rankings(&view).as_bytes())?;
            }
            Ok(())
        }
        Command::Eval { gold, pred, csv } => {
            let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
            let golds = parse_gold(&read(&gold)?)?;
            let preds = parse_predictions(&read(&pred)?)?;
            let rows: Vec<_> = evaluate_by_tool(&preds, &golds)
                .into_iter()
                .map(|(tool, report)| (tool, report.metrics))
                .collect();
            let rendered = if csv { render_csv(&rows)? } else { render_table(&rows) };
            out.write_all(rendered.as_bytes())?;
            Ok(())
        }
    }
}

fn ingest(
    fixture: &Path,
    smiles: Option<&str>,
    expected: Vec<String>,
    data_dir: &Path,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let corpus = Arc::new(FixtureCorpus::load(fixture).with_context(|| format!("loading {}", fixture.display()))?);
    let with_text = corpus
        .entries()
        .iter()
        .filter(|e| e.fulltext.as_deref().is_some_and(|t| !t.trim().is_empty()))
        .count();
    writeln!(out, "{} records, {} with full text", corpus.len(), with_text)?;
    let Some(smiles) = smiles else {
        return Ok(());
    };
    let store = WorkspaceStore::open(data_dir.join("workspaces"))?;
    let cache = FullTextCache::new(data_dir.join("fulltext"))?;
    let providers = Providers::offline(corpus, ScriptedLlm::new(Default::default()));
    let state = AppState::new(store, providers, cache, Settings::default());
    let ws = state.create_workspace(smiles, expected)?;
    state.run_search(&ws.id)?;
    let ws = state.store.load(&ws.id)?;
    writeln!(
        out,
        "workspace {} with {} papers at {}",
        ws.id,
        ws.papers.len(),
        state.store.path(&ws.id).display()
    )?;
    Ok(())
}

/// One line per decision sequence, best first.
pub fn render_rankings(view: &RankingsView) -> String {
    let mut s = format!(
        "weights steps={} duration={} yield={}\n{:>4}  {:>6}  {:>7}  {:>5}  {:>7}  {:>9}  path\n",
        view.weights.steps(),
        view.weights.duration(),
        view.weights.yield_weight(),
        "rank",
        "leaf",
        "score",
        "steps",
        "yield",
        "hours",
    );
    for r in &view.rankings {
        let path: Vec<String> = r.path.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(
            s,
            "{:>4}  {:>6}  {:>7.4}  {:>5}  {:>7.4}  {:>9.3}  {}",
            r.entry.rank,
            r.entry.leaf,
            r.entry.weighted_score,
            r.entry.raw.steps,
            r.entry.raw.total_yield,
            r.entry.raw.total_duration,
            path.join(">"),
        );
    }
    s
}
