//! Precision, recall and F1 of predicted reactions against adjudicated annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonical_key, parse_smiles, same_molecule, CanonicalKey, Element, Molecule};

/// Largest accepted yield difference for a match.
pub const YIELD_TOLERANCE: f64 = 0.005;
/// Tool name for prediction lines that do not carry one.
pub const DEFAULT_TOOL: &str = "synroute";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unparseable molecule {smiles:?}")]
    UnparseableMolecule { smiles: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("annotation for {paper}: {reason}")]
    InvalidGold { paper: String, reason: String },
    #[error("paper {0} annotated twice")]
    DuplicatePaper(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// One reaction as reactant and product SMILES sets plus a yield fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionTriple {
    pub reactants: Vec<String>,
    pub products: Vec<String>,
    #[serde(rename = "yield")]
    pub yield_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub paper_id: String,
    pub reactions: Vec<ReactionTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub paper_id: String,
    #[serde(default = "default_tool")]
    pub tool: String,
    pub reactions: Vec<ReactionTriple>,
}

fn default_tool() -> String {
    DEFAULT_TOOL.to_string()
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Parses a gold file: one annotation per line, each with at least one
/// reaction and yields in (0, 1].
pub fn parse_gold(text: &str) -> Result<Vec<GoldAnnotation>, EvalError> {
    let golds: Vec<GoldAnnotation> = parse_lines(text)?;
    let mut seen = BTreeSet::new();
    for g in &golds {
        if !seen.insert(g.paper_id.clone()) {
            return Err(EvalError::DuplicatePaper(g.paper_id.clone()));
        }
        if g.reactions.is_empty() {
            return Err(EvalError::InvalidGold {
                paper: g.paper_id.clone(),
                reason: "no reactions".into(),
            });
        }
        if let Some(r) = g
            .reactions
            .iter()
            .find(|r| !(r.yield_fraction > 0.0 && r.yield_fraction <= 1.0))
        {
            return Err(EvalError::InvalidGold {
                paper: g.paper_id.clone(),
                reason: format!("yield {} outside (0, 1]", r.yield_fraction),
            });
        }
    }
    Ok(golds)
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionSet>, EvalError> {
    parse_lines(text)
}

fn parse_all(smiles: &[String]) -> Result<Vec<Molecule>, EvalError> {
    smiles
        .iter()
        .map(|s| parse_smiles(s).map_err(|_| EvalError::UnparseableMolecule { smiles: s.clone() }))
        .collect()
}

/// Multiset equality under [`same_molecule`].
fn same_set(a: &[Molecule], b: &[Molecule]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|x| {
        let hit = b
            .iter()
            .enumerate()
            .find(|(j, y)| !used[*j] && same_molecule(x, y))
            .map(|(j, _)| j);
        if let Some(j) = hit {
            used[j] = true;
        }
        hit.is_some()
    })
}

/// True when reactant and product sets agree molecule for molecule and the
/// yields differ by at most [`YIELD_TOLERANCE`].
pub fn match_extraction(pred: &ReactionTriple, gold: &ReactionTriple) -> Result<bool, EvalError> {
    let pr = parse_all(&pred.reactants)?;
    let pp = parse_all(&pred.products)?;
    let gr = parse_all(&gold.reactants)?;
    let gp = parse_all(&gold.products)?;
    let yield_ok = (pred.yield_fraction - gold.yield_fraction).abs() <= YIELD_TOLERANCE + 1e-12;
    Ok(yield_ok && same_set(&pr, &gr) && same_set(&pp, &gp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalMetrics {
    /// Ratios with zero denominators mapped to 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> EvalMetrics {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalMetrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: EvalMetrics,
    /// SMILES that failed to parse; their reactions count as non-matches.
    pub unparseable: Vec<String>,
}

/// What [`same_molecule`] compares, computed once per molecule.
type Identity = (usize, usize, BTreeMap<Element, usize>, CanonicalKey);

fn identity(smiles: &str) -> Result<Identity, String> {
    let m = parse_smiles(smiles).map_err(|_| smiles.to_string())?;
    Ok((m.atom_count(), m.bond_count(), m.element_counts(), canonical_key(&m)))
}

struct PreparedTriple {
    reactants: Vec<Identity>,
    products: Vec<Identity>,
    yield_fraction: f64,
}

impl PreparedTriple {
    fn matches(&self, gold: &PreparedTriple) -> bool {
        (self.yield_fraction - gold.yield_fraction).abs() <= YIELD_TOLERANCE + 1e-12
            && self.reactants == gold.reactants
            && self.products == gold.products
    }
}

struct Prepared {
    /// Order-independent: canonical keys of each side, then the yield.
    sort_key: (Vec<String>, Vec<String>, u64),
    /// Both sides as sorted identities, or the first SMILES that failed to parse.
    sides: Result<PreparedTriple, String>,
}

fn prepare(r: &ReactionTriple) -> Prepared {
    let ids = |side: &[String]| -> Vec<Result<Identity, String>> { side.iter().map(|s| identity(s)).collect() };
    let keys = |ids: &[Result<Identity, String>]| {
        let mut keys: Vec<String> = ids
            .iter()
            .map(|id| match id {
                Ok(id) => id.3.to_string(),
                Err(s) => format!("!{s}"),
            })
            .collect();
        keys.sort();
        keys
    };
    let sorted = |ids: Vec<Result<Identity, String>>| -> Result<Vec<Identity>, String> {
        let mut ids = ids.into_iter().collect::<Result<Vec<_>, _>>()?;
        ids.sort();
        Ok(ids)
    };
    let (reactants, products) = (ids(&r.reactants), ids(&r.products));
    let sort_key = (keys(&reactants), keys(&products), r.yield_fraction.to_bits());
    let sides = sorted(reactants).and_then(|reactants| {
        Ok(PreparedTriple {
            reactants,
            products: sorted(products)?,
            yield_fraction: r.yield_fraction,
        })
    });
    Prepared { sort_key, sides }
}

/// Greedy one-to-one matching per paper. Predictions and annotations are
/// sorted by content first so the result does not depend on input order.
pub fn evaluate(preds: &[PredictionSet], golds: &[GoldAnnotation]) -> EvalReport {
    let mut by_paper: BTreeMap<&str, (Vec<&ReactionTriple>, Vec<&ReactionTriple>)> = BTreeMap::new();
    for p in preds {
        by_paper.entry(&p.paper_id).or_default().0.extend(&p.reactions);
    }
    for g in golds {
        by_paper.entry(&g.paper_id).or_default().1.extend(&g.reactions);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut unparseable = BTreeSet::new();
    for (_, (p, g)) in by_paper {
        let mut p: Vec<Prepared> = p.into_iter().map(prepare).collect();
        let mut g: Vec<Prepared> = g.into_iter().map(prepare).collect();
        p.sort_by(|a, b| a.sort_key.cmp(&b.sort_key));
        g.sort_by(|a, b| a.sort_key.cmp(&b.sort_key));
        let mut used = vec![false; g.len()];
        for pred in p {
            let mut hit = None;
            for (j, gold) in g.iter().enumerate() {
                if used[j] {
                    continue;
                }
                match (&pred.sides, &gold.sides) {
                    (Err(smiles), _) | (_, Err(smiles)) => {
                        unparseable.insert(smiles.clone());
                    }
                    (Ok(a), Ok(b)) if a.matches(b) => {
                        hit = Some(j);
                        break;
                    }
                    _ => {}
                }
            }
            match hit {
                Some(j) => {
                    used[j] = true;
                    tp += 1;
                }
                None => fp += 1,
            }
        }
        fn_ += used.iter().filter(|u| !**u).count();
    }
    EvalReport {
        metrics: EvalMetrics::from_counts(tp, fp, fn_),
        unparseable: unparseable.into_iter().collect(),
    }
}

/// Evaluates each tool's predictions separately, in tool-name order.
pub fn evaluate_by_tool(preds: &[PredictionSet], golds: &[GoldAnnotation]) -> Vec<(String, EvalReport)> {
    let mut tools: BTreeMap<&str, Vec<PredictionSet>> = BTreeMap::new();
    for p in preds {
        tools.entry(&p.tool).or_default().push(p.clone());
    }
    tools
        .into_iter()
        .map(|(tool, ps)| (tool.to_string(), evaluate(&ps, golds)))
        .collect()
}

/// Plain-text table with columns tool, precision, recall and f1.
pub fn render_table(rows: &[(String, EvalMetrics)]) -> String {
    let width = rows.iter().map(|(t, _)| t.len()).max().unwrap_or(0).max(4);
    let mut out = format!("{:<width$}  {:>9}  {:>6}  {:>5}\n", "tool", "precision", "recall", "f1");
    for (tool, m) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.3}  {:>6.3}  {:>5.3}",
            tool, m.precision, m.recall, m.f1
        );
    }
    out
}

/// CSV with header `tool,precision,recall,f1`, values to three decimals.
pub fn render_csv(rows: &[(String, EvalMetrics)]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| EvalError::Csv(e.to_string());
    w.write_record(["tool", "precision", "recall", "f1"]).map_err(err)?;
    for (tool, m) in rows {
        w.write_record([
            tool.clone(),
            format!("{:.3}", m.precision),
            format!("{:.3}", m.recall),
            format!("{:.3}", m.f1),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Csv(e.to_string()))
}
