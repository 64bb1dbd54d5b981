//! Weighted multi-criteria scoring of decision sequences.
//!
//! Each criterion is min-max normalized over the candidate set so that 1 is
//! best: yield is a benefit, step count and duration are costs. A criterion
//! with no spread normalizes to 0.5 for everyone.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::route::{DecisionSequence, NodeId};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankingError {
    #[error("no sequences to normalize")]
    EmptyInput,
    #[error("invalid weights (steps {steps}, duration {duration}, yield {yield_}): {reason}")]
    InvalidWeights {
        steps: f64,
        duration: f64,
        yield_: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RawWeights {
    steps: f64,
    duration: f64,
    #[serde(rename = "yield")]
    yield_: f64,
}

/// Weights of the three criteria; each in [0, 1], summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct CriteriaWeights {
    steps: f64,
    duration: f64,
    yield_: f64,
}

impl CriteriaWeights {
    pub fn new(steps: f64, duration: f64, yield_: f64) -> Result<CriteriaWeights, RankingError> {
        let invalid = |reason| RankingError::InvalidWeights {
            steps,
            duration,
            yield_,
            reason,
        };
        let all = [steps, duration, yield_];
        if all.iter().any(|w| !w.is_finite() || !(0.0..=1.0).contains(w)) {
            return Err(invalid("each weight must lie in [0, 1]"));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid("weights must sum to 1"));
        }
        Ok(CriteriaWeights {
            steps,
            duration,
            yield_,
        })
    }

    pub fn steps(&self) -> f64 {
        self.steps
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn yield_weight(&self) -> f64 {
        self.yield_
    }
}

impl Default for CriteriaWeights {
    fn default() -> Self {
        CriteriaWeights {
            steps: 1.0 / 3.0,
            duration: 1.0 / 3.0,
            yield_: 1.0 / 3.0,
        }
    }
}

impl TryFrom<RawWeights> for CriteriaWeights {
    type Error = RankingError;
    fn try_from(w: RawWeights) -> Result<Self, Self::Error> {
        CriteriaWeights::new(w.steps, w.duration, w.yield_)
    }
}

impl From<CriteriaWeights> for RawWeights {
    fn from(w: CriteriaWeights) -> Self {
        RawWeights {
            steps: w.steps,
            duration: w.duration,
            yield_: w.yield_,
        }
    }
}

/// Raw criteria of one decision sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceCriteria {
    pub leaf: NodeId,
    pub steps: u32,
    pub total_yield: f64,
    pub total_duration: f64,
}

impl From<&DecisionSequence> for SequenceCriteria {
    fn from(s: &DecisionSequence) -> Self {
        SequenceCriteria {
            leaf: s.leaf,
            steps: s.steps,
            total_yield: s.total_yield,
            total_duration: s.total_duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCriteria {
    pub steps: f64,
    pub duration: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub leaf: NodeId,
    pub raw: SequenceCriteria,
    pub normalized: NormalizedCriteria,
    pub weighted_score: f64,
    /// 1-based.
    pub rank: usize,
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    values
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn benefit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.5
    }
}

fn cost(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (hi - v) / (hi - lo)
    } else {
        0.5
    }
}

pub fn normalize_criteria(sequences: &[SequenceCriteria]) -> Result<Vec<NormalizedCriteria>, RankingError> {
    if sequences.is_empty() {
        return Err(RankingError::EmptyInput);
    }
    let steps = min_max(sequences.iter().map(|s| s.steps as f64));
    let yields = min_max(sequences.iter().map(|s| s.total_yield));
    let durations = min_max(sequences.iter().map(|s| s.total_duration));
    Ok(sequences
        .iter()
        .map(|s| NormalizedCriteria {
            steps: cost(s.steps as f64, steps),
            duration: cost(s.total_duration, durations),
            yield_: benefit(s.total_yield, yields),
        })
        .collect())
}

/// Scores and orders sequences, best first. Ties on score go to the higher
/// total yield, then the fewer steps, then the smaller leaf id.
pub fn score(sequences: &[SequenceCriteria], weights: &CriteriaWeights) -> Vec<RankEntry> {
    if sequences.is_empty() {
        return Vec::new();
    }
    let normalized = normalize_criteria(sequences).expect("non-empty input");
    let mut entries: Vec<RankEntry> = sequences
        .iter()
        .zip(normalized)
        .map(|(raw, n)| RankEntry {
            leaf: raw.leaf,
            raw: *raw,
            normalized: n,
            weighted_score: weights.steps * n.steps + weights.yield_ * n.yield_ + weights.duration * n.duration,
            rank: 0,
        })
        .collect();
    entries.sort_by(rank_order);
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

fn rank_order(a: &RankEntry, b: &RankEntry) -> Ordering {
    b.weighted_score
        .total_cmp(&a.weighted_score)
        .then_with(|| b.raw.total_yield.total_cmp(&a.raw.total_yield))
        .then_with(|| a.raw.steps.cmp(&b.raw.steps))
        .then_with(|| a.leaf.cmp(&b.leaf))
}
