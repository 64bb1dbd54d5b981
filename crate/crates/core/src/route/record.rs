use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::Molecule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("yield {0} is outside (0, 1]")]
    InvalidYield(f64),
    #[error("duration {0} h is negative or not finite")]
    InvalidDuration(f64),
    #[error("difficulty tier {0} is outside 1..=3")]
    InvalidTier(u8),
}

/// Reaction yield as a fraction in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Yield(f64);

impl Yield {
    pub fn new(fraction: f64) -> Result<Yield, RecordError> {
        if fraction.is_finite() && fraction > 0.0 && fraction <= 1.0 {
            Ok(Yield(fraction))
        } else {
            Err(RecordError::InvalidYield(fraction))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Yield {
    type Error = RecordError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Yield::new(v)
    }
}

impl From<Yield> for f64 {
    fn from(y: Yield) -> f64 {
        y.0
    }
}

/// Duration in decimal hours.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hours(f64);

impl Hours {
    pub fn new(hours: f64) -> Result<Hours, RecordError> {
        if hours.is_finite() && hours >= 0.0 {
            Ok(Hours(hours))
        } else {
            Err(RecordError::InvalidDuration(hours))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Hours {
    type Error = RecordError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Hours::new(v)
    }
}

impl From<Hours> for f64 {
    fn from(h: Hours) -> f64 {
        h.0
    }
}

/// Difficulty tier: 1 = challenging, 2 = moderate, 3 = simple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Tier(u8);

impl Tier {
    pub const CHALLENGING: Tier = Tier(1);
    pub const MODERATE: Tier = Tier(2);
    pub const SIMPLE: Tier = Tier(3);

    pub fn new(value: u8) -> Result<Tier, RecordError> {
        if (1..=3).contains(&value) {
            Ok(Tier(value))
        } else {
            Err(RecordError::InvalidTier(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Tier {
    type Error = RecordError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Tier::new(v)
    }
}

impl From<Tier> for u8 {
    fn from(t: Tier) -> u8 {
        t.0
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.0 {
            1 => "challenging",
            2 => "moderate",
            _ => "simple",
        };
        f.write_str(name)
    }
}

/// Expert rating of a procedure along three aspects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyAnnotation {
    pub material: Tier,
    pub operation: Tier,
    pub equipment: Tier,
    #[serde(default)]
    pub note: String,
}

/// One extracted synthetic reaction on the main chain of a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub reactant: Molecule,
    pub product: Molecule,
    #[serde(default)]
    pub solvent: String,
    #[serde(default)]
    pub reagent: String,
    #[serde(default)]
    pub catalysts: String,
    #[serde(default)]
    pub instruments: String,
    #[serde(default)]
    pub operation: String,
    #[serde(default)]
    pub purification: String,
    pub duration: Hours,
    #[serde(rename = "yield")]
    pub yield_fraction: Yield,
    #[serde(default)]
    pub source_doi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_relevancy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<DifficultyAnnotation>,
}

impl ReactionRecord {
    /// A record with the measured quantities set and every text field empty.
    pub fn new(
        reactant: Molecule,
        product: Molecule,
        yield_fraction: f64,
        duration_hours: f64,
    ) -> Result<ReactionRecord, RecordError> {
        Ok(ReactionRecord {
            reactant,
            product,
            solvent: String::new(),
            reagent: String::new(),
            catalysts: String::new(),
            instruments: String::new(),
            operation: String::new(),
            purification: String::new(),
            duration: Hours::new(duration_hours)?,
            yield_fraction: Yield::new(yield_fraction)?,
            source_doi: String::new(),
            context_relevancy: None,
            difficulty: None,
        })
    }
}
