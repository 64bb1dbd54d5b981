//! Molecular graphs: a SMILES-subset reader/writer, a spelling-independent
//! identity hash and circular fingerprints with Tanimoto similarity.
//!
//! The supported grammar covers the organic subset (`B C N O P S F Cl Br I`
//! and aromatic `b c n o p s`), bracket atoms with hydrogen count and charge,
//! explicit bonds `- = # :`, branches, ring closures (`1`..`9`, `%nn`) and
//! dot-disconnected components. Stereo markers (`/ \ @`) and isotope labels
//! are accepted and dropped; the molecule records that it lost them.

mod elements;
mod fingerprint;
mod identity;
mod parser;
mod writer;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use elements::Element;
pub use fingerprint::{fingerprint, tanimoto, Fingerprint, DEFAULT_N_BITS, DEFAULT_RADIUS};
pub use identity::{canonical_key, canonical_key_with, same_molecule, CanonicalKey, WL_ITERATIONS};
pub use parser::parse_smiles;
pub use writer::write_smiles;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    EmptyInput,
    #[error("ring bond {label} opened at position {position} is never closed")]
    UnmatchedRing { label: u32, position: usize },
    #[error("unbalanced parenthesis at position {position}")]
    UnbalancedParen { position: usize },
    #[error("unknown atom symbol '{symbol}' at position {position}")]
    UnknownAtomSymbol { symbol: String, position: usize },
    #[error("unexpected character '{found}' at position {position}")]
    UnexpectedCharacter { found: char, position: usize },
    #[error("bond symbol at position {position} is not followed by an atom")]
    DanglingBond { position: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
    #[error("ring closure at position {position} bonds an atom to itself")]
    SelfBond { position: usize },
    #[error("ring closure {label} has conflicting bond orders")]
    ConflictingRingBond { label: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint length {0} is not a positive power of two")]
    InvalidLength(usize),
    #[error("fingerprint lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub(crate) fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Written in brackets in the source. Bracket atoms carry an explicit
    /// hydrogen count; organic-subset atoms have implicit hydrogens.
    pub bracket: bool,
    pub hydrogens: u8,
}

impl Atom {
    pub fn organic(element: Element, aromatic: bool) -> Atom {
        Atom {
            element,
            aromatic,
            charge: 0,
            bracket: false,
            hydrogens: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A parsed molecular graph.
///
/// Only [`parse_smiles`] builds one, so bond endpoints are always valid,
/// no atom pair is bonded twice and there is at least one atom.
/// Serializes as its source SMILES text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    smiles_source: String,
    stereo_ignored: bool,
    isotopes_ignored: bool,
}

impl Molecule {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn smiles_source(&self) -> &str {
        &self.smiles_source
    }

    /// Stereo markers were present in the source and were dropped.
    pub fn stereo_ignored(&self) -> bool {
        self.stereo_ignored
    }

    pub fn isotopes_ignored(&self) -> bool {
        self.isotopes_ignored
    }

    /// Per-atom list of `(neighbor, bond index)`, ordered by neighbor index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (i, bond) in self.bonds.iter().enumerate() {
            adj[bond.a].push((bond.b, i));
            adj[bond.b].push((bond.a, i));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn element_counts(&self) -> BTreeMap<Element, usize> {
        let mut counts = BTreeMap::new();
        for atom in &self.atoms {
            *counts.entry(atom.element).or_insert(0) += 1;
        }
        counts
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.atoms.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.atoms.len();
        for bond in &self.bonds {
            let (ra, rb) = (find(&mut parent, bond.a), find(&mut parent, bond.b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.smiles_source)
    }
}

impl FromStr for Molecule {
    type Err = SmilesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_smiles(s)
    }
}

impl Serialize for Molecule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.smiles_source)
    }
}

impl<'de> Deserialize<'de> for Molecule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_smiles(&text).map_err(serde::de::Error::custom)
    }
}
