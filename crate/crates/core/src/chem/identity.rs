use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Atom, Molecule};
use crate::hash::Fnv64;

/// Default number of neighborhood-refinement rounds.
pub const WL_ITERATIONS: usize = 8;

/// Spelling-independent identity digest of a molecular graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(pub u64);

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

pub(crate) fn atom_label(atom: &Atom) -> u64 {
    Fnv64::new()
        .u64(atom.element.atomic_number() as u64)
        .u64(atom.aromatic as u64)
        .u64(atom.charge as i64 as u64)
        .u64(atom.bracket as u64)
        .u64(atom.hydrogens as u64)
        .finish()
}

/// Iterative neighborhood hashing (Weisfeiler-Lehman refinement) folded into
/// one digest together with atom, bond and component counts.
pub fn canonical_key(m: &Molecule) -> CanonicalKey {
    canonical_key_with(m, WL_ITERATIONS)
}

pub fn canonical_key_with(m: &Molecule, iterations: usize) -> CanonicalKey {
    let adj = m.adjacency();
    let mut labels: Vec<u64> = m.atoms().iter().map(atom_label).collect();

    let mut digest = Fnv64::new()
        .u64(m.atom_count() as u64)
        .u64(m.bond_count() as u64)
        .u64(m.component_count() as u64);
    digest = fold_sorted(digest, &labels);

    let mut neighborhood = Vec::new();
    for round in 0..iterations {
        let next: Vec<u64> = (0..labels.len())
            .map(|v| {
                neighborhood.clear();
                neighborhood.extend(
                    adj[v]
                        .iter()
                        .map(|&(u, bond)| Fnv64::new().u64(m.bonds()[bond].order.code()).u64(labels[u]).finish()),
                );
                neighborhood.sort_unstable();
                let mut h = Fnv64::new().u64(round as u64).u64(labels[v]);
                for code in &neighborhood {
                    h = h.u64(*code);
                }
                h.finish()
            })
            .collect();
        labels = next;
        digest = fold_sorted(digest, &labels);
    }
    CanonicalKey(digest.finish())
}

fn fold_sorted(mut digest: Fnv64, labels: &[u64]) -> Fnv64 {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    digest = digest.u64(u64::MAX);
    for l in sorted {
        digest = digest.u64(l);
    }
    digest
}

/// Structural identity: equal canonical keys plus equal atom count, bond
/// count and element multiset (guards against digest collisions).
pub fn same_molecule(a: &Molecule, b: &Molecule) -> bool {
    a.atom_count() == b.atom_count()
        && a.bond_count() == b.bond_count()
        && a.element_counts() == b.element_counts()
        && canonical_key(a) == canonical_key(b)
}
