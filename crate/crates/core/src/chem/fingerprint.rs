use serde::{Deserialize, Serialize};

use super::{FingerprintError, Molecule};
use crate::hash::Fnv64;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_N_BITS: usize = 2048;

/// Folded circular-environment bitset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    n_bits: usize,
    radius: u32,
}

impl Fingerprint {
    pub fn empty(n_bits: usize, radius: u32) -> Result<Fingerprint, FingerprintError> {
        if n_bits == 0 || !n_bits.is_power_of_two() {
            return Err(FingerprintError::InvalidLength(n_bits));
        }
        Ok(Fingerprint {
            words: vec![0; n_bits.div_ceil(64)],
            n_bits,
            radius,
        })
    }

    /// Builds a fingerprint from explicit bit positions (taken mod `n_bits`).
    pub fn from_bits(n_bits: usize, bits: impl IntoIterator<Item = usize>) -> Result<Fingerprint, FingerprintError> {
        let mut fp = Fingerprint::empty(n_bits, 0)?;
        for bit in bits {
            fp.set(bit % n_bits);
        }
        Ok(fp)
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1u64 << (bit % 64);
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.n_bits && self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(|&b| self.contains(b))
    }
}

/// Morgan-style circular fingerprint: every atom environment of radius
/// `0..=radius` is hashed and sets bit `hash mod n_bits`.
pub fn fingerprint(m: &Molecule, radius: u32, n_bits: usize) -> Result<Fingerprint, FingerprintError> {
    let mut fp = Fingerprint::empty(n_bits, radius)?;
    let adj = m.adjacency();

    let mut env: Vec<u64> = m
        .atoms()
        .iter()
        .zip(&adj)
        .map(|(atom, neighbors)| {
            Fnv64::new()
                .u64(atom.element.atomic_number() as u64)
                .u64(atom.aromatic as u64)
                .u64(atom.charge as i64 as u64)
                .u64(atom.hydrogens as u64)
                .u64(neighbors.len() as u64)
                .finish()
        })
        .collect();
    for &h in &env {
        fp.set((h % n_bits as u64) as usize);
    }

    let mut around = Vec::new();
    for r in 1..=radius {
        let next: Vec<u64> = (0..env.len())
            .map(|v| {
                around.clear();
                around.extend(adj[v].iter().map(|&(u, bond)| (m.bonds()[bond].order.code(), env[u])));
                around.sort_unstable();
                let mut h = Fnv64::new().u64(r as u64).u64(env[v]);
                for &(order, code) in &around {
                    h = h.u64(order).u64(code);
                }
                h.finish()
            })
            .collect();
        env = next;
        for &h in &env {
            fp.set((h % n_bits as u64) as usize);
        }
    }
    Ok(fp)
}

/// |A ∩ B| / |A ∪ B|, defined as 1.0 when both sets are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.n_bits != b.n_bits {
        return Err(FingerprintError::LengthMismatch {
            left: a.n_bits,
            right: b.n_bits,
        });
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    if either == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / either as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn fp(s: &str) -> Fingerprint {
        fingerprint(&parse_smiles(s).unwrap(), DEFAULT_RADIUS, DEFAULT_N_BITS).unwrap()
    }

    #[test]
    fn spelling_invariant() {
        assert_eq!(fp("CCO"), fp("OCC"));
        assert_eq!(fp("c1ccccc1C(=O)O"), fp("OC(=O)c1ccccc1"));
    }

    #[test]
    fn single_carbon_radius_zero_sets_one_bit() {
        let f = fingerprint(&parse_smiles("C").unwrap(), 0, 2048).unwrap();
        assert_eq!(f.count_ones(), 1);
    }

    #[test]
    fn invalid_length() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(fingerprint(&m, 2, 1000), Err(FingerprintError::InvalidLength(1000)));
        assert_eq!(fingerprint(&m, 2, 0), Err(FingerprintError::InvalidLength(0)));
        assert!(fingerprint(&m, 2, 32).is_ok());
    }

    #[test]
    fn tanimoto_examples() {
        let a = Fingerprint::from_bits(64, [1, 2, 3]).unwrap();
        let b = Fingerprint::from_bits(64, [2, 3, 4]).unwrap();
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let c = Fingerprint::from_bits(64, [10, 11]).unwrap();
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        let e = Fingerprint::empty(64, 0).unwrap();
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        let long = Fingerprint::empty(128, 0).unwrap();
        assert_eq!(
            tanimoto(&a, &long),
            Err(FingerprintError::LengthMismatch { left: 64, right: 128 })
        );
    }

    #[test]
    fn similar_molecules_score_between_extremes() {
        let s = tanimoto(&fp("CCCCO"), &fp("CCCCN")).unwrap();
        assert!(s > 0.0 && s < 1.0, "{s}");
    }
}
