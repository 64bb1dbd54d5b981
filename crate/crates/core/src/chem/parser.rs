use std::collections::{BTreeMap, HashSet};

use super::{Atom, Bond, BondOrder, Element, Molecule, SmilesError};

/// Parses a SMILES string into a [`Molecule`].
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    Parser::new(trimmed).run()
}

#[derive(Clone, Copy)]
struct PendingBond {
    order: BondOrder,
    position: usize,
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    position: usize,
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bonded: HashSet<(usize, usize)>,
    prev: Option<usize>,
    pending: Option<PendingBond>,
    branches: Vec<(usize, usize)>,
    rings: BTreeMap<u32, OpenRing>,
    stereo_ignored: bool,
    isotopes_ignored: bool,
}

impl Parser {
    fn new(text: &str) -> Parser {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            bonded: HashSet::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
            stereo_ignored: false,
            isotopes_ignored: false,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn unexpected(&self, position: usize) -> SmilesError {
        SmilesError::UnexpectedCharacter {
            found: self.chars[position],
            position,
        }
    }

    fn run(mut self) -> Result<Molecule, SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                '(' => {
                    let atom = self.prev.ok_or(SmilesError::UnbalancedParen { position: start })?;
                    if self.pending.is_some() {
                        return Err(self.unexpected(start));
                    }
                    if self.chars.get(start + 1) == Some(&')') {
                        return Err(self.unexpected(start + 1));
                    }
                    self.branches.push((atom, start));
                    self.pos += 1;
                }
                ')' => {
                    if let Some(p) = self.pending {
                        return Err(SmilesError::DanglingBond { position: p.position });
                    }
                    let (atom, _) = self
                        .branches
                        .pop()
                        .ok_or(SmilesError::UnbalancedParen { position: start })?;
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.unexpected(start));
                    }
                    let order = match c {
                        '=' => BondOrder::Double,
                        '#' => BondOrder::Triple,
                        ':' => BondOrder::Aromatic,
                        '/' | '\\' => {
                            self.stereo_ignored = true;
                            BondOrder::Single
                        }
                        _ => BondOrder::Single,
                    };
                    self.pending = Some(PendingBond { order, position: start });
                    self.pos += 1;
                }
                '.' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.unexpected(start));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                '0'..='9' | '%' => self.ring_closure()?,
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.push_atom(atom)?;
                }
            }
        }

        if let Some(p) = self.pending {
            return Err(SmilesError::DanglingBond { position: p.position });
        }
        if let Some(&(_, position)) = self.branches.last() {
            return Err(SmilesError::UnbalancedParen { position });
        }
        if let Some((&label, open)) = self.rings.iter().next() {
            return Err(SmilesError::UnmatchedRing {
                label,
                position: open.position,
            });
        }

        Ok(Molecule {
            atoms: self.atoms,
            bonds: self.bonds,
            smiles_source: self.chars.iter().collect(),
            stereo_ignored: self.stereo_ignored,
            isotopes_ignored: self.isotopes_ignored,
        })
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<(), SmilesError> {
        let pair = (a.min(b), a.max(b));
        if !self.bonded.insert(pair) {
            return Err(SmilesError::DuplicateBond { a: pair.0, b: pair.1 });
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let index = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some(p) => p.order,
                None => self.default_order(prev, index),
            };
            self.add_bond(prev, index, order)?;
        } else if let Some(p) = self.pending {
            return Err(SmilesError::DanglingBond { position: p.position });
        }
        self.prev = Some(index);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let label = if self.peek() == Some('%') {
            let digits: String = [self.peek_at(1), self.peek_at(2)]
                .iter()
                .map_while(|c| c.filter(char::is_ascii_digit))
                .collect();
            if digits.len() != 2 {
                return Err(self.unexpected(start));
            }
            self.pos += 3;
            digits.parse::<u32>().expect("two ascii digits")
        } else {
            let d = self.peek().and_then(|c| c.to_digit(10)).expect("digit");
            self.pos += 1;
            d
        };
        let atom = self.prev.ok_or_else(|| self.unexpected(start))?;
        let pending = self.pending.take().map(|p| p.order);

        match self.rings.remove(&label) {
            None => {
                self.rings.insert(
                    label,
                    OpenRing {
                        atom,
                        order: pending,
                        position: start,
                    },
                );
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(SmilesError::SelfBond { position: start });
                }
                let order = match (open.order, pending) {
                    (Some(a), Some(b)) if a != b => return Err(SmilesError::ConflictingRingBond { label }),
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.default_order(open.atom, atom),
                };
                self.add_bond(open.atom, atom, order)?;
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.chars[start];
        let next = self.peek_at(1);
        let (symbol, aromatic, len) = match (c, next) {
            ('C', Some('l')) => ("Cl".to_string(), false, 2),
            ('B', Some('r')) => ("Br".to_string(), false, 2),
            ('B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I', _) => (c.to_string(), false, 1),
            ('b' | 'c' | 'n' | 'o' | 'p' | 's', _) => (c.to_string(), true, 1),
            (c, _) if c.is_ascii_alphabetic() || c == '*' => {
                return Err(SmilesError::UnknownAtomSymbol {
                    symbol: c.to_string(),
                    position: start,
                })
            }
            _ => return Err(self.unexpected(start)),
        };
        let element = Element::from_symbol(&capitalize(&symbol)).expect("organic subset symbol");
        self.pos += len;
        Ok(Atom::organic(element, aromatic))
    }

    fn chars_str(&self, start: usize, len: usize) -> String {
        self.chars[start..start + len].iter().collect()
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;

        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.isotopes_ignored = true;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }

        let (element, aromatic) = self.bracket_symbol()?;

        if self.peek() == Some('@') {
            self.stereo_ignored = true;
            while self.peek() == Some('@') {
                self.pos += 1;
            }
            // Extended chirality classes such as @TH1 or @SP2.
            if self.peek().is_some_and(|c| c.is_ascii_uppercase())
                && self.peek_at(1).is_some_and(|c| c.is_ascii_uppercase())
            {
                self.pos += 2;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }

        let mut hydrogens = 0u8;
        if self.peek() == Some('H') {
            self.pos += 1;
            hydrogens = self.read_number().unwrap_or(1).min(u8::MAX as u32) as u8;
        }

        let mut charge: i32 = 0;
        while let Some(sign @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let unit = if sign == '+' { 1 } else { -1 };
            match self.read_number() {
                Some(n) => charge += unit * n as i32,
                None => charge += unit,
            }
        }

        if self.peek() == Some(':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(self.unexpected(self.pos.min(self.chars.len() - 1)));
            }
        }

        match self.peek() {
            Some(']') => self.pos += 1,
            Some(_) => return Err(self.unexpected(self.pos)),
            None => {
                return Err(SmilesError::UnknownAtomSymbol {
                    symbol: self.chars[open..].iter().collect(),
                    position: open,
                })
            }
        }

        Ok(Atom {
            element,
            aromatic,
            charge: charge.clamp(i8::MIN as i32, i8::MAX as i32) as i8,
            bracket: true,
            hydrogens,
        })
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool), SmilesError> {
        let start = self.pos;
        let first = self.peek().ok_or(SmilesError::UnknownAtomSymbol {
            symbol: String::new(),
            position: start,
        })?;
        if first.is_ascii_uppercase() {
            if let Some(second) = self.peek_at(1).filter(char::is_ascii_lowercase) {
                let two: String = [first, second].iter().collect();
                if let Some(e) = Element::from_symbol(&two) {
                    self.pos += 2;
                    return Ok((e, false));
                }
            }
            if let Some(e) = Element::from_symbol(&first.to_string()) {
                self.pos += 1;
                return Ok((e, false));
            }
        } else if first.is_ascii_lowercase() {
            for len in [2, 1] {
                if start + len > self.chars.len() {
                    continue;
                }
                let text = self.chars_str(start, len);
                if !text.chars().all(|c| c.is_ascii_lowercase()) {
                    continue;
                }
                if let Some(e) = Element::from_symbol(&capitalize(&text)) {
                    if e.can_be_aromatic() {
                        self.pos += len;
                        return Ok((e, true));
                    }
                }
            }
        }
        let symbol: String = self.chars[start..]
            .iter()
            .take_while(|c| c.is_ascii_alphabetic())
            .collect();
        Err(SmilesError::UnknownAtomSymbol {
            symbol: if symbol.is_empty() { first.to_string() } else { symbol },
            position: start,
        })
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| {
            self.chars[start..self.pos]
                .iter()
                .collect::<String>()
                .parse()
                .unwrap_or(u32::MAX)
        })
    }
}

fn capitalize(symbol: &str) -> String {
    let mut chars = symbol.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symbols(m: &Molecule) -> Vec<&'static str> {
        m.atoms().iter().map(|a| a.element.symbol()).collect()
    }

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(symbols(&m), ["C", "C", "O"]);
        assert_eq!(m.bond_count(), 2);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Single));
    }

    #[test]
    fn cyclopropane_ring_closure() {
        let m = parse_smiles("C1CC1").unwrap();
        assert_eq!(m.atom_count(), 3);
        assert_eq!(m.bond_count(), 3);
        assert!(m.adjacency().iter().all(|n| n.len() == 2));
    }

    #[test]
    fn benzene_is_aromatic() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic && a.element == Element::C));
        assert_eq!(m.bond_count(), 6);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
    }

    #[test]
    fn unmatched_ring() {
        assert_eq!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnmatchedRing { label: 1, position: 1 })
        );
    }

    #[test]
    fn parens() {
        assert!(matches!(parse_smiles("CC(C"), Err(SmilesError::UnbalancedParen { .. })));
        assert!(matches!(parse_smiles("CC)C"), Err(SmilesError::UnbalancedParen { .. })));
        assert!(matches!(parse_smiles("(C)C"), Err(SmilesError::UnbalancedParen { .. })));
        let m = parse_smiles("CC(C)(C)O").unwrap();
        assert_eq!(m.adjacency()[1].len(), 4);
    }

    #[test]
    fn unknown_symbols() {
        assert!(matches!(
            parse_smiles("CXC"),
            Err(SmilesError::UnknownAtomSymbol { position: 1, .. })
        ));
        assert!(matches!(
            parse_smiles("[Xx]"),
            Err(SmilesError::UnknownAtomSymbol { .. })
        ));
        assert!(matches!(parse_smiles("[C"), Err(SmilesError::UnknownAtomSymbol { .. })));
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_smiles(""), Err(SmilesError::EmptyInput));
        assert_eq!(parse_smiles("   "), Err(SmilesError::EmptyInput));
    }

    #[test]
    fn bond_orders_and_halogens() {
        let m = parse_smiles("C#CC=CCCl").unwrap();
        let orders: Vec<_> = m.bonds().iter().map(|b| b.order).collect();
        assert_eq!(
            orders,
            [
                BondOrder::Triple,
                BondOrder::Single,
                BondOrder::Double,
                BondOrder::Single,
                BondOrder::Single
            ]
        );
        assert_eq!(m.atoms()[5].element.symbol(), "Cl");
        let m = parse_smiles("BrCBr").unwrap();
        assert_eq!(symbols(&m), ["Br", "C", "Br"]);
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[NH4+]").unwrap();
        let a = m.atoms()[0];
        assert!(a.bracket);
        assert_eq!((a.element.symbol(), a.hydrogens, a.charge), ("N", 4, 1));

        let m = parse_smiles("[O-]C(=O)C").unwrap();
        assert_eq!(m.atoms()[0].charge, -1);

        let m = parse_smiles("[Fe+++]").unwrap();
        assert_eq!(m.atoms()[0].charge, 3);
        let m = parse_smiles("[Cu+2]").unwrap();
        assert_eq!(m.atoms()[0].charge, 2);

        let m = parse_smiles("c1cc[nH]c1").unwrap();
        assert!(m.atoms()[3].aromatic && m.atoms()[3].hydrogens == 1);
        let m = parse_smiles("[se]1cccc1").unwrap();
        assert_eq!(m.atoms()[0].element.symbol(), "Se");
    }

    #[test]
    fn stereo_and_isotopes_are_dropped_with_flag() {
        let m = parse_smiles("F/C=C/F").unwrap();
        assert!(m.stereo_ignored());
        assert_eq!(m.bond_count(), 3);
        let m = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert!(m.stereo_ignored());
        assert_eq!(m.atoms()[1].hydrogens, 1);
        let m = parse_smiles("[13CH4]").unwrap();
        assert!(m.isotopes_ignored());
        assert!(!parse_smiles("CCO").unwrap().stereo_ignored());
    }

    #[test]
    fn percent_ring_labels_and_explicit_ring_bonds() {
        let m = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(m.bond_count(), 3);
        let m = parse_smiles("C=1CC1").unwrap();
        assert_eq!(m.bonds().last().unwrap().order, BondOrder::Double);
        let m = parse_smiles("C1CC=1").unwrap();
        assert_eq!(m.bonds().last().unwrap().order, BondOrder::Double);
        assert_eq!(
            parse_smiles("C=1CC#1"),
            Err(SmilesError::ConflictingRingBond { label: 1 })
        );
    }

    #[test]
    fn ring_labels_can_be_reused() {
        let m = parse_smiles("C1CC1C1CC1").unwrap();
        assert_eq!(m.bond_count(), 7);
    }

    #[test]
    fn dot_separated_components() {
        let m = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(m.atom_count(), 2);
        assert_eq!(m.bond_count(), 0);
        assert_eq!(m.component_count(), 2);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_smiles("CC="), Err(SmilesError::DanglingBond { .. })));
        assert!(matches!(parse_smiles("C(=)C"), Err(SmilesError::DanglingBond { .. })));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::SelfBond { .. })));
        assert!(matches!(
            parse_smiles("C12CC12"),
            Err(SmilesError::DuplicateBond { .. })
        ));
        assert!(matches!(
            parse_smiles("C()C"),
            Err(SmilesError::UnexpectedCharacter { .. })
        ));
        assert!(matches!(
            parse_smiles("=C"),
            Err(SmilesError::UnexpectedCharacter { .. })
        ));
        assert!(matches!(
            parse_smiles("C..C"),
            Err(SmilesError::UnexpectedCharacter { .. })
        ));
        assert!(matches!(
            parse_smiles("1CC"),
            Err(SmilesError::UnexpectedCharacter { .. })
        ));
        assert!(matches!(
            parse_smiles("C%1C"),
            Err(SmilesError::UnexpectedCharacter { .. })
        ));
        assert!(matches!(
            parse_smiles("C C"),
            Err(SmilesError::UnexpectedCharacter { .. })
        ));
    }

    #[test]
    fn source_text_is_kept() {
        let m = parse_smiles("  CCO ").unwrap();
        assert_eq!(m.smiles_source(), "CCO");
    }
}
