use std::collections::BTreeSet;

use super::{Atom, BondOrder, Molecule};

#[derive(Clone, Copy)]
struct RingBond {
    bond: usize,
    partner: usize,
    opens: bool,
}

/// Writes `m` as SMILES. The output reparses to an isomorphic graph with the
/// same atom attributes; it is not a canonical spelling.
pub fn write_smiles(m: &Molecule) -> String {
    let adj = m.adjacency();
    let n = m.atom_count();

    // Pass 1: DFS tree, child order and ring-closure (back) edges.
    let mut visited = vec![false; n];
    let mut bond_seen = vec![false; m.bond_count()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut rings: Vec<Vec<RingBond>> = vec![Vec::new(); n];
    let mut roots = Vec::new();

    for start in 0..n {
        if visited[start] {
            continue;
        }
        roots.push(start);
        visited[start] = true;
        // (atom, next adjacency slot)
        let mut stack = vec![(start, 0usize)];
        while let Some(frame) = stack.last_mut() {
            let (atom, slot) = *frame;
            if slot == adj[atom].len() {
                stack.pop();
                continue;
            }
            frame.1 += 1;
            let (next, bond) = adj[atom][slot];
            if bond_seen[bond] {
                continue;
            }
            bond_seen[bond] = true;
            if visited[next] {
                // Back edge to an ancestor: it opens at `next`, which is written first.
                rings[next].push(RingBond {
                    bond,
                    partner: atom,
                    opens: true,
                });
                rings[atom].push(RingBond {
                    bond,
                    partner: next,
                    opens: false,
                });
            } else {
                visited[next] = true;
                children[atom].push((next, bond));
                stack.push((next, 0));
            }
        }
    }

    // Pass 2: emit.
    let mut out = String::new();
    let mut free_labels: BTreeSet<u32> = (1..=99).collect();
    let mut labels = vec![0u32; m.bond_count()];

    for (i, &root) in roots.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        // Explicit stack of work items keeps deep chains off the call stack.
        enum Item {
            Atom { atom: usize, via: Option<usize> },
            Text(&'static str),
        }
        let mut work = vec![Item::Atom { atom: root, via: None }];
        while let Some(item) = work.pop() {
            let (atom, via) = match item {
                Item::Text(t) => {
                    out.push_str(t);
                    continue;
                }
                Item::Atom { atom, via } => (atom, via),
            };
            if let Some(bond) = via {
                let b = m.bonds()[bond];
                out.push_str(bond_symbol(b.order, &m.atoms()[b.a], &m.atoms()[b.b]));
            }
            out.push_str(&atom_text(&m.atoms()[atom]));

            let mut closing: Vec<RingBond> = rings[atom].iter().copied().filter(|r| !r.opens).collect();
            closing.sort_by_key(|r| labels[r.bond]);
            for ring in closing {
                let label = labels[ring.bond];
                push_label(&mut out, label);
                free_labels.insert(label);
            }
            for ring in rings[atom].iter().filter(|r| r.opens) {
                let label = free_labels.pop_first().expect("more than 99 simultaneously open rings");
                labels[ring.bond] = label;
                let b = m.bonds()[ring.bond];
                out.push_str(bond_symbol(b.order, &m.atoms()[atom], &m.atoms()[ring.partner]));
                push_label(&mut out, label);
            }

            let kids = &children[atom];
            if let Some((&(last, last_bond), rest)) = kids.split_last() {
                work.push(Item::Atom {
                    atom: last,
                    via: Some(last_bond),
                });
                for &(child, bond) in rest.iter().rev() {
                    work.push(Item::Text(")"));
                    work.push(Item::Atom {
                        atom: child,
                        via: Some(bond),
                    });
                    work.push(Item::Text("("));
                }
            }
        }
    }
    out
}

fn push_label(out: &mut String, label: u32) {
    if label < 10 {
        out.push(char::from_digit(label, 10).expect("single digit"));
    } else {
        out.push_str(&format!("%{label:02}"));
    }
}

fn bond_symbol(order: BondOrder, a: &Atom, b: &Atom) -> &'static str {
    let both_aromatic = a.aromatic && b.aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn atom_text(atom: &Atom) -> String {
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    let plain = !atom.bracket
        && atom.charge == 0
        && atom.hydrogens == 0
        && atom.element.is_organic_subset()
        && (!atom.aromatic || atom.element.can_be_aromatic());
    if plain {
        return symbol;
    }
    let mut text = format!("[{symbol}");
    match atom.hydrogens {
        0 => {}
        1 => text.push('H'),
        h => text.push_str(&format!("H{h}")),
    }
    match atom.charge {
        0 => {}
        1 => text.push('+'),
        -1 => text.push('-'),
        c if c > 0 => text.push_str(&format!("+{c}")),
        c => text.push_str(&format!("-{}", -(c as i32))),
    }
    text.push(']');
    text
}
