use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synroute_core::chem::{fingerprint, parse_smiles, tanimoto, Molecule};
use synroute_core::route::{Hours, NodeId, ReactionRecord, RouteTree, Yield};

const POOL: [&str; 10] = [
    "CCO",
    "CC=O",
    "CC(=O)O",
    "CC(=O)OC",
    "c1ccccc1",
    "Oc1ccccc1",
    "CC(N)C(=O)O",
    "NCC(=O)O",
    "CCOC(C)=O",
    "ClCCl",
];

fn pool() -> Vec<Molecule> {
    POOL.iter().map(|s| parse_smiles(s).unwrap()).collect()
}

fn random_record(tree: &RouteTree, parent: NodeId, pool: &[Molecule], rng: &mut ChaCha8Rng) -> ReactionRecord {
    let reactant = tree.outgoing_molecule(parent).unwrap().clone();
    let product = pool[rng.random_range(0..pool.len())].clone();
    let y = rng.random_range(0.05..=1.0);
    let h = (rng.random_range(0..=96) as f64) * 0.25;
    ReactionRecord::new(reactant, product, y, h).unwrap()
}

fn random_tree(nodes: usize, seed: u64) -> RouteTree {
    let pool = pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = RouteTree::new(pool[0].clone());
    let mut ids = vec![tree.root()];
    while tree.len() < nodes {
        let parent = ids[rng.random_range(0..ids.len())];
        let rec = random_record(&tree, parent, &pool, &mut rng);
        ids.push(tree.add_reaction(parent, rec, false).unwrap());
    }
    tree
}

/// Totals by walking parent links upward, without the tree's own bookkeeping.
fn path_walk(tree: &RouteTree, id: NodeId) -> (u32, f64, f64) {
    let mut chain = Vec::new();
    let mut cursor = tree.node(id).unwrap();
    while let Some(parent) = cursor.parent {
        chain.push(cursor.reaction.as_ref().unwrap());
        cursor = tree.node(parent).unwrap();
    }
    chain.reverse();
    let steps = chain.len() as u32;
    let y = chain.iter().map(|r| r.yield_fraction.get()).product();
    let d = chain.iter().map(|r| r.duration.get()).sum();
    (steps, y, d)
}

fn assert_totals_match(tree: &RouteTree) {
    for node in tree.nodes() {
        let (steps, y, d) = path_walk(tree, node.id);
        assert_eq!(node.layer, steps);
        assert!(
            (node.total_yield - y).abs() <= 1e-12 * y,
            "{} vs {}",
            node.total_yield,
            y
        );
        assert_eq!(node.total_duration, d);
    }
}

#[test]
fn random_thirty_node_tree_matches_path_walk() {
    let tree = random_tree(30, 7);
    assert_totals_match(&tree);
    let seqs = tree.decision_sequences();
    assert!(!seqs.is_empty());
    for s in &seqs {
        let (steps, y, d) = path_walk(&tree, s.leaf);
        assert_eq!(s.steps, steps);
        assert!((s.total_yield - y).abs() <= 1e-12 * y);
        assert_eq!(s.total_duration, d);
        assert_eq!(s.path.first(), Some(&tree.root()));
        assert_eq!(s.path.last(), Some(&s.leaf));
    }
    let leaves = tree.nodes().filter(|n| n.is_leaf() && !n.is_root()).count();
    assert_eq!(seqs.len(), leaves);
}

#[test]
fn monotone_along_paths() {
    for seed in 0..20 {
        let tree = random_tree(40, seed);
        for node in tree.nodes() {
            if let Some(p) = node.parent {
                let parent = tree.node(p).unwrap();
                assert!(node.total_yield <= parent.total_yield);
                assert!(node.total_duration >= parent.total_duration);
            }
        }
    }
}

fn assert_labels_consecutive(tree: &RouteTree) {
    let mut per_layer: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for node in tree.nodes() {
        let (layer, ordinal) = node.label.split_once('.').unwrap();
        assert_eq!(layer.parse::<u32>().unwrap(), node.layer);
        per_layer.entry(node.layer).or_default().push(ordinal.parse().unwrap());
    }
    for ordinals in per_layer.values_mut() {
        ordinals.sort_unstable();
        assert_eq!(*ordinals, (1..=ordinals.len() as u32).collect::<Vec<_>>());
    }
}

#[test]
fn thousand_random_mutations_leave_no_stale_totals() {
    let pool = pool();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut tree = RouteTree::new(pool[0].clone());
    for _ in 0..1000 {
        let ids: Vec<NodeId> = tree.nodes().map(|n| n.id).collect();
        let pick = ids[rng.random_range(0..ids.len())];
        match rng.random_range(0..10) {
            0..=4 => {
                let rec = random_record(&tree, pick, &pool, &mut rng);
                tree.add_reaction(pick, rec, false).unwrap();
            }
            5 | 6 => {
                if pick != tree.root() {
                    tree.remove_subtree(pick).unwrap();
                }
            }
            7 | 8 => {
                if pick != tree.root() {
                    let y = Yield::new(rng.random_range(0.1..=1.0)).unwrap();
                    let h = Hours::new(rng.random_range(0..40) as f64 * 0.5).unwrap();
                    tree.update_measurements(pick, y, h).unwrap();
                }
            }
            _ => {
                if pick != tree.root() {
                    let _ = tree.add_to_comparison(pick);
                }
            }
        }
        assert!(tree.audit().is_empty());
        assert!(tree.comparison_set().len() <= 5);
        assert!(tree.comparison_set().iter().all(|c| tree.node(*c).is_some()));
    }
    assert_totals_match(&tree);
    assert_labels_consecutive(&tree);
    assert!(tree.validate().is_ok());
}

fn fp(m: &Molecule) -> synroute_core::chem::Fingerprint {
    fingerprint(m, 2, 2048).unwrap()
}

#[test]
fn similarity_marks_match_direct_tanimoto() {
    let tree = random_tree(25, 11);
    let selected = tree.nodes().find(|n| !n.is_root()).unwrap().id;
    let marks = tree.similarity_marks(selected).unwrap();
    let reference = fp(tree.node(selected).unwrap().product().unwrap());
    for node in tree.nodes().filter(|n| !n.is_root()) {
        let expected = tanimoto(&reference, &fp(node.product().unwrap())).unwrap();
        assert_eq!(marks[&node.id], expected);
    }
    assert_eq!(marks.len(), tree.len() - 1);
}

#[test]
fn comparison_matrix_matches_pairwise_oracle() {
    let mut tree = random_tree(25, 5);
    let candidates: Vec<NodeId> = tree.nodes().filter(|n| !n.is_root()).map(|n| n.id).take(4).collect();
    for c in &candidates {
        tree.add_to_comparison(*c).unwrap();
    }
    let m = tree.comparison_matrix();
    let seqs = tree.decision_sequences();
    assert_eq!(m.cells.len(), candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        let a = fp(tree.node(*c).unwrap().product().unwrap());
        for (j, s) in seqs.iter().enumerate() {
            let b = fp(tree.node(s.leaf).unwrap().product().unwrap());
            assert_eq!(m.cells[i][j], tanimoto(&a, &b).unwrap());
        }
    }
}
