use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{DifficultyAnnotation, Hours, ReactionRecord, Yield};
use crate::chem::{fingerprint, same_molecule, tanimoto, Fingerprint, Molecule, DEFAULT_N_BITS, DEFAULT_RADIUS};

/// Most nodes the comparison set may hold.
pub const MAX_COMPARISON: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("parent node {0} does not exist")]
    ParentNotFound(NodeId),
    #[error("node {0} does not exist")]
    NodeNotFound(NodeId),
    #[error("reactant {found} is not the product {expected} of node {parent}")]
    ReactantMismatch {
        parent: NodeId,
        expected: String,
        found: String,
    },
    #[error("the root node cannot be removed")]
    CannotRemoveRoot,
    #[error("the root node has no product")]
    RootHasNoProduct,
    #[error("comparison set already holds {MAX_COMPARISON} nodes")]
    ComparisonFull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteNode {
    pub id: NodeId,
    /// `None` only for the root, which stands for the starting molecule.
    pub reaction: Option<ReactionRecord>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub layer: u32,
    pub total_yield: f64,
    pub total_duration: f64,
    /// "layer.ordinal", the ordinal counting nodes of one layer top to bottom.
    pub label: String,
    /// The reactant was accepted without matching the parent's product.
    #[serde(default)]
    pub chain_override: bool,
}

impl RouteNode {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn product(&self) -> Option<&Molecule> {
        self.reaction.as_ref().map(|r| &r.product)
    }
}

/// One root-to-leaf path: a candidate synthetic route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSequence {
    pub leaf: NodeId,
    /// Node ids from the root to the leaf, both included.
    pub path: Vec<NodeId>,
    pub steps: u32,
    pub total_yield: f64,
    pub total_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    /// Row order: the comparison set.
    pub comparison_nodes: Vec<NodeId>,
    /// Column order: leaves of [`RouteTree::decision_sequences`].
    pub sequence_leaves: Vec<NodeId>,
    /// `cells[i][j]`: similarity of comparison node `i`'s product to the
    /// final product of sequence `j`.
    pub cells: Vec<Vec<f64>>,
}

/// Tree of decision sequences grown from a starting molecule.
///
/// Totals, layers and labels are derived data; every mutation recomputes
/// them for the whole tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTree {
    root_molecule: Molecule,
    root: NodeId,
    nodes: BTreeMap<NodeId, RouteNode>,
    comparison_set: Vec<NodeId>,
    next_id: u64,
}

impl RouteTree {
    pub fn new(start: Molecule) -> RouteTree {
        let root = NodeId(0);
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            RouteNode {
                id: root,
                reaction: None,
                parent: None,
                children: Vec::new(),
                layer: 0,
                total_yield: 1.0,
                total_duration: 0.0,
                label: "0.1".to_string(),
                chain_override: false,
            },
        );
        RouteTree {
            root_molecule: start,
            root,
            nodes,
            comparison_set: Vec::new(),
            next_id: 1,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_molecule(&self) -> &Molecule {
        &self.root_molecule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node(&self, id: NodeId) -> Option<&RouteNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &RouteNode> {
        self.nodes.values()
    }

    pub fn comparison_set(&self) -> &[NodeId] {
        &self.comparison_set
    }

    /// The molecule a child of `id` must start from: the root's starting
    /// molecule, or the node's product.
    pub fn outgoing_molecule(&self, id: NodeId) -> Option<&Molecule> {
        let node = self.nodes.get(&id)?;
        match &node.reaction {
            None => Some(&self.root_molecule),
            Some(r) => Some(&r.product),
        }
    }

    pub fn add_reaction(
        &mut self,
        parent: NodeId,
        reaction: ReactionRecord,
        allow_mismatch: bool,
    ) -> Result<NodeId, RouteError> {
        let expected = self
            .outgoing_molecule(parent)
            .ok_or(RouteError::ParentNotFound(parent))?;
        let matches = same_molecule(&reaction.reactant, expected);
        if !matches && !allow_mismatch {
            return Err(RouteError::ReactantMismatch {
                parent,
                expected: expected.smiles_source().to_string(),
                found: reaction.reactant.smiles_source().to_string(),
            });
        }

        let id = NodeId(self.next_id);
        self.next_id += 1;
        let parent_layer = self.nodes[&parent].layer;
        self.nodes.insert(
            id,
            RouteNode {
                id,
                reaction: Some(reaction),
                parent: Some(parent),
                children: Vec::new(),
                layer: parent_layer + 1,
                total_yield: 0.0,
                total_duration: 0.0,
                label: String::new(),
                chain_override: !matches,
            },
        );
        self.nodes
            .get_mut(&parent)
            .expect("parent checked above")
            .children
            .push(id);
        self.refresh();
        Ok(id)
    }

    /// Removes `id` and all of its descendants; returns how many nodes went.
    pub fn remove_subtree(&mut self, id: NodeId) -> Result<usize, RouteError> {
        let node = self.nodes.get(&id).ok_or(RouteError::NodeNotFound(id))?;
        let parent = node.parent.ok_or(RouteError::CannotRemoveRoot)?;

        let doomed = self.subtree(id);
        for n in &doomed {
            self.nodes.remove(n);
        }
        if let Some(p) = self.nodes.get_mut(&parent) {
            p.children.retain(|c| *c != id);
        }
        self.comparison_set.retain(|c| !doomed.contains(c));
        self.refresh();
        Ok(doomed.len())
    }

    pub fn set_difficulty(&mut self, id: NodeId, difficulty: DifficultyAnnotation) -> Result<(), RouteError> {
        let node = self.nodes.get_mut(&id).ok_or(RouteError::NodeNotFound(id))?;
        let reaction = node.reaction.as_mut().ok_or(RouteError::RootHasNoProduct)?;
        reaction.difficulty = Some(difficulty);
        Ok(())
    }

    /// Replaces the measured yield and duration of a node, e.g. after the
    /// chemist corrects an extracted value.
    pub fn update_measurements(
        &mut self,
        id: NodeId,
        yield_fraction: Yield,
        duration: Hours,
    ) -> Result<(), RouteError> {
        let node = self.nodes.get_mut(&id).ok_or(RouteError::NodeNotFound(id))?;
        let reaction = node.reaction.as_mut().ok_or(RouteError::RootHasNoProduct)?;
        reaction.yield_fraction = yield_fraction;
        reaction.duration = duration;
        self.refresh();
        Ok(())
    }

    /// Pre-order ids of the subtree rooted at `id`.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if let Some(node) = self.nodes.get(&n) {
                out.push(n);
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Ids from the root down to `id`, both included.
    pub fn path_to(&self, id: NodeId) -> Result<Vec<NodeId>, RouteError> {
        let mut path = Vec::new();
        let mut cursor = Some(id);
        while let Some(n) = cursor {
            let node = self.nodes.get(&n).ok_or(RouteError::NodeNotFound(n))?;
            path.push(n);
            cursor = node.parent;
        }
        path.reverse();
        Ok(path)
    }

    fn refresh(&mut self) {
        let order = self.subtree(self.root);
        let mut per_layer: HashMap<u32, u32> = HashMap::new();
        for id in order {
            let (layer, total_yield, total_duration) = {
                let node = &self.nodes[&id];
                match (node.parent, &node.reaction) {
                    (Some(p), Some(r)) => {
                        let parent = &self.nodes[&p];
                        (
                            parent.layer + 1,
                            parent.total_yield * r.yield_fraction.get(),
                            parent.total_duration + r.duration.get(),
                        )
                    }
                    _ => (0, 1.0, 0.0),
                }
            };
            let ordinal = per_layer.entry(layer).or_insert(0);
            *ordinal += 1;
            let node = self.nodes.get_mut(&id).expect("id from traversal");
            node.layer = layer;
            node.total_yield = total_yield;
            node.total_duration = total_duration;
            node.label = format!("{layer}.{ordinal}");
        }
    }

    /// Nodes whose stored totals or layer disagree with a fresh walk from
    /// the root. Empty for any tree built through the public API.
    pub fn audit(&self) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|node| {
                let Ok(path) = self.path_to(node.id) else {
                    return true;
                };
                let (mut y, mut d) = (1.0f64, 0.0f64);
                for step in &path[1..] {
                    let r = self.nodes[step].reaction.as_ref();
                    let Some(r) = r else { return true };
                    y *= r.yield_fraction.get();
                    d += r.duration.get();
                }
                node.layer as usize != path.len() - 1 || node.total_yield != y || node.total_duration != d
            })
            .map(|n| n.id)
            .collect()
    }

    /// One entry per leaf that carries a reaction, in pre-order.
    pub fn decision_sequences(&self) -> Vec<DecisionSequence> {
        self.subtree(self.root)
            .into_iter()
            .filter_map(|id| {
                let node = &self.nodes[&id];
                if node.is_root() || !node.is_leaf() {
                    return None;
                }
                Some(DecisionSequence {
                    leaf: id,
                    path: self.path_to(id).expect("node from traversal"),
                    steps: node.layer,
                    total_yield: node.total_yield,
                    total_duration: node.total_duration,
                })
            })
            .collect()
    }

    fn product_fingerprint(&self, id: NodeId) -> Result<Fingerprint, RouteError> {
        let node = self.nodes.get(&id).ok_or(RouteError::NodeNotFound(id))?;
        let product = node.product().ok_or(RouteError::RootHasNoProduct)?;
        Ok(default_fingerprint(product))
    }

    /// Product similarity of every non-root node to the selected node.
    pub fn similarity_marks(&self, selected: NodeId) -> Result<BTreeMap<NodeId, f64>, RouteError> {
        let reference = self.product_fingerprint(selected)?;
        Ok(self
            .nodes
            .values()
            .filter_map(|node| {
                let fp = default_fingerprint(node.product()?);
                Some((node.id, similarity(&reference, &fp)))
            })
            .collect())
    }

    /// Adds a node to the comparison set; adding a member again is a no-op.
    pub fn add_to_comparison(&mut self, id: NodeId) -> Result<(), RouteError> {
        let node = self.nodes.get(&id).ok_or(RouteError::NodeNotFound(id))?;
        if node.is_root() {
            return Err(RouteError::RootHasNoProduct);
        }
        if self.comparison_set.contains(&id) {
            return Ok(());
        }
        if self.comparison_set.len() >= MAX_COMPARISON {
            return Err(RouteError::ComparisonFull);
        }
        self.comparison_set.push(id);
        Ok(())
    }

    pub fn remove_from_comparison(&mut self, id: NodeId) -> bool {
        let before = self.comparison_set.len();
        self.comparison_set.retain(|c| *c != id);
        before != self.comparison_set.len()
    }

    pub fn comparison_matrix(&self) -> ComparisonMatrix {
        let sequences = self.decision_sequences();
        let leaf_prints: Vec<Fingerprint> = sequences
            .iter()
            .map(|s| self.product_fingerprint(s.leaf).expect("leaves carry reactions"))
            .collect();
        let cells = self
            .comparison_set
            .iter()
            .map(|&c| {
                let fp = self.product_fingerprint(c).expect("comparison nodes carry reactions");
                leaf_prints.iter().map(|l| similarity(&fp, l)).collect()
            })
            .collect();
        ComparisonMatrix {
            comparison_nodes: self.comparison_set.clone(),
            sequence_leaves: sequences.iter().map(|s| s.leaf).collect(),
            cells,
        }
    }

    /// Structural checks for trees that arrive from outside (e.g. a
    /// deserialized workspace): one root, consistent parent/child links,
    /// no cycles, chain reactants matching unless overridden, fresh totals.
    pub fn validate(&self) -> Result<(), String> {
        let roots: Vec<_> = self.nodes.values().filter(|n| n.is_root()).collect();
        if roots.len() != 1 || roots[0].id != self.root {
            return Err("tree must have exactly one root".into());
        }
        let reachable = self.subtree(self.root);
        if reachable.len() != self.nodes.len() {
            return Err("tree has unreachable nodes or cycles".into());
        }
        for node in self.nodes.values() {
            if let Some(p) = node.parent {
                let parent = self.nodes.get(&p).ok_or("dangling parent link")?;
                if !parent.children.contains(&node.id) {
                    return Err(format!("node {} missing from its parent's children", node.id));
                }
                let reaction = node.reaction.as_ref().ok_or("non-root node without reaction")?;
                let expected = self.outgoing_molecule(p).expect("parent exists");
                if !node.chain_override && !same_molecule(&reaction.reactant, expected) {
                    return Err(format!("node {} breaks the reactant chain", node.id));
                }
            }
            if node.id.0 >= self.next_id && !node.is_root() {
                return Err("node id beyond allocator".into());
            }
        }
        if self.comparison_set.len() > MAX_COMPARISON || self.comparison_set.iter().any(|c| !self.nodes.contains_key(c))
        {
            return Err("invalid comparison set".into());
        }
        if !self.audit().is_empty() {
            return Err("stale totals".into());
        }
        Ok(())
    }
}

fn default_fingerprint(m: &Molecule) -> Fingerprint {
    fingerprint(m, DEFAULT_RADIUS, DEFAULT_N_BITS).expect("default length is a power of two")
}

fn similarity(a: &Fingerprint, b: &Fingerprint) -> f64 {
    tanimoto(a, b).expect("fingerprints share the default length")
}
