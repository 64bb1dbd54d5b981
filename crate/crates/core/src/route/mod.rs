//! Decision-sequence tree: the root is the starting molecule, every other
//! node is a reaction whose reactant is its parent's product.

mod record;
mod tree;

pub use record::{DifficultyAnnotation, Hours, ReactionRecord, RecordError, Tier, Yield};
pub use tree::{ComparisonMatrix, DecisionSequence, NodeId, RouteError, RouteNode, RouteTree, MAX_COMPARISON};
