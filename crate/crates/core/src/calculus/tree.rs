use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::value::{DeviceId, Value};

/// Construct that produced a value tree node. Branch nodes record the arm taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Rep,
    Nbr,
    Share,
    Branch { taken: bool },
    Fold,
    Literal,
    Apply,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Rep => write!(f, "rep"),
            Tag::Nbr => write!(f, "nbr"),
            Tag::Share => write!(f, "share"),
            Tag::Branch { taken } => write!(f, "branch({taken})"),
            Tag::Fold => write!(f, "fold"),
            Tag::Literal => write!(f, "literal"),
            Tag::Apply => write!(f, "apply"),
        }
    }
}

/// Tree of values mirroring the unfolding of one round's evaluation.
///
/// For `nbr` nodes the root is the local value offered to neighbours; for
/// every other node it is the value the construct evaluated to.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTree {
    pub root: Value,
    pub tag: Tag,
    pub children: Vec<ValueTree>,
}

impl ValueTree {
    pub fn leaf(root: Value, tag: Tag) -> Self {
        Self {
            root,
            tag,
            children: Vec::new(),
        }
    }

    /// Same tags and arity at every level (values may differ).
    pub fn same_shape(&self, other: &ValueTree) -> bool {
        self.tag == other.tag
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(ValueTree::node_count)
            .sum::<usize>()
    }
}

/// Latest value tree of each neighbour, the device's own previous tree included.
pub type VTreeEnvironment = BTreeMap<DeviceId, Arc<ValueTree>>;
