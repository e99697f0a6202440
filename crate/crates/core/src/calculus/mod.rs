//! Field calculus round semantics.
//!
//! Programs are Rust closures over a [`RoundContext`]; each construct call
//! (`rep`, `nbr`, `share`, `branch`, `fold_hood`, ...) appends a node to the
//! value tree under construction. Alignment between devices follows the tree
//! path: a neighbour's previous tree contributes to a construct only if it has a
//! node with the same tag at the same child index at every level above it.

mod context;
mod error;
mod sensors;
mod tree;
mod value;

pub use context::{
    evaluate_round, evaluate_round_with, fold_hood, program, FieldProgram, Program, RoundContext,
    SensorSource,
};
pub use error::{EvalError, FaultKind, TreePath, TypeError};
pub use sensors::{SensorState, TRIGGER};
pub use tree::{Tag, VTreeEnvironment, ValueTree};
pub use value::{DeviceId, NbrField, Value};
