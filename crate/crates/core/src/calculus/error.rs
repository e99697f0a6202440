use std::fmt;

use thiserror::Error;

use super::tree::Tag;

/// Failure of a value operation, independent of where it happened.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("expected {expected}, found {found}")]
    Mismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("neighbouring fields cannot nest")]
    NestedField,
    #[error("tuple index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("{0}")]
    Domain(String),
}

/// Position of a node in a value tree: one `(tag, child index)` step per level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreePath(pub Vec<(Tag, usize)>);

impl fmt::Display for TreePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/")?;
        for (i, (tag, idx)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "/")?;
            }
            write!(f, "{tag}#{idx}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultKind {
    #[error("sensor `{0}` not found")]
    SensorNotFound(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Evaluation fault raised during a round, carrying the tree path where it occurred.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation fault at {}: {kind}", .path.as_ref().map(ToString::to_string).unwrap_or_else(|| "?".into()))]
pub struct EvalError {
    pub kind: FaultKind,
    pub path: Option<TreePath>,
}

impl EvalError {
    pub fn new(kind: FaultKind) -> Self {
        Self { kind, path: None }
    }
}

impl From<TypeError> for EvalError {
    fn from(e: TypeError) -> Self {
        EvalError::new(FaultKind::Type(e))
    }
}
