//! Scheduler trees: field programs arranged as a tree whose nodes are each
//! gated by a local predicate over the trigger, the node's previous output and
//! its children's fresh outputs.

mod guard;
mod round;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::calculus::{program, DeviceId, EvalError, Program, Value, ValueTree};
use crate::num::low_pass;

pub use guard::{
    always, any_child_changed, child_true, first_run, from_fn, moved_at_least, never, reactive,
    reactive_parsed, sensor_changed, timer, Guard, SchedulerInputs, SchedulingPredicate, POSITION,
    TIME,
};
pub(crate) use round::evaluate_shaped;
pub use round::{assemble_inputs, evaluate_program_tree, SchedulerState};

/// Prefix of the reified sensor giving the neighbours' roots of a module.
pub const NBR_PREFIX: &str = "nbr:";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("duplicate module id `{0}`")]
    DuplicateModule(String),
    #[error("status entry of {device} does not match the application tree shape")]
    ShapeMismatch { device: DeviceId },
    #[error("invalid guard: {0}")]
    InvalidGuard(String),
    #[error("module `{module}`: {source}")]
    Eval {
        module: String,
        #[source]
        source: EvalError,
    },
}

/// A field program, its gating predicate and the programs it depends on.
#[derive(Clone)]
pub struct ProgramNode {
    pub module_id: String,
    pub program: Program,
    pub children: Vec<ProgramNode>,
    pub guard: SchedulingPredicate,
}

impl std::fmt::Debug for ProgramNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProgramNode")
            .field("module_id", &self.module_id)
            .field("children", &self.children)
            .finish_non_exhaustive()
    }
}

impl ProgramNode {
    pub fn new(module_id: &str, program: Program, guard: SchedulingPredicate) -> Self {
        Self {
            module_id: module_id.to_owned(),
            program,
            children: Vec::new(),
            guard,
        }
    }

    pub fn with_child(mut self, child: ProgramNode) -> Self {
        self.children.push(child);
        self
    }

    /// Module ids in pre-order.
    pub fn module_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |n| out.push(n.module_id.as_str()));
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ProgramNode)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(ProgramNode::node_count)
            .sum::<usize>()
    }

    /// Rejects duplicate module ids.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let mut seen = BTreeSet::new();
        for id in self.module_ids() {
            if !seen.insert(id) {
                return Err(ScheduleError::DuplicateModule(id.to_owned()));
            }
        }
        Ok(())
    }

    /// Child-index path from this node to every module, keyed by id.
    pub fn module_paths(&self) -> BTreeMap<String, Vec<usize>> {
        fn walk(node: &ProgramNode, path: &mut Vec<usize>, out: &mut BTreeMap<String, Vec<usize>>) {
            out.insert(node.module_id.clone(), path.clone());
            for (i, c) in node.children.iter().enumerate() {
                path.push(i);
                walk(c, path, out);
                path.pop();
            }
        }
        let mut out = BTreeMap::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Same tree with every guard replaced by a clone of `guard`.
    pub fn with_uniform_guard(&self, guard: &SchedulingPredicate) -> ProgramNode {
        ProgramNode {
            module_id: self.module_id.clone(),
            program: self.program.clone(),
            children: self
                .children
                .iter()
                .map(|c| c.with_uniform_guard(guard))
                .collect(),
            guard: guard.clone(),
        }
    }
}

/// Exported message: one optional value tree per program node, mirroring
/// the application tree. `None` marks a node that never produced a tree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExportMessage {
    pub tree: Option<Arc<ValueTree>>,
    pub children: Vec<Arc<ExportMessage>>,
}

impl ExportMessage {
    /// The empty message shaped like `node`.
    pub fn default_for(node: &ProgramNode) -> Self {
        Self {
            tree: None,
            children: node
                .children
                .iter()
                .map(|c| Arc::new(Self::default_for(c)))
                .collect(),
        }
    }

    pub fn root(&self) -> Option<&Value> {
        self.tree.as_ref().map(|t| &t.root)
    }

    pub fn matches_shape(&self, node: &ProgramNode) -> bool {
        self.children.len() == node.children.len()
            && self
                .children
                .iter()
                .zip(&node.children)
                .all(|(m, n)| m.matches_shape(n))
    }

    /// Sub-message at a child-index path.
    pub fn at(&self, path: &[usize]) -> Option<&ExportMessage> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children.get(*i)?.at(rest),
        }
    }

    fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    /// Pre-order indices of the nodes whose root differs between `self` and
    /// `other`, which must share a shape.
    pub fn changed_roots(&self, other: &ExportMessage) -> Vec<usize> {
        fn walk(a: &ExportMessage, b: &ExportMessage, next: &mut usize, out: &mut Vec<usize>) {
            if std::ptr::eq(a, b) {
                *next += a.size();
                return;
            }
            let same = match (&a.tree, &b.tree) {
                (Some(x), Some(y)) => Arc::ptr_eq(x, y) || x.root == y.root,
                (None, None) => true,
                _ => false,
            };
            if !same {
                out.push(*next);
            }
            *next += 1;
            for (x, y) in a.children.iter().zip(&b.children) {
                walk(x, y, next, out);
            }
        }
        let mut out = Vec::new();
        walk(self, other, &mut 0, &mut out);
        out
    }

    /// Node roots in pre-order, aligned with [`ProgramNode::module_ids`].
    pub fn roots_preorder(&self) -> Vec<Option<&Value>> {
        let mut out = vec![self.root()];
        for c in &self.children {
            out.extend(c.roots_preorder());
        }
        out
    }
}

/// Local status field: the latest export known from each neighbour, the
/// device's own included.
pub type LocalStatusField = BTreeMap<DeviceId, Arc<ExportMessage>>;

/// One step of the smoothed change detector: returns the new `(filtered,
/// reference)` state and whether it fired.
pub fn filtered_change_step(
    state: Option<(f64, f64)>,
    input: f64,
    alpha: f64,
    threshold: f64,
) -> ((f64, f64), bool) {
    match state {
        None => ((input, input), false),
        Some((s, reference)) => {
            let s = low_pass(s, input, alpha);
            if (s - reference).abs() > threshold {
                ((s, s), true)
            } else {
                ((s, reference), false)
            }
        }
    }
}

/// Node outputting `true` when the low-pass filtered value of sensor `input`
/// strays more than `threshold` from its value at the last `true` output.
pub fn changed_filtered(
    module_id: &str,
    input: &str,
    threshold: f64,
    alpha: f64,
    guard: SchedulingPredicate,
) -> Result<ProgramNode, ScheduleError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ScheduleError::InvalidGuard(format!(
            "low-pass alpha must be in (0, 1], got {alpha}"
        )));
    }
    let input = input.to_owned();
    let prog = program(move |ctx| {
        let x = ctx.sense_number(&input)?;
        let state = ctx.rep(
            || Value::tuple([]),
            |ctx, prev| {
                let prev = prev.as_tuple().map_err(|e| ctx.fault(e))?;
                let prior = match prev {
                    [s, r, _] => Some((
                        s.as_number().map_err(|e| ctx.fault(e))?,
                        r.as_number().map_err(|e| ctx.fault(e))?,
                    )),
                    _ => None,
                };
                let ((s, r), fired) = filtered_change_step(prior, x, alpha, threshold);
                Ok(Value::tuple([s.into(), r.into(), fired.into()]))
            },
        )?;
        Ok(state.get(2)?.clone())
    });
    Ok(ProgramNode::new(module_id, prog, guard))
}
