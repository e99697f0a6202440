use std::collections::BTreeMap;
use std::sync::Arc;

use crate::calculus::{
    evaluate_round_with, DeviceId, NbrField, SensorSource, SensorState, VTreeEnvironment, Value,
};
use crate::trigger::Trigger;

use super::{
    ExportMessage, LocalStatusField, ProgramNode, ScheduleError, SchedulerInputs,
    SchedulingPredicate, NBR_PREFIX,
};

struct NodeState {
    guard: SchedulingPredicate,
    seen_child_roots: Option<Vec<Option<Value>>>,
    executions: u64,
    children: Vec<NodeState>,
}

impl NodeState {
    fn new(node: &ProgramNode) -> Self {
        Self {
            guard: node.guard.clone(),
            seen_child_roots: None,
            executions: 0,
            children: node.children.iter().map(NodeState::new).collect(),
        }
    }
}

/// Per-device scheduling state, mirroring the application tree: a private
/// copy of every guard, the child roots each guard saw last and the number of
/// times each node executed.
pub struct SchedulerState {
    root: NodeState,
    paths: Arc<BTreeMap<String, Vec<usize>>>,
}

impl SchedulerState {
    pub fn new(tree: &ProgramNode) -> Self {
        Self {
            root: NodeState::new(tree),
            paths: Arc::new(tree.module_paths()),
        }
    }

    /// Executions of the root program.
    pub fn root_executions(&self) -> u64 {
        self.root.executions
    }

    pub fn executions(&self, module: &str) -> Option<u64> {
        let mut node = &self.root;
        for i in self.paths.get(module)? {
            node = &node.children[*i];
        }
        Some(node.executions)
    }
}

/// Builds the predicate inputs of one node. `last_seen` holds the child roots
/// recorded at the node's previous guard evaluation, if any.
pub fn assemble_inputs(
    trigger: &Trigger,
    prev_self_root: Option<&Value>,
    fresh_child_roots: Vec<Option<Value>>,
    last_seen: Option<&[Option<Value>]>,
) -> SchedulerInputs {
    let child_changed = match last_seen {
        None => vec![false; fresh_child_roots.len()],
        Some(seen) => fresh_child_roots
            .iter()
            .zip(seen)
            .map(|(now, before)| now != before)
            .collect(),
    };
    SchedulerInputs {
        trigger: trigger.clone(),
        prev_self_root: prev_self_root.cloned(),
        child_roots: fresh_child_roots,
        child_changed,
    }
}

/// Module outputs exposed to programs as sensors: `<module>` is the local
/// root (fresh if already computed this round), `nbr:<module>` the field of
/// neighbours' roots.
struct Reified<'a> {
    device: DeviceId,
    status: &'a LocalStatusField,
    paths: &'a BTreeMap<String, Vec<usize>>,
    fresh: &'a BTreeMap<String, Value>,
}

impl SensorSource for Reified<'_> {
    fn lookup(&self, name: &str) -> Option<Value> {
        if let Some(module) = name.strip_prefix(NBR_PREFIX) {
            let path = self.paths.get(module)?;
            let mut field = NbrField::new();
            for (d, msg) in self.status {
                if *d == self.device {
                    continue;
                }
                if let Some(root) = msg.at(path).and_then(ExportMessage::root) {
                    field.insert(*d, root.clone()).ok()?;
                }
            }
            return Some(Value::Field(field));
        }
        let path = self.paths.get(name)?;
        self.fresh
            .get(name)
            .cloned()
            .or_else(|| self.status.get(&self.device)?.at(path)?.root().cloned())
    }
}

struct Walk<'a> {
    device: DeviceId,
    status: &'a LocalStatusField,
    sensors: &'a SensorState,
    trigger: &'a Trigger,
    paths: &'a BTreeMap<String, Vec<usize>>,
    fresh: BTreeMap<String, Value>,
}

impl Walk<'_> {
    /// Evaluates `node` given its previous export `own`. Unchanged subtrees
    /// come back as the very same allocation.
    fn node(
        &mut self,
        node: &ProgramNode,
        state: &mut NodeState,
        path: &mut Vec<usize>,
        own: &Arc<ExportMessage>,
    ) -> Result<Arc<ExportMessage>, ScheduleError> {
        let mut children = Vec::with_capacity(node.children.len());
        for (i, (child, cstate)) in node
            .children
            .iter()
            .zip(state.children.iter_mut())
            .enumerate()
        {
            path.push(i);
            children.push(self.node(child, cstate, path, &own.children[i])?);
            path.pop();
        }
        let fresh_roots = children
            .iter()
            .map(|c| c.root().cloned())
            .collect::<Vec<_>>();
        let inputs = assemble_inputs(
            self.trigger,
            own.root(),
            fresh_roots,
            state.seen_child_roots.as_deref(),
        );
        let run = state.guard.decide(&inputs, self.sensors);
        state.seen_child_roots = Some(inputs.child_roots);

        let tree = if run {
            let env: VTreeEnvironment = self
                .status
                .iter()
                .filter_map(|(d, m)| m.at(path).and_then(|m| m.tree.clone()).map(|t| (*d, t)))
                .collect();
            let reified = Reified {
                device: self.device,
                status: self.status,
                paths: self.paths,
                fresh: &self.fresh,
            };
            let theta = evaluate_round_with(
                self.device,
                node.program.as_ref(),
                &env,
                self.sensors,
                Some(&reified),
            )
            .map_err(|source| ScheduleError::Eval {
                module: node.module_id.clone(),
                source,
            })?;
            state.executions += 1;
            self.fresh
                .insert(node.module_id.clone(), theta.root.clone());
            match &own.tree {
                Some(prev) if **prev == theta => Some(Arc::clone(prev)),
                _ => Some(Arc::new(theta)),
            }
        } else {
            own.tree.clone()
        };
        let same_tree = match (&tree, &own.tree) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            (None, None) => true,
            _ => false,
        };
        if same_tree
            && children
                .iter()
                .zip(&own.children)
                .all(|(a, b)| Arc::ptr_eq(a, b))
        {
            return Ok(Arc::clone(own));
        }
        Ok(Arc::new(ExportMessage { tree, children }))
    }
}

/// One round at `device`: children first, then each node's guard decides
/// between re-evaluating its program and reusing its previous tree verbatim.
///
/// `status` must hold shape-conforming messages; the device's own entry (if
/// present) is its previous export. `sensors` must carry the trigger.
pub fn evaluate_program_tree(
    device: DeviceId,
    tree: &ProgramNode,
    state: &mut SchedulerState,
    status: &LocalStatusField,
    sensors: &SensorState,
) -> Result<ExportMessage, ScheduleError> {
    for (d, msg) in status {
        if !msg.matches_shape(tree) {
            return Err(ScheduleError::ShapeMismatch { device: *d });
        }
    }
    let blank = Arc::new(ExportMessage::default_for(tree));
    evaluate_shaped(device, tree, state, status, sensors, &blank).map(Arc::unwrap_or_clone)
}

/// [`evaluate_program_tree`] for a status already known to match the tree
/// shape; `blank` is the empty message of that shape. Returns the previous
/// own export itself when nothing changed.
pub(crate) fn evaluate_shaped(
    device: DeviceId,
    tree: &ProgramNode,
    state: &mut SchedulerState,
    status: &LocalStatusField,
    sensors: &SensorState,
    blank: &Arc<ExportMessage>,
) -> Result<Arc<ExportMessage>, ScheduleError> {
    let Some(trigger) = sensors.trigger() else {
        return Err(ScheduleError::Eval {
            module: tree.module_id.clone(),
            source: crate::calculus::EvalError {
                kind: crate::calculus::FaultKind::SensorNotFound(
                    crate::calculus::TRIGGER.to_owned(),
                ),
                path: None,
            },
        });
    };
    let own = status.get(&device).unwrap_or(blank);
    let paths = Arc::clone(&state.paths);
    let mut walk = Walk {
        device,
        status,
        sensors,
        trigger,
        paths: &paths,
        fresh: BTreeMap::new(),
    };
    walk.node(tree, &mut state.root, &mut Vec::new(), own)
}
