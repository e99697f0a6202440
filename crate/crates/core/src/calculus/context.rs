use std::sync::Arc;

use super::error::{EvalError, FaultKind, TreePath, TypeError};
use super::sensors::{SensorState, TRIGGER};
use super::tree::{Tag, VTreeEnvironment, ValueTree};
use super::value::{DeviceId, NbrField, Value};

/// A field program: evaluated once per round against a [`RoundContext`].
pub trait FieldProgram: Send + Sync {
    fn eval(&self, ctx: &mut RoundContext<'_>) -> Result<Value, EvalError>;
}

impl<F> FieldProgram for F
where
    F: Fn(&mut RoundContext<'_>) -> Result<Value, EvalError> + Send + Sync,
{
    fn eval(&self, ctx: &mut RoundContext<'_>) -> Result<Value, EvalError> {
        self(ctx)
    }
}

/// Shared handle to a field program.
pub type Program = Arc<dyn FieldProgram>;

/// Wraps a closure as a [`Program`].
pub fn program<F>(f: F) -> Program
where
    F: Fn(&mut RoundContext<'_>) -> Result<Value, EvalError> + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Extra read-only sensors resolved lazily (used by the scheduler to expose
/// other modules' outputs under their module names).
pub trait SensorSource {
    fn lookup(&self, name: &str) -> Option<Value>;
}

struct Frame<'a> {
    tag: Tag,
    children: Vec<ValueTree>,
    /// Previous trees (own included) that reached this node with identical tags.
    aligned: Vec<(DeviceId, &'a ValueTree)>,
}

/// Evaluation state of one round at one device.
///
/// Every construct call appends a child to the node under construction, so the
/// tree path (tag and child index per level) is fully determined by program
/// order and taken branches. A fault aborts the round: a program that catches
/// an [`EvalError`] and keeps going produces a tree that no longer aligns.
pub struct RoundContext<'a> {
    self_id: DeviceId,
    sensors: &'a SensorState,
    extra: Option<&'a dyn SensorSource>,
    stack: Vec<Frame<'a>>,
}

impl<'a> RoundContext<'a> {
    fn new(
        self_id: DeviceId,
        env: &'a VTreeEnvironment,
        sensors: &'a SensorState,
        extra: Option<&'a dyn SensorSource>,
    ) -> Self {
        let aligned = env
            .iter()
            .filter(|(_, t)| t.tag == Tag::Apply)
            .map(|(d, t)| (*d, t.as_ref()))
            .collect();
        Self {
            self_id,
            sensors,
            extra,
            stack: vec![Frame {
                tag: Tag::Apply,
                children: Vec::new(),
                aligned,
            }],
        }
    }

    pub fn self_id(&self) -> DeviceId {
        self.self_id
    }

    /// Current position in the tree being built.
    pub fn path(&self) -> TreePath {
        let mut steps = Vec::with_capacity(self.stack.len());
        for (depth, frame) in self.stack.iter().enumerate().skip(1) {
            let index = self.stack[depth - 1].children.len();
            steps.push((frame.tag, index));
        }
        TreePath(steps)
    }

    /// Fault at the current position.
    pub fn fault(&self, kind: impl Into<FaultKind>) -> EvalError {
        EvalError {
            kind: kind.into(),
            path: Some(self.path()),
        }
    }

    /// Reads a sensor; absence is a fault.
    pub fn sense(&self, name: &str) -> Result<Value, EvalError> {
        if let Some(v) = self.sensors.get(name) {
            return Ok(v.clone());
        }
        self.extra
            .and_then(|s| s.lookup(name))
            .ok_or_else(|| self.fault(FaultKind::SensorNotFound(name.to_owned())))
    }

    pub fn sense_number(&self, name: &str) -> Result<f64, EvalError> {
        self.sense(name)?.as_number().map_err(|e| self.fault(e))
    }

    fn enter(&mut self, tag: Tag) {
        let parent = self.stack.last().expect("root frame always present");
        let index = parent.children.len();
        let aligned = parent
            .aligned
            .iter()
            .filter_map(|(d, t)| {
                t.children
                    .get(index)
                    .filter(|c| c.tag == tag)
                    .map(|c| (*d, c))
            })
            .collect();
        self.stack.push(Frame {
            tag,
            children: Vec::new(),
            aligned,
        });
    }

    fn exit(&mut self, root: Value) {
        let frame = self.stack.pop().expect("exit matches enter");
        let node = ValueTree {
            root,
            tag: frame.tag,
            children: frame.children,
        };
        self.stack
            .last_mut()
            .expect("root frame always present")
            .children
            .push(node);
    }

    fn abort(&mut self, mut err: EvalError) -> EvalError {
        if err.path.is_none() {
            err.path = Some(self.path());
        }
        self.stack.pop();
        err
    }

    /// Runs `body` inside a freshly entered node, closing it with the value
    /// chosen by `root_of`.
    fn scoped<R>(
        &mut self,
        tag: Tag,
        body: impl FnOnce(&mut Self) -> Result<R, EvalError>,
        root_of: impl FnOnce(&R) -> Value,
    ) -> Result<R, EvalError> {
        self.enter(tag);
        match body(self) {
            Ok(r) => {
                let root = root_of(&r);
                self.exit(root);
                Ok(r)
            }
            Err(e) => Err(self.abort(e)),
        }
    }

    fn own_aligned(&self) -> Option<&'a ValueTree> {
        let frame = self.stack.last().expect("inside a construct");
        frame
            .aligned
            .iter()
            .find(|(d, _)| *d == self.self_id)
            .map(|(_, t)| *t)
    }

    fn neighbour_roots(&self) -> impl Iterator<Item = (DeviceId, &'a ValueTree)> + '_ {
        let me = self.self_id;
        self.stack
            .last()
            .expect("inside a construct")
            .aligned
            .iter()
            .filter(move |(d, _)| *d != me)
            .copied()
    }

    /// `rep(x <- initial) { update(x) }`: `x` is the previous aligned result of
    /// this very node on this device, or `initial()` when there is none.
    pub fn rep(
        &mut self,
        initial: impl FnOnce() -> Value,
        update: impl FnOnce(&mut Self, Value) -> Result<Value, EvalError>,
    ) -> Result<Value, EvalError> {
        self.scoped(
            Tag::Rep,
            |ctx| {
                let previous = ctx
                    .own_aligned()
                    .map(|t| t.root.clone())
                    .unwrap_or_else(initial);
                update(ctx, previous)
            },
            Clone::clone,
        )
    }

    /// `nbr(e)`: offers `local` to neighbours and returns the field of aligned
    /// neighbours' offers, with the fresh local value under the own key.
    pub fn nbr(
        &mut self,
        local: impl FnOnce(&mut Self) -> Result<Value, EvalError>,
    ) -> Result<Value, EvalError> {
        let mut field = None;
        self.scoped(
            Tag::Nbr,
            |ctx| {
                let v = local(ctx)?;
                let mut f = NbrField::new();
                for (d, t) in ctx.neighbour_roots() {
                    f.insert(d, t.root.clone())?;
                }
                f.insert(ctx.self_id, v.clone())?;
                field = Some(f);
                Ok(v)
            },
            Clone::clone,
        )?;
        Ok(Value::Field(field.expect("set on success")))
    }

    /// `share(x <- initial) { update(x) }`: `update` receives the field of
    /// aligned neighbours' previous results plus the device's own previous
    /// result (or `initial()`); its result is what neighbours read next.
    pub fn share(
        &mut self,
        initial: impl FnOnce() -> Value,
        update: impl FnOnce(&mut Self, Value) -> Result<Value, EvalError>,
    ) -> Result<Value, EvalError> {
        self.scoped(
            Tag::Share,
            |ctx| {
                let mut f = NbrField::new();
                for (d, t) in ctx.neighbour_roots() {
                    f.insert(d, t.root.clone())?;
                }
                let own = ctx
                    .own_aligned()
                    .map(|t| t.root.clone())
                    .unwrap_or_else(initial);
                f.insert(ctx.self_id, own)?;
                let out = update(ctx, Value::Field(f))?;
                if matches!(out, Value::Field(_)) {
                    return Err(TypeError::NestedField.into());
                }
                Ok(out)
            },
            Clone::clone,
        )
    }

    /// Domain-segmenting conditional: exactly one arm runs, and only devices
    /// that took the same arm align inside it.
    pub fn branch(
        &mut self,
        cond: bool,
        then: impl FnOnce(&mut Self) -> Result<Value, EvalError>,
        otherwise: impl FnOnce(&mut Self) -> Result<Value, EvalError>,
    ) -> Result<Value, EvalError> {
        self.scoped(
            Tag::Branch { taken: cond },
            |ctx| if cond { then(ctx) } else { otherwise(ctx) },
            Clone::clone,
        )
    }

    /// Recorded [`fold_hood`].
    pub fn fold_hood(
        &mut self,
        field: &Value,
        base: Value,
        combine: impl FnMut(Value, &Value) -> Result<Value, TypeError>,
    ) -> Result<Value, EvalError> {
        self.scoped(
            Tag::Fold,
            |_| Ok(fold_hood(field, base, combine)?),
            Clone::clone,
        )
    }

    /// Records a literal leaf and returns it.
    pub fn literal(&mut self, value: Value) -> Result<Value, EvalError> {
        self.scoped(Tag::Literal, |_| Ok(value), Clone::clone)
    }

    /// Function application scope: constructs inside `body` become children of one node.
    pub fn apply(
        &mut self,
        body: impl FnOnce(&mut Self) -> Result<Value, EvalError>,
    ) -> Result<Value, EvalError> {
        self.scoped(Tag::Apply, body, Clone::clone)
    }
}

/// Left fold over a neighbouring field in ascending device order.
pub fn fold_hood(
    field: &Value,
    base: Value,
    mut combine: impl FnMut(Value, &Value) -> Result<Value, TypeError>,
) -> Result<Value, TypeError> {
    field
        .as_field()?
        .iter()
        .try_fold(base, |acc, (_, v)| combine(acc, v))
}

/// Evaluates `program` at `device` for one round.
///
/// `env` holds the latest tree of each neighbour and the device's own previous
/// tree; `sensors` must carry the round's trigger.
pub fn evaluate_round(
    device: DeviceId,
    program: &dyn FieldProgram,
    env: &VTreeEnvironment,
    sensors: &SensorState,
) -> Result<ValueTree, EvalError> {
    evaluate_round_with(device, program, env, sensors, None)
}

/// [`evaluate_round`] with an additional lazily resolved sensor source.
pub fn evaluate_round_with(
    device: DeviceId,
    program: &dyn FieldProgram,
    env: &VTreeEnvironment,
    sensors: &SensorState,
    extra: Option<&dyn SensorSource>,
) -> Result<ValueTree, EvalError> {
    if sensors.trigger().is_none() {
        return Err(EvalError {
            kind: FaultKind::SensorNotFound(TRIGGER.to_owned()),
            path: Some(TreePath::default()),
        });
    }
    let mut ctx = RoundContext::new(device, env, sensors, extra);
    let root = program.eval(&mut ctx)?;
    let frame = ctx.stack.pop().expect("root frame");
    debug_assert!(ctx.stack.is_empty(), "unbalanced construct scopes");
    Ok(ValueTree {
        root,
        tag: Tag::Apply,
        children: frame.children,
    })
}
