//! Application trees of the scenarios, in their time-fluid form. The classic
//! form is the same tree with a 1 s timer on every node.

use crate::blocks::{broadcast_along, channel_member, distance_to, nbr_range};
use crate::calculus::{program, EvalError, NbrField, RoundContext, Value};
use crate::netsim::NEIGHBOURS;
use crate::scheduler::{
    always, any_child_changed, first_run, moved_at_least, reactive, timer, ProgramNode,
    SchedulingPredicate, NBR_PREFIX, POSITION,
};
use crate::trigger::TriggerPattern;

use super::{Algorithm, ExperimentError};

/// Module ids of one gradient subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientModules {
    pub root: String,
    pub position: String,
    pub neighbours: String,
    pub nbr_change: String,
}

impl GradientModules {
    pub fn new(root: &str) -> Self {
        Self {
            root: root.to_owned(),
            position: format!("{root}.position"),
            neighbours: format!("{root}.neighbours"),
            nbr_change: format!("{root}.nbr_change"),
        }
    }
}

/// Module ids of the channel tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelModules;

impl ChannelModules {
    pub const ROOT: &'static str = "channel";
    pub const GRADIENT_A: &'static str = "gradient_a";
    pub const GRADIENT_B: &'static str = "gradient_b";
    pub const BETWEEN: &'static str = "distance_between";
    pub const ENDPOINTS: &'static str = "distance_between.endpoints";
    pub const BETWEEN_CHANGE: &'static str = "distance_between.nbr_change";
    /// Static sensors flagging the two endpoints.
    pub const SOURCE_A: &'static str = "a";
    pub const SOURCE_B: &'static str = "b";
}

fn reified_number(ctx: &RoundContext<'_>, module: &str) -> Result<f64, EvalError> {
    match ctx.sense(module) {
        Ok(v) => v.as_number().map_err(|e| ctx.fault(e)),
        Err(_) => Ok(f64::INFINITY),
    }
}

fn flag(ctx: &RoundContext<'_>, name: &str) -> Result<bool, EvalError> {
    ctx.sense(name)?.as_bool().map_err(|e| ctx.fault(e))
}

/// Whether `current` differs from `last` by a new or lost key, or by at
/// least `epsilon` on some key. Equal values (infinities included) never differ.
fn differs(last: &[(u32, f64)], current: &[(u32, f64)], epsilon: f64) -> bool {
    last.len() != current.len()
        || last
            .iter()
            .zip(current)
            .any(|((ka, a), (kb, b))| ka != kb || (a != b && !((a - b).abs() < epsilon)))
}

fn encode(pairs: &[(u32, f64)]) -> Value {
    Value::tuple(
        pairs
            .iter()
            .flat_map(|(k, v)| [Value::Number(f64::from(*k)), Value::Number(*v)]),
    )
}

fn decode(ctx: &RoundContext<'_>, v: &Value) -> Result<Vec<(u32, f64)>, EvalError> {
    let items = v.as_tuple().map_err(|e| ctx.fault(e))?;
    items
        .chunks(2)
        .map(|c| match c {
            [Value::Number(k), Value::Number(x)] => Ok((*k as u32, *x)),
            _ => Err(ctx.fault(crate::calculus::TypeError::Domain(
                "malformed change record".into(),
            ))),
        })
        .collect()
}

/// Node counting the ε-significant changes of the neighbours' roots of
/// `watched` (plus the edge length when `add_range`), excluding the device
/// itself. The count changes exactly when the watched neighbourhood view does.
pub fn neighbour_change_counter(
    module_id: &str,
    watched: &str,
    epsilon: f64,
    add_range: bool,
    guard: SchedulingPredicate,
) -> ProgramNode {
    let sensor = format!("{NBR_PREFIX}{watched}");
    let prog = program(move |ctx| {
        let field = ctx.sense(&sensor)?;
        let field: NbrField = field.as_field().map_err(|e| ctx.fault(e))?.clone();
        let range = if add_range {
            Some(nbr_range(ctx)?)
        } else {
            None
        };
        let mut current = Vec::with_capacity(field.len());
        for (d, v) in field.iter() {
            let mut x = v.as_number().map_err(|e| ctx.fault(e))?;
            if let Some(r) = &range {
                let Some(edge) = r.as_field().map_err(|e| ctx.fault(e))?.get(d) else {
                    continue;
                };
                x += edge.as_number().map_err(|e| ctx.fault(e))?;
            }
            current.push((d.0, x));
        }
        let state = ctx.rep(
            || Value::tuple([Value::Number(0.0), Value::tuple([])]),
            |ctx, prev| {
                let last = decode(ctx, prev.get(1).map_err(|e| ctx.fault(e))?)?;
                if differs(&last, &current, epsilon) {
                    let count = prev
                        .get(0)
                        .and_then(Value::as_number)
                        .map_err(|e| ctx.fault(e))?;
                    Ok(Value::tuple([Value::Number(count + 1.0), encode(&current)]))
                } else {
                    Ok(prev)
                }
            },
        )?;
        Ok(state.get(0).map_err(|e| ctx.fault(e))?.clone())
    });
    ProgramNode::new(module_id, prog, guard)
}

fn message_guard(modules: &[&str]) -> SchedulingPredicate {
    let patterns = modules
        .iter()
        .flat_map(|m| [TriggerPattern::received(m), TriggerPattern::timeout(m)])
        .collect();
    reactive(patterns)
}

/// Gradient from the devices whose boolean sensor `source` is set, named
/// `module` with leaves watching position, neighbourhood and neighbours'
/// gradients.
pub fn gradient_tree(
    module: &str,
    source: &str,
    epsilon: f64,
) -> Result<ProgramNode, ExperimentError> {
    let ids = GradientModules::new(module);
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(ExperimentError::InvalidSpec(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    let position = ProgramNode::new(
        &ids.position,
        program(|ctx| ctx.sense(POSITION)),
        moved_at_least(epsilon),
    );
    let neighbours_guard = reactive(vec![
        TriggerPattern::sensor(NEIGHBOURS).expect("literal pattern")
    ])
    .or(first_run());
    let neighbours = ProgramNode::new(
        &ids.neighbours,
        program(|ctx| ctx.sense(NEIGHBOURS)),
        neighbours_guard,
    );
    let nbr_change = neighbour_change_counter(
        &ids.nbr_change,
        &ids.root,
        epsilon,
        false,
        message_guard(&[&ids.root]),
    );
    let source = source.to_owned();
    let root = program(move |ctx| {
        let src = flag(ctx, &source)?;
        distance_to(ctx, src, nbr_range).map(Value::Number)
    });
    Ok(
        ProgramNode::new(&ids.root, root, first_run().or(any_child_changed()))
            .with_child(position)
            .with_child(neighbours)
            .with_child(nbr_change),
    )
}

/// Channel of width `width` between the endpoints flagged by the `a` and `b`
/// sensors. The root combines the two gradients and the broadcast endpoint
/// distance; every device outputs whether it lies in the channel.
pub fn channel_tree(epsilon: f64, width: f64) -> Result<ProgramNode, ExperimentError> {
    use ChannelModules as M;
    let endpoints = ProgramNode::new(
        M::ENDPOINTS,
        program(|ctx| {
            let ga = reified_number(ctx, M::GRADIENT_A)?;
            let gb = reified_number(ctx, M::GRADIENT_B)?;
            Ok(Value::tuple([ga.into(), gb.into()]))
        }),
        always(),
    );
    let between_change = neighbour_change_counter(
        M::BETWEEN_CHANGE,
        M::BETWEEN,
        epsilon,
        false,
        message_guard(&[M::BETWEEN]),
    );
    let between = ProgramNode::new(
        M::BETWEEN,
        program(|ctx| {
            let a = flag(ctx, M::SOURCE_A)?;
            let ga = reified_number(ctx, M::GRADIENT_A)?;
            let gb = reified_number(ctx, M::GRADIENT_B)?;
            broadcast_along(ctx, a, ga, Value::Number(gb))
        }),
        first_run().or(any_child_changed()),
    )
    .with_child(endpoints)
    .with_child(between_change);
    let root = program(move |ctx| {
        let da = reified_number(ctx, M::GRADIENT_A)?;
        let db = reified_number(ctx, M::GRADIENT_B)?;
        let between = reified_number(ctx, M::BETWEEN)?;
        Ok(Value::Bool(channel_member(da, db, between, width)))
    });
    Ok(
        ProgramNode::new(M::ROOT, root, first_run().or(any_child_changed()))
            .with_child(gradient_tree(M::GRADIENT_A, M::SOURCE_A, epsilon)?)
            .with_child(gradient_tree(M::GRADIENT_B, M::SOURCE_B, epsilon)?)
            .with_child(between),
    )
}

/// `tree` as run by `algorithm`: unchanged, or with a 1 s timer on every node.
pub fn for_algorithm(tree: ProgramNode, algorithm: Algorithm) -> ProgramNode {
    match algorithm {
        Algorithm::TimeFluid => tree,
        Algorithm::Classic => tree.with_uniform_guard(&timer(1.0).expect("positive period")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::DeviceId;
    use crate::lockstep::Lockstep;

    #[test]
    fn change_detection() {
        assert!(!differs(&[(1, 2.0)], &[(1, 2.5)], 1.0));
        assert!(differs(&[(1, 2.0)], &[(1, 3.0)], 1.0));
        assert!(differs(&[(1, 2.0)], &[(2, 2.0)], 1.0));
        assert!(differs(&[(1, 2.0)], &[], 1.0));
        assert!(!differs(&[(1, f64::INFINITY)], &[(1, f64::INFINITY)], 0.0));
        assert!(differs(&[(1, f64::INFINITY)], &[(1, 4.0)], 1.0));
        assert!(differs(&[(1, 2.0)], &[(1, 2.0 + 1e-12)], 0.0));
    }

    #[test]
    fn trees_have_unique_ids() {
        gradient_tree("g", "source", 0.1)
            .unwrap()
            .validate()
            .unwrap();
        let ch = channel_tree(0.1, 5.0).unwrap();
        ch.validate().unwrap();
        assert_eq!(ch.node_count(), 1 + 2 * 4 + 3);
        assert!(gradient_tree("g", "s", -1.0).is_err());
    }

    #[test]
    fn gradient_tree_on_a_line() {
        let mut env = Lockstep::line_environment(4, 5.0);
        for (d, s) in env.sensor_field.iter_mut() {
            s.set("source", d.0 == 0);
        }
        let mut ls = Lockstep::new(
            for_algorithm(
                gradient_tree("g", "source", 0.0).unwrap(),
                Algorithm::Classic,
            ),
            env,
        )
        .unwrap();
        ls.run_until_stable(50).unwrap();
        for d in 0..4u32 {
            assert_eq!(
                ls.root(DeviceId(d)),
                Some(&Value::Number(5.0 * f64::from(d)))
            );
        }
    }

    #[test]
    fn channel_tree_on_a_line() {
        let mut env = Lockstep::line_environment(5, 5.0);
        for (d, s) in env.sensor_field.iter_mut() {
            s.set(ChannelModules::SOURCE_A, d.0 == 1);
            s.set(ChannelModules::SOURCE_B, d.0 == 3);
        }
        let mut ls = Lockstep::new(
            for_algorithm(channel_tree(0.0, 0.0).unwrap(), Algorithm::Classic),
            env,
        )
        .unwrap();
        ls.run_until_stable(80).unwrap();
        let members: Vec<bool> = (0..5u32)
            .map(|d| ls.root(DeviceId(d)) == Some(&Value::Bool(true)))
            .collect();
        assert_eq!(members, vec![false, true, true, true, false]);
        assert_eq!(
            ls.module_root(DeviceId(0), ChannelModules::BETWEEN),
            Some(&Value::Number(10.0))
        );
    }
}
