//! Reusable coordination blocks written against the field calculus API.

use crate::calculus::{EvalError, NbrField, RoundContext, TypeError, Value};
use crate::netsim::NBR_RANGE;
use crate::scheduler::TIME;

/// Default channel width, metres.
pub const DEFAULT_CHANNEL_WIDTH: f64 = 5.0;

/// Per-neighbour Euclidean distance (self at 0), as provided by the platform.
pub fn nbr_range(ctx: &mut RoundContext<'_>) -> Result<Value, EvalError> {
    ctx.sense(NBR_RANGE)
}

fn domain(ctx: &RoundContext<'_>, msg: String) -> EvalError {
    ctx.fault(TypeError::Domain(msg))
}

/// Self-healing gradient (adaptive Bellman-Ford over `share`): 0 at sources,
/// elsewhere the minimum over neighbours of their distance plus the edge
/// length, `+inf` with no route. The metric and the exchange run before the
/// source test, so sources keep publishing.
pub fn distance_to(
    ctx: &mut RoundContext<'_>,
    source: bool,
    metric: impl FnOnce(&mut RoundContext<'_>) -> Result<Value, EvalError>,
) -> Result<f64, EvalError> {
    let metric = metric(ctx)?;
    let edges = metric.as_field().map_err(|e| ctx.fault(e))?.clone();
    if let Some((d, w)) = edges
        .iter()
        .find(|(_, w)| !matches!(w, Value::Number(x) if *x >= 0.0))
    {
        return Err(domain(
            ctx,
            format!("negative or non-numeric edge length {w} towards {d}"),
        ));
    }
    let me = ctx.self_id();
    let out = ctx.share(
        || Value::Number(f64::INFINITY),
        |ctx, d| {
            let shared = d.as_field().map_err(|e| ctx.fault(e))?.without(me);
            let candidates = shared
                .zip_with(&edges, |a, b| a.add(b))
                .map_err(|e| ctx.fault(e))?;
            let via = ctx.fold_hood(
                &Value::Field(candidates),
                Value::Number(f64::INFINITY),
                |acc, v| acc.min_number(v),
            )?;
            ctx.branch(source, |c| c.literal(Value::Number(0.0)), |_| Ok(via))
        },
    )?;
    out.as_number().map_err(|e| ctx.fault(e))
}

/// Spreads `value` from the sources down the `potential` field: every device
/// adopts the value of the neighbour (itself included) with the lowest
/// potential, ties going to the lowest device id.
pub fn broadcast_along(
    ctx: &mut RoundContext<'_>,
    source: bool,
    potential: f64,
    value: Value,
) -> Result<Value, EvalError> {
    let me = ctx.self_id();
    let local = value.clone();
    let out = ctx.share(
        || Value::tuple([potential.into(), local]),
        |ctx, field| {
            let field: NbrField = field.as_field().map_err(|e| ctx.fault(e))?.clone();
            ctx.branch(
                source,
                |_| Ok(Value::tuple([potential.into(), value])),
                |ctx| {
                    let mut best: Option<(f64, Value)> = None;
                    for (d, entry) in field.iter() {
                        let held = entry.get(1).map_err(|e| ctx.fault(e))?;
                        let p = if d == me {
                            potential
                        } else {
                            entry
                                .get(0)
                                .and_then(Value::as_number)
                                .map_err(|e| ctx.fault(e))?
                        };
                        if best.as_ref().is_none_or(|(bp, _)| p < *bp) {
                            best = Some((p, held.clone()));
                        }
                    }
                    let (_, v) = best.expect("the own entry is always present");
                    Ok(Value::tuple([potential.into(), v]))
                },
            )
        },
    )?;
    Ok(out.get(1)?.clone())
}

/// Broadcast from `source` along its own gradient.
pub fn broadcast(
    ctx: &mut RoundContext<'_>,
    source: bool,
    value: Value,
) -> Result<Value, EvalError> {
    let potential = distance_to(ctx, source, nbr_range)?;
    broadcast_along(ctx, source, potential, value)
}

/// Distance between the `a` and `b` endpoints, known everywhere: the `b`
/// gradient read at `a`, broadcast from `a`.
pub fn distance_between(ctx: &mut RoundContext<'_>, a: bool, b: bool) -> Result<f64, EvalError> {
    let to_b = distance_to(ctx, b, nbr_range)?;
    let v = broadcast(ctx, a, Value::Number(to_b))?;
    v.as_number().map_err(|e| ctx.fault(e))
}

/// Membership predicate of a redundant channel of width `w` between `a` and `b`.
pub fn channel_member(da: f64, db: f64, between: f64, w: f64) -> bool {
    da + db <= between + w
}

/// Channel of width `w` between the `a` and `b` endpoints.
pub fn channel(ctx: &mut RoundContext<'_>, a: bool, b: bool, w: f64) -> Result<bool, EvalError> {
    if !(w >= 0.0) {
        return Err(domain(
            ctx,
            format!("channel width must be non-negative, got {w}"),
        ));
    }
    let da = distance_to(ctx, a, nbr_range)?;
    let db = distance_to(ctx, b, nbr_range)?;
    let between = distance_between(ctx, a, b)?;
    Ok(channel_member(da, db, between, w))
}

/// True once `value` has stayed exactly equal for at least `window` seconds
/// of platform time.
pub fn is_signal_stable(
    ctx: &mut RoundContext<'_>,
    value: Value,
    window: f64,
) -> Result<bool, EvalError> {
    if !(window > 0.0) {
        return Err(domain(
            ctx,
            format!("stability window must be positive, got {window}"),
        ));
    }
    let now = ctx.sense_number(TIME)?;
    let fresh = Value::tuple([value.clone(), now.into()]);
    let state = ctx.rep(
        || fresh.clone(),
        |_, prev| {
            Ok(if prev.get(0)? == &value {
                prev
            } else {
                fresh.clone()
            })
        },
    )?;
    let since = state.get(1)?.as_number()?;
    Ok(now - since >= window)
}
