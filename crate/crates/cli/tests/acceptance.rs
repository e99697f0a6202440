//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use timefluid::blocks::{channel, distance_to, nbr_range};
use timefluid::calculus::{
    evaluate_round, program, DeviceId, RoundContext, SensorState, VTreeEnvironment, Value,
};
use timefluid::experiments::{
    gradient_tree, oracle_channel, oracle_distance_field, run_scenario, Algorithm, MetricsRow,
    ScenarioKind, ScenarioSpec, SOURCE,
};
use timefluid::geometry::recompute_topology;
use timefluid::lockstep::Lockstep;
use timefluid::netsim::{
    check_well_formed, Environment, LatencyModel, MobilityState, SimParams, Simulation, Timing,
};
use timefluid::scheduler::{
    evaluate_program_tree, from_fn, timer, ExportMessage, LocalStatusField, ProgramNode,
    SchedulerInputs, SchedulerState, TIME,
};
use timefluid::trigger::Trigger;
use timefluid::{Arena, Point};
use timefluid_cli::batch::run_batch;
use timefluid_cli::config::parse_config;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn spec(
    kind: ScenarioKind,
    alg: Algorithm,
    speed: f64,
    latency: f64,
    eps: f64,
    duration: f64,
    seed: u64,
) -> ScenarioSpec {
    let mut s = ScenarioSpec::new(kind, alg);
    s.speed = speed;
    s.mean_latency = latency;
    s.epsilon = eps;
    s.duration = duration;
    s.seed = seed;
    s
}

fn run(s: &ScenarioSpec) -> Result<(Vec<MetricsRow>, Duration), String> {
    let (out, elapsed) = timed(|| run_scenario(s));
    out.map(|o| (o.rows, elapsed))
        .map_err(|e| format!("{s}: {e}"))
}

fn quiescence() -> Outcome {
    let tf = spec(
        ScenarioKind::Gradient,
        Algorithm::TimeFluid,
        0.0,
        0.1,
        0.01,
        100.0,
        0,
    );
    let classic = ScenarioSpec {
        algorithm: Algorithm::Classic,
        ..tf.clone()
    };
    let (tf_rows, tf_time) = run(&tf)?;
    let (cl_rows, cl_time) = run(&classic)?;
    let last = tf_rows.last().ok_or("no samples")?;
    // earliest sample from which the total round count never moves again
    let settle = tf_rows
        .iter()
        .rev()
        .take_while(|r| r.mean_rounds == last.mean_rounds)
        .last()
        .expect("non-empty")
        .time;
    ensure(settle < 60.0, || {
        format!("time-fluid rounds still growing at {settle} s")
    })?;
    let cl_last = cl_rows.last().ok_or("no samples")?;
    ensure((cl_last.mean_rounds - 100.0).abs() <= 1.0, || {
        format!("classic E(rho)(100) = {}", cl_last.mean_rounds)
    })?;
    let limit = Duration::from_secs(30);
    ensure(tf_time < limit && cl_time < limit, || {
        format!("runtime {tf_time:?} / {cl_time:?}")
    })?;
    Ok(format!(
        "T_s = {settle} s at time-fluid E(rho) {:.2}, classic E(rho)(100) = {:.2}, runtimes {:.1?} / {:.1?}",
        last.mean_rounds, cl_last.mean_rounds, tf_time, cl_time
    ))
}

fn classic_symmetry() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in [ScenarioKind::Gradient, ScenarioKind::Moving] {
        let (rows, _) = run(&spec(kind, Algorithm::Classic, 1.0, 0.1, 0.01, 150.0, 0))?;
        if let Some(r) = rows.iter().find(|r| r.stdev_rounds > 1.0) {
            return Err(format!(
                "{kind} classic sigma(rho) = {} at {} s",
                r.stdev_rounds, r.time
            ));
        }
        worst = rows.iter().map(|r| r.stdev_rounds).fold(worst, f64::max);
    }
    let (cl, _) = run(&spec(
        ScenarioKind::Gradient,
        Algorithm::Classic,
        1.0,
        0.1,
        0.01,
        150.0,
        0,
    ))?;
    let (tf, _) = run(&spec(
        ScenarioKind::Gradient,
        Algorithm::TimeFluid,
        1.0,
        0.1,
        0.01,
        150.0,
        0,
    ))?;
    let (c, t) = (
        cl.last().unwrap().stdev_rounds,
        tf.last().unwrap().stdev_rounds,
    );
    ensure(t > c, || {
        format!("time-fluid sigma {t} not above classic {c}")
    })?;
    Ok(format!(
        "classic max sigma {worst:.3}; final sigma time-fluid {t:.2} > classic {c:.3}"
    ))
}

fn random_connected_positions(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<(f64, f64)> {
    let side = (n as f64).sqrt() * radius * 0.8;
    loop {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen::<f64>() * side, rng.gen::<f64>() * side))
            .collect();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                if !seen[j] && dx * dx + dy * dy <= radius * radius {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.into_iter().all(|s| s) {
            return pts;
        }
    }
}

/// All-pairs shortest paths by Floyd-Warshall over the disc graph.
fn floyd(pts: &[(f64, f64)], radius: f64) -> Vec<Vec<f64>> {
    let n = pts.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        for j in 0..n {
            let e = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            if i == j {
                d[i][j] = 0.0;
            } else if e <= radius {
                d[i][j] = e;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn flag(ctx: &RoundContext<'_>, name: &str) -> Result<bool, timefluid::calculus::EvalError> {
    ctx.sense(name)?.as_bool().map_err(|e| ctx.fault(e))
}

fn oracle_equivalence() -> Outcome {
    const RADIUS: f64 = 7.5;
    const WIDTH: f64 = 5.0;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut members = 0;
    for graph in 0..20 {
        let n = rng.gen_range(2..=30);
        let pts = random_connected_positions(&mut rng, n, RADIUS);
        let dist = floyd(&pts, RADIUS);
        let sources: BTreeSet<usize> = (0..rng.gen_range(1..=3))
            .map(|_| rng.gen_range(0..n))
            .collect();
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));

        let mut env = Lockstep::disc_environment(&pts, RADIUS);
        for (d, s) in env.sensor_field.iter_mut() {
            let i = d.0 as usize;
            s.set(SOURCE, sources.contains(&i));
            s.set("a", i == a);
            s.set("b", i == b);
        }
        let gradient = program(|ctx| {
            let s = flag(ctx, SOURCE)?;
            Ok(distance_to(ctx, s, nbr_range)?.into())
        });
        let mut sim = Lockstep::from_program(gradient, env.clone()).map_err(|e| e.to_string())?;
        sim.run_until_stable(10 * n + 10)
            .map_err(|e| format!("graph {graph}: {e}"))?;
        for i in 0..n {
            let expected = sources
                .iter()
                .map(|s| dist[*s][i])
                .fold(f64::INFINITY, f64::min);
            let got = sim
                .root(DeviceId(i as u32))
                .and_then(|v| v.as_number().ok())
                .ok_or("missing gradient")?;
            ensure((got - expected).abs() <= 1e-9, || {
                format!("graph {graph} device {i}: {got} vs {expected}")
            })?;
            worst = worst.max((got - expected).abs());
        }
        let library =
            oracle_distance_field(&env, &sources.iter().map(|s| DeviceId(*s as u32)).collect());
        ensure(
            library
                .iter()
                .all(|(d, v)| (v - sim.root(*d).unwrap().as_number().unwrap()).abs() <= 1e-9),
            || format!("graph {graph}: library oracle disagrees"),
        )?;

        let chan = program(|ctx| {
            let (a, b) = (flag(ctx, "a")?, flag(ctx, "b")?);
            Ok(channel(ctx, a, b, WIDTH)?.into())
        });
        let mut sim = Lockstep::from_program(chan, env.clone()).map_err(|e| e.to_string())?;
        sim.run_until_stable(20 * n + 20)
            .map_err(|e| format!("graph {graph}: {e}"))?;
        let library = oracle_channel(&env, DeviceId(a as u32), DeviceId(b as u32), WIDTH);
        for i in 0..n {
            let expected = dist[a][i] + dist[b][i] <= dist[a][b] + WIDTH;
            let got = sim
                .root(DeviceId(i as u32))
                .and_then(|v| v.as_bool().ok())
                .ok_or("missing channel")?;
            ensure(got == expected, || {
                format!("graph {graph} device {i}: channel {got}, oracle {expected}")
            })?;
            ensure(library[&DeviceId(i as u32)] == expected, || {
                format!("graph {graph} device {i}: library oracle")
            })?;
            members += usize::from(got);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "20 graphs, max gradient error {worst:.1e}, {members} channel members, {elapsed:.1?}"
    ))
}

fn pendulum() -> Outcome {
    let p = |ctx: &mut RoundContext<'_>| {
        ctx.rep(
            || Value::Number(0.0),
            |ctx, old| {
                let cond = old.as_number().map_err(|e| ctx.fault(e))? > 0.0;
                ctx.branch(
                    cond,
                    |ctx| {
                        ctx.rep(
                            || Value::Number(0.0),
                            |_, c| Ok(Value::Number(c.as_number()? - 1.0)),
                        )
                    },
                    |ctx| {
                        ctx.rep(
                            || Value::Number(0.0),
                            |_, c| Ok(Value::Number(c.as_number()? + 1.0)),
                        )
                    },
                )
            },
        )
    };
    let me = DeviceId(0);
    let sensors = SensorState::new().with_trigger(Trigger::tick("round"));
    let mut env = VTreeEnvironment::new();
    let mut out = Vec::new();
    for _ in 0..3 {
        let tree = evaluate_round(me, &p, &env, &sensors).map_err(|e| e.to_string())?;
        out.push(tree.root.as_number().map_err(|e| e.to_string())?);
        env.insert(me, Arc::new(tree));
    }
    ensure(out == [1.0, -1.0, 1.0], || format!("got {out:?}"))?;
    Ok(format!("{out:?}"))
}

type Log = Arc<Mutex<Vec<(String, bool)>>>;

fn random_tree(
    rng: &mut ChaCha8Rng,
    coin: &Arc<Mutex<ChaCha8Rng>>,
    log: &Log,
    id: &mut usize,
    depth: usize,
) -> ProgramNode {
    let name = format!("m{id}");
    *id += 1;
    let (flip, record, me) = (Arc::clone(coin), Arc::clone(log), name.clone());
    let guard = from_fn(move |_: &SchedulerInputs, _: &SensorState| {
        let run = flip.lock().unwrap().gen_bool(0.5);
        record.lock().unwrap().push((me.clone(), run));
        run
    });
    // every execution yields a fresh value, so a reused tree is detectable
    let body = program(|ctx| {
        let noise = ctx.sense_number("noise")?;
        let k = ctx.rep(
            || Value::Number(0.0),
            |_, k| Ok(Value::Number(k.as_number()? + 1.0)),
        )?;
        Ok(Value::tuple([k, noise.into()]))
    });
    let mut node = ProgramNode::new(&name, body, guard);
    if depth < 3 {
        for _ in 0..rng.gen_range(0..=3) {
            node = node.with_child(random_tree(rng, coin, log, id, depth + 1));
        }
    }
    node
}

fn round_gating() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut skipped = 0;
    let mut executed = 0;
    for case in 0..1000 {
        let coin = Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(case)));
        let log: Log = Arc::default();
        let tree = random_tree(&mut rng, &coin, &log, &mut 0, 0);
        let paths = tree.module_paths();
        let me = DeviceId(0);
        let mut state = SchedulerState::new(&tree);
        let mut status = LocalStatusField::new();
        let mut prev = Arc::new(ExportMessage::default_for(&tree));
        for round in 0..rng.gen_range(1..=6) {
            log.lock().unwrap().clear();
            let sensors = SensorState::new()
                .with(TIME, f64::from(round))
                .with("noise", rng.gen::<f64>())
                .with_trigger(Trigger::tick("round"));
            let next = Arc::new(
                evaluate_program_tree(me, &tree, &mut state, &status, &sensors)
                    .map_err(|e| e.to_string())?,
            );
            let decisions = std::mem::take(&mut *log.lock().unwrap());
            ensure(decisions.len() == tree.node_count(), || {
                format!("case {case}: {} guard calls", decisions.len())
            })?;
            for (module, run) in decisions {
                let path = &paths[&module];
                let (old, new) = (&prev.at(path).unwrap().tree, &next.at(path).unwrap().tree);
                if run {
                    executed += 1;
                    ensure(old != new, || {
                        format!("case {case} round {round}: {module} ran but kept its tree")
                    })?;
                } else {
                    skipped += 1;
                    ensure(old == new, || {
                        format!("case {case} round {round}: {module} skipped but changed")
                    })?;
                }
            }
            status.insert(me, Arc::clone(&next));
            prev = next;
        }
    }
    Ok(format!(
        "1000 cases, {skipped} skipped and {executed} executed nodes checked"
    ))
}

fn wfe_preservation() -> Outcome {
    const RADIUS: f64 = 7.5;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arena = Arena::new(Point::new(0.0, 0.0), Point::new(25.0, 25.0));
    let n = 16u32;
    let positions: BTreeMap<DeviceId, Point> = (0..n)
        .map(|i| {
            (
                DeviceId(i),
                Point::new(rng.gen::<f64>() * 25.0, rng.gen::<f64>() * 25.0),
            )
        })
        .collect();
    let env = Environment {
        topology: recompute_topology(&positions, RADIUS),
        sensor_field: positions
            .keys()
            .map(|d| (*d, SensorState::new().with(SOURCE, d.0 == 0)))
            .collect(),
        positions,
    };
    let mobility = (0..n)
        .map(|i| (DeviceId(i), MobilityState::levy(2.0, arena)))
        .collect();
    let tree = gradient_tree("gradient", SOURCE, 0.05).map_err(|e| e.to_string())?;
    let params = SimParams::new(
        0.05,
        Timing::Reactive {
            boot: Trigger::sensor("position"),
        },
    )
    .map_err(|e| e.to_string())?;
    let mut sim = Simulation::new(tree, env, mobility, params, ChaCha8Rng::seed_from_u64(12))
        .map_err(|e| e.to_string())?;
    let mut next_id = n;
    let mut counts = [0usize; 4];
    for step in 0..100_000 {
        let devices: Vec<DeviceId> = sim.env().devices().collect();
        let pick = |rng: &mut ChaCha8Rng| devices[rng.gen_range(0..devices.len())];
        let roll = rng.gen::<f64>();
        let transition = if roll < 0.6 || devices.is_empty() {
            counts[0] += 1;
            match sim.step().map_err(|e| format!("step {step}: {e}"))? {
                Some(t) => t.to_string(),
                None => "empty queue".into(),
            }
        } else if roll < 0.75 {
            counts[1] += 1;
            let d = pick(&mut rng);
            let trigger = match rng.gen_range(0..3) {
                0 => Trigger::tick("clock"),
                1 => Trigger::sensor("neighbours"),
                _ => Trigger::received("gradient", pick(&mut rng)),
            };
            let text = format!("fire {d} {trigger}");
            sim.fire(d, trigger)
                .map_err(|e| format!("step {step} {text}: {e}"))?;
            text
        } else if roll < 0.85 {
            counts[2] += 1;
            let mut env = sim.env().clone();
            let text = match rng.gen_range(0..3) {
                0 if env.positions.len() > 3 => {
                    let d = pick(&mut rng);
                    env.positions.remove(&d);
                    env.sensor_field.remove(&d);
                    format!("remove {d}")
                }
                1 => {
                    let d = DeviceId(next_id);
                    next_id += 1;
                    env.positions.insert(
                        d,
                        Point::new(rng.gen::<f64>() * 25.0, rng.gen::<f64>() * 25.0),
                    );
                    env.sensor_field
                        .insert(d, SensorState::new().with(SOURCE, false));
                    format!("add {d}")
                }
                _ => {
                    let d = pick(&mut rng);
                    env.positions.insert(
                        d,
                        Point::new(rng.gen::<f64>() * 25.0, rng.gen::<f64>() * 25.0),
                    );
                    format!("teleport {d}")
                }
            };
            env.topology = recompute_topology(&env.positions, RADIUS);
            sim.apply_environment_change(env)
                .map_err(|e| format!("step {step} {text}: {e}"))?;
            text
        } else {
            counts[3] += 1;
            let (h, s) = (pick(&mut rng), pick(&mut rng));
            let k = sim.expire_messages(h, s);
            format!("expire {s} at {h} ({k} timeouts)")
        };
        if !check_well_formed(sim.env()) {
            return Err(format!(
                "step {step}: environment ill formed after `{transition}`"
            ));
        }
        sim.check_invariants()
            .map_err(|e| format!("step {step}: {e} after `{transition}`"))?;
    }
    Ok(format!(
        "1e5 steps: {} queued events, {} fires, {} environment changes, {} expiries",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

fn latency_model() -> Outcome {
    let model = LatencyModel::new(0.3).ok_or("rejected mean")?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<f64> = (0..100_000).map(|_| model.sample(&mut rng)).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let tail = samples.iter().filter(|x| **x > 0.3).count() as f64 / samples.len() as f64;
    let e1 = (-1.0f64).exp();
    ensure((mean - 0.3).abs() <= 0.02 * 0.3, || format!("mean {mean}"))?;
    ensure((tail - e1).abs() <= 0.02 * e1, || {
        format!("P(X > 0.3) = {tail}")
    })?;
    Ok(format!(
        "mean {mean:.4}, P(X > 0.3) = {tail:.4} (e^-1 = {e1:.4})"
    ))
}

fn sweep_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let merged = |name: &str, parallel: usize| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let text = format!(
            r#"
[variables]
scenario = ["gradient", "moving"]
algorithm = ["classic", "time_fluid"]
lambda_inv = [0.1]
epsilon = [0.1]
speed = [1]
[run]
seeds = {{ start = 0, count = 2 }}
duration = 15
output = "{}"
parallel = {parallel}
"#,
            out.display()
        );
        let config = parse_config(&text).map_err(|e| e.to_string())?;
        let path = run_batch(&config).map_err(|e| e.to_string())?;
        std::fs::read(path).map_err(|e| e.to_string())
    };
    let serial = merged("serial", 1)?;
    let parallel = merged("parallel", 4)?;
    let again = merged("parallel", 3)?;
    ensure(serial == parallel && parallel == again, || {
        "merged CSVs differ".into()
    })?;
    let lines = serial.iter().filter(|b| **b == b'\n').count();
    Ok(format!(
        "3 executions, {} bytes / {lines} lines identical",
        serial.len()
    ))
}

fn efficiency_trend() -> Outcome {
    let (results, elapsed) = timed(|| {
        std::thread::scope(|scope| {
            let handles: Vec<_> = [Algorithm::Classic, Algorithm::TimeFluid]
                .into_iter()
                .flat_map(|alg| (0..5).map(move |seed| (alg, seed)))
                .map(|(alg, seed)| {
                    scope.spawn(move || {
                        run(&spec(
                            ScenarioKind::Gradient,
                            alg,
                            1.0,
                            0.01,
                            0.01,
                            150.0,
                            seed,
                        ))
                        .map(|(rows, _)| (alg, rows.last().expect("samples").efficiency))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run panicked"))
                .collect::<Result<Vec<_>, _>>()
        })
    });
    let results = results?;
    let mean = |alg| {
        let v: Vec<f64> = results
            .iter()
            .filter(|(a, _)| *a == alg)
            .map(|(_, e)| *e)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (tf, cl) = (mean(Algorithm::TimeFluid), mean(Algorithm::Classic));
    ensure(tf <= cl, || format!("time-fluid {tf:.0} > classic {cl:.0}"))?;
    ensure(elapsed < Duration::from_secs(300), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "seed-mean efficiency time-fluid {tf:.0} <= classic {cl:.0}, {elapsed:.1?}"
    ))
}

fn timer_subsumption() -> Outcome {
    let mut guard = timer(1.0).map_err(|e| e.to_string())?;
    let inputs = SchedulerInputs {
        trigger: Trigger::tick("clock"),
        prev_self_root: None,
        child_roots: vec![],
        child_changed: vec![],
    };
    let trace: Vec<bool> = [55.0, 56.0, 56.0, 60.0]
        .iter()
        .map(|t| guard.decide(&inputs, &SensorState::new().with(TIME, *t)))
        .collect();
    ensure(trace == [true, true, false, true], || {
        format!("trace {trace:?}")
    })?;
    Ok(format!("{trace:?}"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "quiescence", quiescence),
        (2, "classic symmetry", classic_symmetry),
        (3, "oracle equivalence", oracle_equivalence),
        (4, "pendulum", pendulum),
        (5, "round gating", round_gating),
        (6, "well-formed environments", wfe_preservation),
        (7, "latency model", latency_model),
        (8, "sweep determinism", sweep_determinism),
        (9, "efficiency trend", efficiency_trend),
        (10, "timer subsumption", timer_subsumption),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == n.to_string())
        {
            continue;
        }
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
