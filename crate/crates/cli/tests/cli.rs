//! The `timefluid` binary and sweep configuration, end to end.

use std::path::Path;
use std::process::Command;

use proptest::prelude::*;

use timefluid_cli::config::parse_config;

const HEADER: &str =
    "time,scenario,algorithm,epsilon,lambda_inv,speed,seed,mean_error,mean_rounds,stdev_rounds,efficiency";

fn config(out: &Path, scenarios: &str) -> String {
    format!(
        r#"
[variables]
scenario = [{scenarios}]
algorithm = ["classic", "time_fluid"]
lambda_inv = [0.1]
epsilon = [0.1]
speed = [0.3]
[run]
seeds = {{ start = 0, count = 2 }}
duration = 5
output = "{}"
"#,
        out.display()
    )
}

fn timefluid(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_timefluid"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn sweep_writes_per_run_and_merged_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        config(&dir.path().join("unused"), r#""gradient", "moving""#),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = timefluid(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--parallel",
        "2",
        "--scenario",
        "moving",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let merged = String::from_utf8(res.stdout).unwrap();
    let merged = std::fs::read_to_string(merged.trim()).unwrap();
    let lines: Vec<&str> = merged.lines().collect();
    assert_eq!(lines[0], HEADER);
    // 2 algorithms x 2 seeds, 6 samples each
    assert_eq!(lines.len(), 1 + 4 * 6);
    assert!(lines[1..]
        .iter()
        .all(|l| l.split(',').nth(1) == Some("moving")));
    assert_eq!(std::fs::read_dir(out.join("runs")).unwrap().count(), 4);
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn rerun_overwrites_instead_of_appending() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, config(&dir.path().join("out"), r#""gradient""#)).unwrap();
    let read = || {
        let res = timefluid(&["--config", cfg.to_str().unwrap()]);
        assert!(res.status.success());
        std::fs::read(String::from_utf8(res.stdout).unwrap().trim()).unwrap()
    };
    assert_eq!(read(), read());
}

#[test]
fn bad_invocations_exit_with_usage_status() {
    assert_eq!(timefluid(&[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        config(dir.path(), r#""gradient""#).replace("epsilon = [0.1]", "epsilon = [-1]"),
    )
    .unwrap();
    let res = timefluid(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 6"), "{err}");
    let res = timefluid(&["--config", cfg.to_str().unwrap(), "--parallel", "0"]);
    assert_eq!(res.status.code(), Some(2));
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_covers_the_grid_once(
        lambda in proptest::collection::btree_set(1u32..50, 1..4),
        eps in proptest::collection::btree_set(0u32..50, 1..4),
        speed in proptest::collection::btree_set(0u32..50, 1..4),
        seeds in 1u64..5,
        kinds in 1usize..=3,
    ) {
        let f = |s: &std::collections::BTreeSet<u32>| s.iter().map(|v| f64::from(*v) / 10.0).collect::<Vec<_>>();
        let scen = ["\"gradient\"", "\"moving\"", "\"channel\""][..kinds].join(", ");
        let text = format!(
            "[variables]\nscenario = [{scen}]\nalgorithm = [\"classic\", \"time_fluid\"]\nlambda_inv = [{}]\nepsilon = [{}]\nspeed = [{}]\n[run]\nseeds = {{ start = 3, count = {seeds} }}\n",
            list(&f(&lambda)), list(&f(&eps)), list(&f(&speed)),
        );
        let c = parse_config(&text).unwrap();
        let cells = kinds * 2 * lambda.len() * eps.len() * speed.len();
        prop_assert_eq!(c.cell_count(), cells);
        let runs = c.expand();
        prop_assert_eq!(runs.len(), cells * seeds as usize);
        let keys: std::collections::BTreeSet<String> = runs.iter().map(|r| r.to_string()).collect();
        prop_assert_eq!(keys.len(), runs.len());
    }
}
