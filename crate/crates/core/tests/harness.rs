//! Config loading, suites, persistence and the command-line contract.

use std::path::{Path, PathBuf};
use std::process::Command;

use optcons::analysis::consensus_diameter;
use optcons::harness::{
    load_config, parse_config, read_trace, run, sweep_k, HarnessError, RunOptions, RunReport,
    ScenarioConfig, Suite,
};

fn scenarios_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios"]
        .iter()
        .collect()
}

fn scenario(name: &str) -> ScenarioConfig {
    load_config(scenarios_dir().join(name)).unwrap()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_optcons"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_json(dir: &Path, name: &str, cfg: &ScenarioConfig) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn bundled_scenarios_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn config_serialization_round_trips() {
    let cfg = scenario("switching_balls.json");
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(parse_config(&text).unwrap(), cfg);
}

#[test]
fn report_hash_is_reproducible() {
    let cfg = scenario("two_node_quadratic.json");
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run(&cfg, Suite::VerifyThm2, &RunOptions::in_dir(d1.path())).unwrap();
    let b = run(&cfg, Suite::VerifyThm2, &RunOptions::in_dir(d2.path())).unwrap();
    assert_eq!(a.report_hash, b.report_hash);
    assert_eq!(a.report_hash, a.compute_hash());
    let c = run(
        &cfg,
        Suite::VerifyThm2,
        &RunOptions {
            seed: Some(99),
            ..Default::default()
        },
    )
    .unwrap();
    assert_ne!(a.fingerprint, c.fingerprint);
}

#[test]
fn every_suite_claim_appears_once() {
    let cfg = scenario("two_node_quadratic.json");
    let r = run(&cfg, Suite::VerifyThm2, &RunOptions::default()).unwrap();
    let mut ids: Vec<_> = r.claims.iter().map(|c| c.id.clone()).collect();
    assert_eq!(ids.len(), 12);
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 12);
}

#[test]
fn reloaded_traces_reproduce_report_numbers() {
    let mut cfg = scenario("balls_digraph.json");
    cfg.integrator.tf = 60.0;
    cfg.analysis.seeds = Some(3);
    let dir = tempfile::tempdir().unwrap();
    let report = run(&cfg, Suite::VerifyThm1, &RunOptions::in_dir(dir.path())).unwrap();
    let report_path = report
        .artifacts
        .iter()
        .find(|a| a.ends_with("_report.json"))
        .unwrap();
    let stored: RunReport =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(stored, report);

    let mut diam = 0.0f64;
    let mut resid_col = 0.0f64;
    for a in report.artifacts.iter().filter(|a| a.ends_with(".csv")) {
        let (traj, meta, cols) = read_trace(Path::new(a)).unwrap();
        assert_eq!(meta.fingerprint, report.fingerprint);
        diam = diam.max(consensus_diameter(traj.last_state(), traj.m));
        let resid = cols.iter().find(|c| c.name == "residual").unwrap();
        let tail = &resid.values[resid.values.len() - traj.n_nodes..];
        resid_col = tail.iter().copied().fold(resid_col, f64::max);
    }
    let consensus = stored.claim("thm1.consensus").unwrap();
    assert_eq!(consensus.margin, Some(1e-4 - diam));
    assert_eq!(
        stored.claim("thm1.node_optimum").unwrap().margin,
        Some(1e-4 - resid_col)
    );
}

#[test]
fn sweep_matches_closed_form() {
    let cfg = scenario("two_node_quadratic.json");
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep_k(
        &cfg,
        &[0.0, 1.0, 10.0, 100.0],
        &RunOptions::in_dir(dir.path()),
    )
    .unwrap();
    assert_eq!(rows[0].terminal_diameter, None);
    assert!((rows[0].oracle_diameter.unwrap() - 3.0).abs() < 1e-12);
    for r in &rows[1..] {
        let want = 3.0 / (2.0 * r.k + 1.0);
        assert!((r.terminal_diameter.unwrap() - want).abs() < 1e-4);
        assert!(r.bound_margin.unwrap() >= 0.0);
    }
    let csv = std::fs::read_to_string(dir.path().join("two_node_quadratic_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("k,terminal_diameter,"));
}

#[test]
fn sweep_with_identical_objectives_reaches_consensus() {
    let text = std::fs::read_to_string(scenarios_dir().join("two_node_quadratic.json"))
        .unwrap()
        .replace(r#""c": [3.0]"#, r#""c": [0.0]"#);
    let cfg = parse_config(&text).unwrap();
    for r in sweep_k(&cfg, &[1.0, 10.0, 100.0], &RunOptions::default()).unwrap() {
        assert!(r.terminal_diameter.unwrap() <= 1e-6);
    }
}

#[test]
fn lyapunov_suite_requires_a_common_minimizer() {
    let mut cfg = scenario("two_node_quadratic.json");
    cfg.law = optcons::harness::config::LawConfig::Jstar;
    let err = run(&cfg, Suite::VerifyThm34, &RunOptions::default()).unwrap_err();
    assert!(
        matches!(err, HarnessError::Requirement(ref m) if m.contains("empty")),
        "{err}"
    );
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn audit_flags_unbounded_sets() {
    let text = std::fs::read_to_string(scenarios_dir().join("balls_digraph.json"))
        .unwrap()
        .replacen(
            r#"{"type": "ball", "center": [1.0, 0.0], "radius": 1.5}"#,
            r#"{"type": "box", "lower": [-1.0, null], "upper": [1.0, null]}"#,
            1,
        );
    let cfg = parse_config(&text).unwrap();
    let r = run(&cfg, Suite::Audit, &RunOptions::default()).unwrap();
    assert!(r.claim("audit.coercive").unwrap().detail.contains("false"));
    assert!(r
        .claim("audit.bounded_minimizers")
        .unwrap()
        .detail
        .contains("unverifiable"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = scenarios_dir()
        .join("two_node_quadratic.json")
        .display()
        .to_string();

    let (code, out, _) = cli(&["verify", "--config", &good, "--suite", "verify-thm1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("consistent with necessity"));

    let bad_weight = std::fs::read_to_string(&good).unwrap().replacen(
        r#""to": 1}"#,
        r#""to": 1, "weight": 0}"#,
        1,
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, bad_weight).unwrap();
    let (code, _, err) = cli(&["sim", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("weights must be positive"), "{err}");

    let mut stiff = scenario("two_node_quadratic.json");
    stiff.analysis.k_grid = Some(vec![1e4]);
    let stiff = write_json(dir.path(), "stiff.json", &stiff);
    let (code, _, err) = cli(&["verify", "--config", &stiff, "--suite", "verify-thm2"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("diverg"), "{err}");

    let mut short = scenario("balls_digraph.json");
    short.integrator.tf = 1.0;
    let short = write_json(dir.path(), "short.json", &short);
    let (code, out, _) = cli(&[
        "verify",
        "--config",
        &short,
        "--suite",
        "verify-thm1",
        "--quiet",
    ]);
    assert_eq!(code, 3);
    assert!(out.is_empty());
}

#[test]
fn cli_subcommands_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let switching = scenarios_dir()
        .join("switching_balls.json")
        .display()
        .to_string();
    let quadratic = scenarios_dir()
        .join("two_node_quadratic.json")
        .display()
        .to_string();

    let (code, out, err) = cli(&[
        "sim",
        "--config",
        &switching,
        "--out-dir",
        out_dir,
        "--seed",
        "4",
        "--h",
        "0.02",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("simulate.completed"));
    let csv = dir.path().join("switching_balls_simulate_seed4.csv");
    let (traj, meta, _) = read_trace(&csv).unwrap();
    assert_eq!(meta.h, 0.02);
    assert_eq!(traj.last_time(), 100.0);

    let (code, out, _) = cli(&["check-graph", "--config", &switching]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ujsc"], true);

    let (code, out, _) = cli(&["oracle", "--config", &quadratic]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["stationary"][0]["x"], serde_json::json!([1.0, 2.0]));
    assert_eq!(v["argmin_intersection"]["status"], "empty");

    let (code, out, _) = cli(&[
        "sweep-k",
        "--config",
        &quadratic,
        "--k",
        "0,1",
        "--out-dir",
        out_dir,
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
    assert!(dir.path().join("two_node_quadratic_sweep.csv").exists());
}
