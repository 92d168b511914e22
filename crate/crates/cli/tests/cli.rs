use std::path::Path;
use std::process::{Command, Output};

use liftlab_cli::config::{Config, ProfileSpec};
use liftlab_cli::store::{self, Fingerprints, RunRecord};

fn liftlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liftlab"))
        .current_dir(dir)
        .env_remove("LIFTLAB_STORE")
        .env_remove("LIFTLAB_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn trivial_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = liftlab(dir.path(), &["validate", "--suite", "trivial"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
    let recs = store::read_all(&dir.path().join("liftlab-out/runs.jsonl")).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].command, "validate");
    assert_eq!(recs[0].status, "ok");
}

#[test]
fn printed_config_parses_back_to_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = liftlab(dir.path(), &["--print-config"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(Config::from_toml(&stdout(&o)).unwrap(), Config::default());
}

#[test]
fn every_unknown_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[flow]\nrr = 3\n[mesh]\nhh = 0.1\n[gamma.search]\nmax_eval = 2\n").unwrap();
    let o = liftlab(dir.path(), &["-c", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for key in ["flow.rr", "mesh.hh", "gamma.search.max_eval"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn every_invalid_value_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[flow]\nlambda = -1.0\nlambda_max = 0.0\n[mesh]\nh = 0.0\n").unwrap();
    let o = liftlab(dir.path(), &["-c", cfg.to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for key in ["flow.lambda:", "flow.lambda_max:", "mesh.h:"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = liftlab(dir.path(), &["-o", "a", "solve"]);
    let b = liftlab(dir.path(), &["-o", "b", "solve"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let fa = std::fs::read(dir.path().join("a/field.json")).unwrap();
    let fb = std::fs::read(dir.path().join("b/field.json")).unwrap();
    assert!(!fa.is_empty());
    assert!(fa == fb, "field exports differ");
}

#[test]
fn symmetric_baseline_lift_curve_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.geometry.vertices = Some(vec![[-0.6, -0.15], [0.6, -0.15], [0.6, 0.15], [-0.6, 0.15]]);
    cfg.flow.outflow = ProfileSpec::Baseline;
    cfg.flow.lambda_max = 0.5;
    cfg.curve.points = 5;
    cfg.mesh = cfg.mesh.mirrored();
    let path = dir.path().join("sym.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let o = liftlab(dir.path(), &["-c", path.to_str().unwrap(), "lift-curve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("liftlab-out/lift_curve.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let lift: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        // force scale is above 1 on this grid, so this is the relative bound
        assert!(lift.abs() <= 1e-8, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 5);
    assert!(dir.path().join("liftlab-out/lift_curve.svg").exists());
}

#[test]
fn plot_rerenders_stored_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(liftlab(dir.path(), &["mesh"]).status.code(), Some(0));
    let o = liftlab(dir.path(), &["plot", "liftlab-out/mesh.json", "-O", "again.svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("again.svg")).unwrap();
    assert_eq!(svg, std::fs::read_to_string(dir.path().join("liftlab-out/mesh.svg")).unwrap());
}

#[test]
fn store_path_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_liftlab"))
        .current_dir(dir.path())
        .env("LIFTLAB_STORE", "elsewhere/store.jsonl")
        .args(["mesh"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let recs = store::read_all(&dir.path().join("elsewhere/store.jsonl")).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0].fingerprints.mesh.is_some());
    assert!(!dir.path().join("liftlab-out/runs.jsonl").exists());
}

#[test]
fn numerical_failures_exit_with_three_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "[zero_lift]\nmax_solves = 4\n").unwrap();
    let o = liftlab(dir.path(), &["-c", cfg.to_str().unwrap(), "zero-lift"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let recs = store::read_all(&dir.path().join("liftlab-out/runs.jsonl")).unwrap();
    assert!(recs[0].status.starts_with("numerical failure"));
}

fn record(i: usize, cfg: &Config) -> RunRecord {
    RunRecord {
        run_id: format!("run-{i}"),
        command: "solve".into(),
        started: 0.0,
        config: cfg.clone(),
        fingerprints: Fingerprints::default(),
        outputs: vec![format!("out/{i}.json")],
        wall_seconds: 0.5,
        status: "ok".into(),
        stats: serde_json::json!({ "i": i }),
    }
}

#[test]
fn recorded_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    let mut cfg = Config::default();
    cfg.flow.outflow = ProfileSpec::Nodes { values: vec![0.0, 1.5, 0.0] };
    cfg.geometry.vertices = Some(vec![[0.0, 0.0], [0.3, 0.0], [0.0, 0.3]]);
    cfg.optimize.alpha = Some(0.1);
    store::append(&path, &record(0, &cfg)).unwrap();
    let back = store::read_all(&path).unwrap();
    assert_eq!(back[0].config, cfg);
    assert_eq!(Config::from_toml(&back[0].config.to_toml()).unwrap(), cfg);
}

#[test]
fn concurrent_appends_keep_whole_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    let cfg = Config::default();
    std::thread::scope(|s| {
        for t in 0..4 {
            let (path, cfg) = (&path, &cfg);
            s.spawn(move || {
                for k in 0..25 {
                    store::append(path, &record(t * 100 + k, cfg)).unwrap();
                }
            });
        }
    });
    let recs = store::read_all(&path).unwrap();
    assert_eq!(recs.len(), 100);
    let mut ids: Vec<_> = recs.iter().map(|r| r.run_id.clone()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 100);
}
