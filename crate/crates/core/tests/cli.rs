use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mesc::harness::experiment::{read_rows, run_sweep, Sweep};
use mesc::harness::{cmd_analyze, Config, TaskSetDoc};
use mesc::task::TaskSet;

fn mesc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mesc")).args(args).current_dir(dir).output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

const SMALL_EXPERIMENT: &str = r#"{
  "experiment": {
    "sets_per_point": 3,
    "util_grid": [0.5],
    "variants": [{"policy": "mesc", "preemption": "instruction_level"}],
    "sweeps": ["utilization", "overhead"]
  }
}"#;

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"count": 3}"#).unwrap();
    for out in ["a", "b"] {
        ok(&mesc(&["gen", "--config", "cfg.json", "--seed", "11", "--out", out], dir.path()));
    }
    ok(&mesc(&["gen", "--config", "cfg.json", "--seed", "12", "--out", "c"], dir.path()));
    for i in 0..3 {
        let name = format!("taskset_{i:04}.json");
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(&name)).unwrap());
        assert_ne!(a, fs::read(dir.path().join("c").join(&name)).unwrap());
    }
}

#[test]
fn analyze_and_sim_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mesc(&["gen", "--seed", "5", "--out", "sets"], dir.path()));
    ok(&mesc(&["analyze", "sets/taskset_0000.json", "--out", "a.csv"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(csv.starts_with("# schema: mesc-analysis/1\nid,level,deadline,"));
    assert_eq!(csv.lines().count(), 2 + Config::default().gen.n_tasks);

    ok(&mesc(
        &["sim", "sets/taskset_0000.json", "--out", "m.json", "--trace", "--preemption", "limited", "--policy", "amc"],
        dir.path(),
    ));
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(metrics["schema"], "mesc-metrics/1");
    assert_eq!(metrics["config"]["preemption"], "limited_preemption");
    assert_eq!(metrics["config"]["policy"], "amc");
    let trace = fs::read_to_string(dir.path().join("m.trace.csv")).unwrap();
    assert!(trace.starts_with("# schema: mesc-trace/1\ntime,event,task,duration\n"));
    assert!(trace.lines().count() > 3);
}

#[test]
fn empty_set_gives_header_only_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    TaskSetDoc::new(TaskSet::empty(), None).save(&path).unwrap();
    let mut out = Vec::new();
    let r = cmd_analyze(&Config::default(), &path, &mut out).unwrap();
    assert!(r.tasks.is_empty() && r.schedulable);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn malformed_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    fs::write(dir.path().join("schema.json"), r#"{"schema": "other/9", "seed": null, "tasks": []}"#).unwrap();
    for args in [
        &["analyze", "bad.json"][..],
        &["analyze", "schema.json"],
        &["sim", "missing.json"],
        &["gen", "--config", "bad.json"],
        &["sim", "bad.json", "--preemption", "sometimes"],
        &["frobnicate"],
    ] {
        let o = mesc(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(mesc(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn invalid_config_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"gen": {"total_util": 1.5}}"#).unwrap();
    let o = mesc(&["gen", "--config", "cfg.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("total_util"));
}

#[test]
fn experiment_plots_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), SMALL_EXPERIMENT).unwrap();
    for out in ["r1", "r2"] {
        ok(&mesc(&["experiment", "--config", "cfg.json", "--seed", "3", "--out", out, "--plots"], dir.path()));
    }
    for f in ["utilization.csv", "utilization.svg", "overhead.csv", "overhead.svg"] {
        let a = fs::read(dir.path().join("r1").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("r2").join(f)).unwrap(), "{f}");
    }
    let rows = read_rows(fs::File::open(dir.path().join("r1/utilization.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].sets, 3);
    let svg = fs::read_to_string(dir.path().join("r1/overhead.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn save_and_restore_costs_are_comparable() {
    let mut cfg = Config::default();
    cfg.experiment.sets_per_point = 20;
    for r in run_sweep(&cfg, Sweep::Overhead, 1).unwrap() {
        let (s, r) = (r.mean_save.unwrap(), r.mean_restore.unwrap());
        assert!((s - r).abs() / s.max(r) < 0.10, "save {s} restore {r}");
    }
}
