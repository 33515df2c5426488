//! End-to-end runs of the `mapless` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[network]
actor_hidden = [16, 16]
critic_hidden = [16, 16]

[agent]
batch_size = 16
warmup_steps = 100
buffer_capacity = 5000

[episode]
max_steps = 100
";

fn mapless(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapless")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = mapless(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_into(dir: &Path, cfg: &Path, world: &Path) {
    ok(&[
        "train", "--config", s(cfg), "--world", s(world), "--steps", "200", "--seed", "7", "--sync", "--quiet", "--out",
        s(dir),
    ]);
}

fn setup(tmp: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let cfg = tmp.join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let world = tmp.join("env1.json");
    fs::write(&world, mapless::sim::bundled::ENV1).unwrap();
    (cfg, world)
}

#[test]
fn train_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, world) = setup(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    train_into(&a, &cfg, &world);
    train_into(&b, &cfg, &world);
    for f in ["config.toml", "world.json", "manifest.toml", "metrics.csv", "summary.toml", "checkpoint/agent.toml"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    for f in ["metrics.csv", "config.toml", "world.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    for f in fs::read_dir(a.join("checkpoint")).unwrap() {
        let name = f.unwrap().file_name();
        assert_eq!(
            fs::read(a.join("checkpoint").join(&name)).unwrap(),
            fs::read(b.join("checkpoint").join(&name)).unwrap()
        );
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 201);

    // the echoed config reproduces the run on its own
    let c = tmp.path().join("c2");
    ok(&[
        "train", "--config", s(&a.join("config.toml")), "--world", s(&a.join("world.json")), "--quiet", "--out", s(&c),
    ]);
    assert_eq!(fs::read(c.join("metrics.csv")).unwrap(), metrics.as_bytes());
}

#[test]
fn non_empty_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, world) = setup(tmp.path());
    let out = tmp.path().join("run");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let args = ["train", "--config", s(&cfg), "--world", s(&world), "--steps", "5", "--quiet", "--out", s(&out)];
    let r = mapless(&args);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(&forced);
    assert!(out.join("keep.txt").is_file());
}

#[test]
fn eval_writes_report_and_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, world) = setup(tmp.path());
    let run = tmp.path().join("run");
    train_into(&run, &cfg, &world);
    let targets = tmp.path().join("targets.json");
    fs::write(&targets, mapless::sim::bundled::TEST_7X10_TARGETS).unwrap();
    let test_world = tmp.path().join("test7x10.json");
    fs::write(&test_world, mapless::sim::bundled::TEST_7X10).unwrap();
    let e1 = tmp.path().join("e1");
    let e2 = tmp.path().join("e2");
    for e in [&e1, &e2] {
        ok(&[
            "eval", "--checkpoint", s(&run.join("checkpoint")), "--world", s(&test_world), "--targets", s(&targets),
            "--quiet", "--out", s(e),
        ]);
    }
    for f in ["trajectory.csv", "report.toml", "report.csv", "config.toml"] {
        assert!(e1.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read(e1.join("trajectory.csv")).unwrap(), fs::read(e2.join("trajectory.csv")).unwrap());
    let report = fs::read_to_string(e1.join("report.toml")).unwrap();
    assert!(report.contains("successes"));
}

#[test]
fn eval_rejects_missing_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let r = mapless(&["eval", "--checkpoint", s(&tmp.path().join("nope")), "--out", s(&tmp.path().join("o"))]);
    assert!(!r.status.success());
}

#[test]
fn gp_demo_writes_scans() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gp");
    ok(&["gp-demo", "--pose", "5,2,0.3", "--out", s(&out)]);
    let rows = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count() - 1;
    assert_eq!(rows("input_scan.csv"), 10);
    assert_eq!(rows("gp_scan.csv"), 810);
    assert_eq!(rows("true_scan.csv"), 810);
}

#[test]
fn latency_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lat");
    ok(&["latency", "--queries", "1000", "--duration", "1", "--quiet", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("latency.toml")).unwrap();
    let t: toml::Table = text.parse().unwrap();
    assert!(t["mean_s"].as_float().unwrap() > 0.0);
    assert!(t["p99_s"].as_float().unwrap() > 0.0);
}

#[test]
fn pendulum_compare_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    ok(&["pendulum-compare", "--steps", "50", "--quiet", "--out", s(&out)]);
    let rows = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count() - 1;
    assert_eq!(rows("sync.csv"), 150);
    assert_eq!(rows("async.csv"), 150);
    let summary: toml::Table = fs::read_to_string(out.join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["seed"].as_array().unwrap().len(), 3);
}

#[test]
fn error_paths_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!mapless(&["fly"]).status.success());
    assert!(!mapless(&[]).status.success());
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[episode]\nv_max = -1.0\n").unwrap();
    let r = mapless(&["train", "--config", s(&bad), "--out", s(&tmp.path().join("o"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("episode.v_max"));
    assert!(!tmp.path().join("o").exists());
    let r = mapless(&["pendulum-compare", "--seeds", "2", "--out", s(&tmp.path().join("p"))]);
    assert!(!r.status.success());
}
