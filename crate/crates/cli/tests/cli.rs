use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn marl_sim(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_marl-sim"));
    cmd.args(args).env_remove("MARL_SIM_SEED");
    if let Some(s) = env_seed {
        cmd.env("MARL_SIM_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "bad.cfg",
        "[topology]\nn_uavs = 2\n[learner]\ngama = 0.3\n",
    );
    let out = marl_sim(
        &[
            "run",
            "--scenario",
            p(&cfg),
            "--out",
            p(&tmp.path().join("o")),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gama"));
}

#[test]
fn missing_scenario_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = marl_sim(
        &[
            "run",
            "--scenario",
            p(&tmp.path().join("nope.cfg")),
            "--out",
            p(tmp.path()),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_guard_rejects_thirty_uavs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "big.cfg", "[topology]\nn_uavs = 30\n");
    let out = marl_sim(
        &[
            "oracle",
            "--scenario",
            p(&cfg),
            "--out",
            p(&tmp.path().join("o")),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the guard"));
}

#[test]
fn oracle_tables_have_one_row_per_partition() {
    let tmp = tempfile::tempdir().unwrap();
    for (file, rows) in [("two_uav.cfg", 4), ("six_uav.cfg", 64)] {
        let dir = tmp.path().join(file);
        let out = marl_sim(
            &["oracle", "--scenario", p(&scenario(file)), "--out", p(&dir)],
            None,
        );
        assert!(out.status.success(), "{out:?}");
        let csv = fs::read_to_string(dir.join("oracle.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("partition_bits,r_sf,r_pu,fairness,objective,is_best")
        );
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), rows);
        assert!(body.iter().any(|l| l.ends_with(",true")));
    }
}

#[test]
fn run_writes_the_documented_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = marl_sim(
        &[
            "run",
            "--scenario",
            p(&scenario("two_uav.cfg")),
            "--out",
            p(&dir),
            "--dump-qtables",
            "--oracle",
        ],
        None,
    );
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "slot,partition_bits,r_sf,r_pu,sum_rate,fairness,reward,n_switches"
    );
    assert_eq!(lines.len(), 201);
    let summary = json(&dir.join("summary.json"));
    for key in [
        "converged_at",
        "final_partition",
        "oracle_match",
        "oracle_tie_count",
        "objective_gap",
    ] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert_eq!(summary["seed"], 21);
    let q = json(&dir.join("qtables/uav1.json"));
    assert_eq!(q["values"].as_array().unwrap().len(), 4);
    assert!(dir.join("oracle.csv").exists());
}

#[test]
fn seed_precedence_cli_then_env_then_file() {
    let tmp = tempfile::tempdir().unwrap();
    let s = p(&scenario("two_uav.cfg")).to_string();
    let seed_of = |dir: &str, args: &[&str], env: Option<&str>| {
        let out_dir = tmp.path().join(dir);
        let mut all = vec!["run", "--scenario", &s, "--out", p(&out_dir)];
        all.extend_from_slice(args);
        assert!(marl_sim(&all, env).status.success());
        json(&out_dir.join("summary.json"))["seed"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(seed_of("file", &[], None), 21);
    assert_eq!(seed_of("env", &[], Some("99")), 99);
    assert_eq!(seed_of("cli", &["--seed", "5"], Some("99")), 5);
    let bad = marl_sim(
        &["run", "--scenario", &s, "--out", p(tmp.path())],
        Some("abc"),
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn effective_config_round_trips_to_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = marl_sim(
        &[
            "run",
            "--scenario",
            p(&scenario("six_uav.cfg")),
            "--out",
            p(&first),
            "--seed",
            "77",
            "--objective",
            "sum_rate",
        ],
        None,
    );
    assert!(out.status.success());
    let second = tmp.path().join("second");
    let out = marl_sim(
        &[
            "run",
            "--scenario",
            p(&first.join("effective.cfg")),
            "--out",
            p(&second),
        ],
        None,
    );
    assert!(out.status.success());
    for f in ["metrics.csv", "summary.json", "effective.cfg"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(json(&second.join("summary.json"))["objective"], "sum_rate");
}

#[test]
fn single_seed_sweep_matches_its_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sweep");
    let out = marl_sim(
        &[
            "sweep",
            "--scenario",
            p(&scenario("two_uav.cfg")),
            "--out",
            p(&dir),
            "--seeds",
            "1",
            "--jobs",
            "1",
        ],
        None,
    );
    assert!(out.status.success(), "{out:?}");
    let agg = json(&dir.join("aggregate.json"));
    let run = json(&dir.join("run_0000/summary.json"));
    assert_eq!(agg["runs"][0], run);
    assert_eq!(agg["completed"], 1);
    let matched = if run["oracle_match"].as_bool().unwrap() {
        1.0
    } else {
        0.0
    };
    assert_eq!(agg["match_rate"].as_f64().unwrap(), matched);
    match run["converged_at"].as_u64() {
        Some(t) => assert_eq!(agg["converged_at"]["median"], t),
        None => assert!(agg["converged_at"].is_null()),
    }
}

#[test]
fn sweep_flags_partial_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sweep");
    fs::create_dir_all(&dir).unwrap();
    // A stray file where run 1's directory should go leaves that run partial.
    fs::write(dir.join("run_0001"), "interrupted").unwrap();
    let out = marl_sim(
        &[
            "sweep",
            "--scenario",
            p(&scenario("two_uav.cfg")),
            "--out",
            p(&dir),
            "--seeds",
            "3",
            "--seed",
            "10",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(3));
    let agg = json(&dir.join("aggregate.json"));
    assert_eq!(agg["incomplete"], serde_json::json!([11]));
    assert_eq!(agg["completed"], 2);
}

#[test]
fn zero_seed_sweep_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = marl_sim(
        &[
            "sweep",
            "--scenario",
            p(&scenario("two_uav.cfg")),
            "--out",
            p(tmp.path()),
            "--seeds",
            "0",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}
