use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sandpile1d::experiments::{run, scenario_hash, validate_file, Scenario};
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sandpile1d")).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exact_check_all_for_n1() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["exact", "--n", "1", "--check", "all", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record = read_json(&dir.path().join("exact.json"));
    let v = &record["result"]["volumes"][0];
    assert_eq!(v["recurrent_size"], 4);
    assert!(v["stationary_max_deviation"].as_f64().unwrap() <= 1e-12);
    assert!(v["reversibility_max_deviation"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["bijection"]["failures"].as_array().unwrap().len(), 0);
    let csv = fs::read_to_string(dir.path().join("exact.n1.distribution.csv")).unwrap();
    let weights: Vec<f64> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(weights.len(), 8);
    assert_eq!(weights.iter().filter(|w| (**w - 0.25).abs() < 1e-12).count(), 4);
    for key in ["tool", "version", "scenario_hash", "seed", "scenario", "timing_file"] {
        assert!(record.get(key).is_some(), "missing {key}");
    }
    assert!(read_json(&dir.path().join("exact.timing.json"))["wall_clock_seconds"].is_number());
}

#[test]
fn identical_scenarios_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = cli(&[
            "prop51",
            "--n",
            "1,2",
            "--k",
            "5",
            "--samples",
            "5000",
            "--seed",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for file in ["prop51.json", "prop51.csv"] {
        assert_eq!(
            fs::read_to_string(a.path().join(file)).unwrap(),
            fs::read_to_string(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    let csv = fs::read_to_string(a.path().join("prop51.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,k,empirical,stderr,theory,exact");
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn theorem51_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "theorem51",
        "--t",
        "14",
        "--n",
        "5,10",
        "--samples",
        "500",
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("theorem51.csv")).unwrap();
    assert!(csv.starts_with("n,t,estimate,stderr,first_term\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn validate_reports_fields() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, "name = \"tiny\"\ncommand = \"exact\"\nseed = 1\n\n[params]\nn = [1]\n").unwrap();
    let out = cli(&["validate", good.to_str().unwrap()]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], true);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\ncommand = \"teleport\"\n").unwrap();
    let out = cli(&["validate", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["errors"][0]["field"], "command");

    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "name = \"x\"\ncommand = \"exact\"\n\n[params]\nn = [1]\nsamplez = 3\n").unwrap();
    let report = validate_file(&typo);
    assert!(!report.ok);
    assert!(report.errors[0].message.contains("samplez"));
}

#[test]
fn series_beyond_radius_warns_then_fails_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("series.json");
    fs::write(
        &scenario,
        r#"{"name": "far", "command": "series", "seed": 0, "params": {"f": "occ0", "eta": "0 0 ones 1", "t": [0.3]}}"#,
    )
    .unwrap();
    let report = validate_file(&scenario);
    assert!(report.ok);
    assert_eq!(report.warnings[0].field, "params.t");

    let out = cli(&["run", scenario.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = read_json(&dir.path().join("far.error.json"));
    assert_eq!(err["error"]["kind"], "model_error");
    assert!(err["error"]["message"].as_str().unwrap().contains("radius"));
    assert!(!dir.path().join("far.json").exists());
}

#[test]
fn series_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let eta = dir.path().join("eta.txt");
    fs::write(&eta, "-1 1 ones 2 1 2\n").unwrap();
    let out = cli(&[
        "series",
        "--f",
        "pair01",
        "--eta",
        eta.to_str().unwrap(),
        "--t",
        "0.01",
        "--tol",
        "1e-6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record = read_json(&dir.path().join("series.json"));
    let row = &record["result"]["results"][0];
    assert!(row["tail_bound"].as_f64().unwrap() < 1e-6);
    assert_eq!(record["scenario"]["params"]["eta"], "-1 1 ones 2 1 2");
}

#[test]
fn other_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let runs: [&[&str]; 5] = [
        &["stabilize", "--n", "2", "--grains", "-2 2 1 3 1 1 2", "--out", d],
        &["avalanche", "--set=-1,0,2", "--horizon", "1", "--samples", "50", "--out", d],
        &["couple", "--coupling", "n1n", "--n", "2", "--horizon", "1", "--samples", "50", "--out", d],
        &["fvsp", "--n", "1", "--t", "0.5", "--samples", "500", "--out", d],
        &["discrete", "--n", "1", "--steps", "20", "--samples", "500", "--out", d],
    ];
    for args in runs {
        let out = cli(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read_json(&dir.path().join("stabilize.json"))["result"]["bruteforce_agrees"], true);
    assert_eq!(read_json(&dir.path().join("couple.json"))["result"]["order_violations"], 0);
    let jsonl = fs::read_to_string(dir.path().join("avalanche.trajectory.jsonl")).unwrap();
    let header: Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(header["initial"], "-1 2 ones 2 2 1 2");
    assert!(fs::read_to_string(dir.path().join("fvsp.law.csv"))
        .unwrap()
        .starts_with("state_index,heights,exact,empirical"));
}

#[test]
fn library_run_embeds_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::from_toml_str(
        "name = \"law\"\ncommand = \"prop51\"\nseed = 9\n\n[params]\nn = [1]\nk = 3\nsamples = 1000\n",
    )
    .unwrap();
    let out = run(&scenario, Some(dir.path())).unwrap();
    assert_eq!(out.record["scenario_hash"], scenario_hash(&scenario));
    let back: Scenario = serde_json::from_value(out.record["scenario"].clone()).unwrap();
    assert_eq!(back, scenario);
}
