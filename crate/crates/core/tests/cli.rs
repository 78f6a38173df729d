use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const RECORD_COLUMNS: [&str; 12] = [
    "experiment",
    "scheme",
    "mu",
    "p_sum_w",
    "seed",
    "x",
    "num_sensing",
    "accuracy",
    "rate_bps_hz",
    "objective",
    "wall_time_ms",
    "dominated",
];

fn mpisac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpisac"))
        .args(args)
        .env("MPISAC_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = mpisac(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Rows split into fields with the wall-time column blanked.
fn without_timing(csv: &str) -> Vec<Vec<String>> {
    let timing = RECORD_COLUMNS
        .iter()
        .position(|&c| c == "wall_time_ms")
        .unwrap();
    csv.lines()
        .map(|l| {
            let mut f: Vec<String> = l.split(',').map(str::to_string).collect();
            if f[timing] != "wall_time_ms" {
                f[timing].clear();
            }
            f
        })
        .collect()
}

#[test]
fn weight_outside_unit_interval_is_a_usage_error() {
    for bad in ["1.2", "-0.1", "nan"] {
        let arg = format!("--mu={bad}");
        let out = mpisac(&["run", &arg]);
        assert_eq!(out.status.code(), Some(2), "--mu {bad}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));
    }
    assert!(!mpisac(&["region", "--mu-grid", "0:2:0.5"]).status.success());
}

#[test]
fn bad_inputs_exit_nonzero_with_diagnostic() {
    let out = mpisac(&["run", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[params]\nK = 0\n").unwrap();
    assert!(!mpisac(&["run", "--scenario", path.to_str().unwrap()])
        .status
        .success());

    assert!(!mpisac(&["compare", "--psum-grid", "5:1:1"])
        .status
        .success());
    assert!(!mpisac(&["fusion-curve", "--p", "0.1,0.2", "--q", "0.1"])
        .status
        .success());
    assert!(!mpisac(&["fusion-curve", "--p", "1.5", "--q", "0.1"])
        .status
        .success());
}

#[test]
fn run_prints_solution_json() {
    let v: Value = serde_json::from_str(&stdout(&[
        "run",
        "--scenario",
        "default",
        "--mu",
        "0.5",
        "--seed",
        "0",
    ]))
    .unwrap();
    let sol = &v["solution"];
    let (mu, acc, rate, obj) = (
        v["mu"].as_f64().unwrap(),
        sol["accuracy"].as_f64().unwrap(),
        sol["rate"].as_f64().unwrap(),
        sol["objective"].as_f64().unwrap(),
    );
    assert!((obj - ((1.0 - mu) * acc + mu * rate)).abs() <= 1e-12);
    assert_eq!(sol["x"].as_str().unwrap().len(), 6);
    // the full-model cross-check agrees with the simplified rate
    assert!((v["link"]["rate"].as_f64().unwrap() - rate).abs() <= 1e-6 * rate);
}

#[test]
fn exhaustive_run_dominates_search() {
    for mu in ["0", "0.3", "1"] {
        let obj = |extra: &[&str]| {
            let mut args = vec!["run", "--mu", mu, "--seed", "4"];
            args.extend_from_slice(extra);
            let v: Value = serde_json::from_str(&stdout(&args)).unwrap();
            v["solution"]["objective"].as_f64().unwrap()
        };
        assert!(obj(&["--exhaustive"]) >= obj(&[]));
        assert!(obj(&["--exhaustive"]) >= obj(&["--L", "1", "--max-iter", "1"]));
    }
}

#[test]
fn seed_split_flags() {
    let a = stdout(&[
        "run",
        "--seed",
        "3",
        "--channel-seed",
        "7",
        "--search-seed",
        "8",
    ]);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["channel_seed"], 7);
    assert_eq!(v["search_seed"], 8);
}

#[test]
fn compare_csv_schema_and_golden() {
    let csv = stdout(&[
        "compare",
        "--psum-grid",
        "10mW:50mW:20mW",
        "--seeds",
        "1",
        "--seed",
        "0",
    ]);
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').collect::<Vec<_>>(), RECORD_COLUMNS);
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), RECORD_COLUMNS.len());
        let acc: f64 = f[7].parse().unwrap();
        let rate: f64 = f[8].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc) && rate >= 0.0);
        assert_eq!(f[5].len(), 6);
        assert_eq!(f[6].parse::<usize>().unwrap(), f[5].matches('1').count());
        if f[1] == "multi-radar" {
            assert_eq!(rate, 0.0);
        }
    }
    assert_eq!(
        without_timing(&csv),
        without_timing(&golden("compare_default_seed0.csv"))
    );
}

#[test]
fn output_independent_of_worker_count() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_mpisac"))
            .args(["region", "--seeds", "3", "--mu-grid", "0:1:0.25"])
            .env("MPISAC_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        without_timing(&String::from_utf8(out.stdout).unwrap())
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn region_json_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("region.json");
    let out = mpisac(&[
        "region",
        "--mu-grid",
        "0,0.5,1",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let rows: Vec<Value> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["dominated"].is_boolean()));
    assert_eq!(rows[0]["scheme"], "mpisac");
}

#[test]
fn region_exhaustive_flag_switches_solver() {
    let csv = stdout(&["region", "--mu-grid", "0,1", "--exhaustive"]);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("mpisac-exhaustive")));
}

#[test]
fn fusion_curve_csv_matches_golden() {
    let csv = stdout(&[
        "fusion-curve",
        "--p",
        "0.05,0.04,0.07,0.02,0.03,0.08,0.10",
        "--q",
        "0.19,0.21,0.17,0.16,0.15,0.13,0.11",
    ]);
    assert_eq!(csv, golden("fusion_curve_seven_sensors.csv"));
    let peak = csv
        .lines()
        .skip(1)
        .find(|l| l.ends_with(",1,1"))
        .expect("closed-form and best thresholds coincide");
    assert!(peak.starts_with("3,"));
}

#[test]
fn fusion_curve_defaults_to_scenario_profile() {
    let csv = stdout(&["fusion-curve"]);
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,exact,approx,closed_form_threshold,best_exact_threshold"
    );
    let one = stdout(&["fusion-curve", "--p", "0.05", "--q", "0.19"]);
    assert_eq!(one.lines().nth(1).unwrap(), "1,0.88,0.88,1,1");
}
