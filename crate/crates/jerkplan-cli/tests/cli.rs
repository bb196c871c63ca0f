//! End-to-end tests that drive the compiled `jerkplan` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn jerkplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jerkplan"))
        .args(args)
        .output()
        .expect("the binary should run")
}

fn jerkplan_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jerkplan"))
        .args(args)
        .env("JERKPLAN_THREADS", threads)
        .output()
        .expect("the binary should run")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("the binary should exit normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("temp paths should be UTF-8")
}

fn parse_json(text: &str) -> Value {
    serde_json::from_str(text).expect("output should be JSON")
}

fn cap_vector(instance_json: &Value) -> Vec<f64> {
    instance_json["u"]
        .as_array()
        .expect("u should be an array")
        .iter()
        .map(|x| x.as_f64().expect("caps should be numbers"))
        .collect()
}

#[test]
fn gen_exp1_caps_form_seven_plateaus() {
    let out = jerkplan(&["gen", "exp1", "--n", "100", "--seed", "7"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let v = parse_json(&stdout(&out));
    assert_eq!(v["version"], 1);
    assert_eq!(v["n"], 100);
    let u = cap_vector(&v);
    assert_eq!(u.len(), 100);
    assert_eq!(u[0], 0.0);
    assert_eq!(u[99], 0.0);
    let interior = &u[1..99];
    let plateaus = 1 + interior.windows(2).filter(|p| p[0] != p[1]).count();
    assert_eq!(plateaus, 7);
    assert!(interior.iter().all(|&x| x > 0.0 && x < 100.0));
}

#[test]
fn gen_rejects_grids_below_the_minimum() {
    let out = jerkplan(&["gen", "exp1", "--n", "3"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).starts_with("error:"), "stderr: {}", stderr(&out));
}

#[test]
fn gen_sine_ignores_the_seed_and_repeats_bytes() {
    let a = jerkplan(&["gen", "sine", "--n", "64"]);
    let b = jerkplan(&["gen", "sine", "--n", "64", "--seed", "5"]);
    assert_eq!(exit_code(&a), 0, "stderr: {}", stderr(&a));
    assert_eq!(exit_code(&b), 0, "stderr: {}", stderr(&b));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn solve_writes_a_capped_profile_and_a_certified_report() {
    let dir = tempfile::tempdir().expect("tempdir");
    let inst = dir.path().join("instance.json");
    let profile = dir.path().join("profile.csv");
    let report = dir.path().join("report.json");

    let out = jerkplan(&["gen", "exp1", "--n", "100", "--seed", "1", "--out", path(&inst)]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let out = jerkplan(&[
        "solve",
        path(&inst),
        "--profile-out",
        path(&profile),
        "--report-out",
        path(&report),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let u = cap_vector(&parse_json(&fs::read_to_string(&inst).expect("instance readable")));
    let csv = fs::read_to_string(&profile).expect("profile readable");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,w,v,a,jerk"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<f64> = row
            .split(',')
            .map(|f| f.parse().expect("profile fields should be numbers"))
            .collect();
        assert_eq!(fields.len(), 5, "row {i}");
        let v = fields[2];
        assert!(v <= u[i].sqrt() + 1e-6, "row {i}: speed {v} above cap {}", u[i]);
    }

    let rep = parse_json(&fs::read_to_string(&report).expect("report readable"));
    assert_eq!(rep["version"], 1);
    assert_eq!(rep["reason"], "kkt_certified");
    assert!(rep["kkt_residual"].as_f64().expect("kkt_residual") <= 1e-4);
    let t = rep["travel_time"].as_f64().expect("travel_time");
    assert!((t - 12.469984280).abs() < 1e-6, "travel time {t}");

    let profile2 = dir.path().join("profile2.csv");
    let out = jerkplan(&["solve", path(&inst), "--profile-out", path(&profile2)]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(
        fs::read(&profile).expect("first profile"),
        fs::read(&profile2).expect("second profile"),
        "repeat solves should be byte-identical"
    );

    let out = jerkplan(&["check", path(&inst), path(&profile)]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out).lines().last(), Some("feasible"));
}

#[test]
fn eta_mode_with_lp_directions_lands_near_the_default() {
    let dir = tempfile::tempdir().expect("tempdir");
    let inst = dir.path().join("instance.json");
    let r1 = dir.path().join("default.json");
    let r2 = dir.path().join("eta_lp.json");

    let out = jerkplan(&["gen", "exp1", "--n", "50", "--seed", "1", "--out", path(&inst)]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let out = jerkplan(&["solve", path(&inst), "--report-out", path(&r1)]);
    assert!(exit_code(&out) <= 1, "stderr: {}", stderr(&out));
    let out = jerkplan(&[
        "solve",
        path(&inst),
        "--mode",
        "eta",
        "--dir",
        "lp",
        "--report-out",
        path(&r2),
    ]);
    assert!(exit_code(&out) <= 1, "stderr: {}", stderr(&out));

    let t1 = parse_json(&fs::read_to_string(&r1).expect("default report"))["travel_time"]
        .as_f64()
        .expect("travel_time");
    let t2 = parse_json(&fs::read_to_string(&r2).expect("eta report"))["travel_time"]
        .as_f64()
        .expect("travel_time");
    assert!((t1 - t2).abs() <= 0.01 * t1.min(t2), "default {t1}, eta+lp {t2}");
}

#[test]
fn check_flags_a_tampered_profile() {
    let dir = tempfile::tempdir().expect("tempdir");
    let inst = dir.path().join("instance.json");
    let profile = dir.path().join("profile.csv");

    let out = jerkplan(&["gen", "exp1", "--n", "50", "--seed", "2", "--out", path(&inst)]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let out = jerkplan(&["solve", path(&inst), "--profile-out", path(&profile)]);
    assert!(exit_code(&out) <= 1, "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(&profile).expect("profile readable");
    let mut lines: Vec<String> = csv.lines().map(str::to_owned).collect();
    let peak = (1..lines.len())
        .max_by(|&a, &b| {
            let w = |i: usize| -> f64 {
                lines[i].split(',').nth(1).expect("w field").parse().expect("w number")
            };
            w(a).total_cmp(&w(b))
        })
        .expect("data rows exist");
    let fields: Vec<&str> = lines[peak].split(',').collect();
    let w: f64 = fields[1].parse().expect("w number");
    let mut tampered = fields.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    tampered[1] = format!("{:.16e}", 1.5 * w);
    lines[peak] = tampered.join(",");
    fs::write(&profile, lines.join("\n")).expect("profile writable");

    let out = jerkplan(&["check", path(&inst), path(&profile)]);
    assert_eq!(exit_code(&out), 1, "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("infeasible:"), "stdout: {}", stdout(&out));
}

#[test]
fn solve_rejects_a_malformed_instance() {
    let dir = tempfile::tempdir().expect("tempdir");
    let inst = dir.path().join("instance.json");
    fs::write(&inst, "{ this is not json").expect("file writable");
    let out = jerkplan(&["solve", path(&inst)]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).starts_with("error:"), "stderr: {}", stderr(&out));
}

fn without_timings(mut v: Value) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.remove("seconds");
                for val in map.values_mut() {
                    strip(val);
                }
            }
            Value::Array(items) => {
                for val in items {
                    strip(val);
                }
            }
            _ => {}
        }
    }
    strip(&mut v);
    v
}

#[test]
fn bench_results_do_not_depend_on_the_thread_count() {
    let args = ["bench", "exp1", "--sizes", "20,30", "--repeats", "3"];
    let one = jerkplan_with_threads(&args, "1");
    let two = jerkplan_with_threads(&args, "2");
    assert_eq!(exit_code(&one), 0, "stderr: {}", stderr(&one));
    assert_eq!(exit_code(&two), 0, "stderr: {}", stderr(&two));

    let one = parse_json(&stdout(&one));
    let two = parse_json(&stdout(&two));
    assert_eq!(one["version"], 1);
    assert_eq!(one["suite"], "exp1");
    assert_eq!(one["entries"].as_array().map(Vec::len), Some(2));
    for entry in one["entries"].as_array().expect("entries") {
        assert_eq!(entry["runs"].as_array().map(Vec::len), Some(3));
        assert!(entry["certified"].as_u64().is_some());
    }
    assert_eq!(without_timings(one), without_timings(two));
}
