use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bratteli"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bratteli-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn emit(name: &str) -> PathBuf {
    let p = tmp(&format!("{name}.json"));
    let o = run(&["catalog", "emit", name, "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    p
}

#[test]
fn stochastic_matrix_of_three_odometer() {
    let spec = emit("odometer3");
    let o = run(&["stochastic", "--spec", spec.to_str().unwrap(), "--level", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["matrix"], serde_json::json!([["1", "0"], ["1/3", "2/3"]]));
}

#[test]
fn unique_certifies_b1_with_default_schedule() {
    let spec = emit("b1");
    let o = run(&["unique", "--spec", spec.to_str().unwrap(), "--budget", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["status"], "Certified");
    assert_eq!(v["certificate"]["levels"], serde_json::json!([0, 1, 2, 5, 19]));
}

#[test]
fn unique_reports_undetermined_with_exit_two() {
    let o = run(&["unique", "--spec", "catalog:b1", "--eps-count", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["status"], "Undetermined");
}

#[test]
fn zero_column_is_rejected_with_level() {
    let p = tmp("zero.json");
    fs::write(&p, r#"{"generator":"explicit","matrices":[[[1,0],[1,0]]],"root_edges":[1,1]}"#).unwrap();
    let o = run(&["validate", "--spec", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("level 1"), "{err}");
}

#[test]
fn malformed_json_is_an_input_error() {
    let p = tmp("bad.json");
    fs::write(&p, "{\"generator\": ").unwrap();
    let o = run(&["validate", "--spec", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flags_exit_one_and_help_exits_zero() {
    assert_eq!(run(&["--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["stochastic", "--spec", "catalog:b1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn reports_are_byte_identical() {
    let args = ["stationary", "--spec", "catalog:two-classes", "--cross", "3,30"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emitted_spec_round_trips() {
    for (name, args) in [
        ("b1", vec!["simplex", "--level", "2", "--m", "4"]),
        ("two-classes", vec!["stationary", "--levels", "4"]),
        ("pascal", vec!["chains", "--window", "4"]),
        ("countable", vec!["count", "--level", "2", "--m", "6"]),
    ] {
        let spec = emit(name);
        let mut from_file = args.clone();
        from_file.extend(["--spec", spec.to_str().unwrap()]);
        let mut built_in = args.clone();
        let cat = format!("catalog:{name}");
        built_in.extend(["--spec", cat.as_str()]);
        let a = run(&from_file);
        let b = run(&built_in);
        assert_eq!(a.status.code(), b.status.code(), "{name}");
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}

#[test]
fn keys_are_sorted_and_rationals_are_strings() {
    let o = run(&["count", "--spec", "catalog:b2", "--level", "2", "--m", "10"]);
    let v = json(&o);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(v["gap"].is_string());
}

#[test]
fn exact_reports_carry_no_floats() {
    fn has_float(v: &Value) -> bool {
        match v {
            Value::Number(n) => n.is_f64(),
            Value::Array(a) => a.iter().any(has_float),
            Value::Object(m) => m.iter().any(|(k, x)| k != "radius" && k != "approx" && has_float(x)),
            _ => false,
        }
    }
    for args in [
        vec!["unique", "--spec", "catalog:b1"],
        vec!["simplex", "--spec", "catalog:b1", "--level", "2", "--m", "3"],
        vec!["extend", "--spec", "catalog:odometer3", "--w", "1", "--mass", "--window", "8"],
        vec!["count", "--spec", "catalog:b2", "--level", "2", "--m", "8", "--traces"],
    ] {
        let o = run(&args);
        assert!(!has_float(&json(&o)), "{args:?}");
    }
}

#[test]
fn float_mode_labels_itself() {
    let o = run(&["unique", "--spec", "catalog:b1", "--mode", "float"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["mode"], "float");
    assert_eq!(run(&["chains", "--spec", "catalog:pascal", "--mode", "float"]).status.code(), Some(1));
}

#[test]
fn csv_is_offered_for_series() {
    let o = run(&["simplex", "--spec", "catalog:b1", "--level", "2", "--m", "3", "--series", "--format", "csv"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "step,diameter_num,diameter_den\n0,2,1\n1,2,3\n2,1,3\n3,1,5\n");
    let o = run(&["unique", "--spec", "catalog:b1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn digit_cap_is_a_clean_error() {
    let o = bin()
        .args(["heights", "--spec", "catalog:b1"])
        .env("BRATTELI_MAX_DIGITS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("BRATTELI_MAX_DIGITS"));
}

#[test]
fn chains_on_pascal_exit_two() {
    let o = run(&["chains", "--spec", "catalog:pascal", "--window", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["status"], "NoAdmissiblePartition");
}

#[test]
fn extension_of_odometer_columns() {
    let o = run(&["extend", "--spec", "catalog:odometer3", "--w", "0", "--mass", "--window", "6"]);
    let v = json(&o);
    assert_eq!(v["mass"]["masses"], serde_json::json!(["1", "1", "1", "1", "1", "1"]));
    let o = run(&["extend", "--spec", "catalog:odometer3", "--w", "1", "--mass", "--window", "6"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["mass"]["masses"][5], "243/32");
}

#[test]
fn orbit_covers_the_tower() {
    let o = run(&["code", "--spec", "catalog:pascal", "--level", "4", "--vertex", "2", "--orbit", "--depth", "6"]);
    let v = json(&o);
    assert_eq!(v["orbit_length"].as_u64().unwrap().to_string(), v["height"].as_str().unwrap());
}

#[test]
fn catalog_check_of_light_entries() {
    for name in ["odometer3", "trivial"] {
        let o = run(&["catalog", "check", name]);
        assert_eq!(o.status.code(), Some(0), "{name}");
        assert_eq!(json(&o)["all_hold"], true);
    }
}

#[test]
fn text_and_out_file() {
    let p = tmp("heights.txt");
    let o = run(&["heights", "--spec", "catalog:odometer3", "--level", "2", "--format", "text", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.contains("levels[0].heights: [9, 9]"), "{text}");
}
