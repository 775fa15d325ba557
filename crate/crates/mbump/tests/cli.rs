use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mbump::io::read_field;
use mbump_core::constants::matrix_ap;
use mbump_core::dyadic::Census;
use mbump_core::linalg::Mat;

fn mbump(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbump")).current_dir(dir).args(args).output().expect("run mbump")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mbump(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn value_of(text: &str, name: &str) -> f64 {
    let body: String = text.lines().filter(|l| !l.starts_with("ratio")).map(|l| format!("{l}\n")).collect();
    let mut rows = csv::Reader::from_reader(body.as_bytes());
    let rec = rows.records().map(|r| r.unwrap()).find(|r| &r[0] == name).unwrap_or_else(|| panic!("no {name} row in {text}"));
    rec[6].parse().unwrap()
}

#[test]
fn zero_exponent_power_weight_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "o", "gen", "--kind", "power", "--d", "2", "--level", "3", "--n", "2", "--gamma", "0"]);
    let w = read_field(&dir.path().join("o/field.mwf")).unwrap();
    assert!(w.cells().iter().all(|m| *m == Mat::identity(2)));
    let csv = ok(dir.path(), &["--out", "o", "constant", "--u", "o/field.mwf", "--name", "ap", "--p", "3"]);
    assert_eq!(value_of(&csv, "matrix_ap"), 1.0);
    assert!(csv.trim_end().ends_with(",definitional"));
}

#[test]
fn random_generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        ["--seed", "7", "gen", "--kind", "random", "--d", "1", "--level", "8", "--n", "2", "--kappa", "10", "--lambda", "0.5", "--output", name]
    };
    ok(dir.path(), &args("a.mwf"));
    ok(dir.path(), &args("b.mwf"));
    assert_eq!(fs::read(dir.path().join("a.mwf")).unwrap(), fs::read(dir.path().join("b.mwf")).unwrap());
}

#[test]
fn constant_matches_the_library_and_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--kind", "power", "--d", "1", "--level", "8", "--n", "1", "--gamma", "-0.5"]);
    let w = read_field(&dir.path().join("field.mwf")).unwrap();
    let lib = matrix_ap(&w, 2.0, Census::Shifted).unwrap().value;
    let one = ok(dir.path(), &["--census", "shifted", "constant", "--u", "field.mwf", "--name", "ap", "--p", "2"]);
    let four = ok(dir.path(), &["--census", "shifted", "--workers", "4", "constant", "--u", "field.mwf", "--name", "ap", "--p", "2"]);
    assert!(lib.is_finite());
    assert_eq!(value_of(&one, "matrix_ap"), lib);
    assert_eq!(one, four);
}

#[test]
fn single_cube_norm_over_constant_is_one_on_halves() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("w.json"), r#"{"format":"MWF1","d":1,"level":1,"n":1,"side":1.0,"lower":[1.0,4.0]}"#).unwrap();
    let op = r#"{"kind":"averaging","alpha":0.0,"cubes":[{"d":1,"start":[0,0,0],"side":2}]}"#;
    let out = ok(dir.path(), &["norm", "--u", "w.json", "--p", "2", "--operator", op, "--name", "apq"]);
    assert!((value_of(&out, "two_weight_apq") - 1.25).abs() < 1e-12);
    let ratio: f64 = out.lines().find_map(|l| l.strip_prefix("ratio = ")).unwrap().parse().unwrap();
    assert!((ratio - 1.0).abs() < 1e-9, "{out}");
}

#[test]
fn verify_is_deterministic_and_exits_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--out", "a", "verify", "holder", "degenerate"]);
    ok(dir.path(), &["--out", "b", "--workers", "2", "verify", "holder", "degenerate"]);
    for s in ["holder", "degenerate"] {
        let a = fs::read(dir.path().join(format!("a/{s}.json"))).unwrap();
        assert_eq!(a, fs::read(dir.path().join(format!("b/{s}.json"))).unwrap());
    }
    let out = ok(dir.path(), &["--out", "r", "report", "a/holder.json", "a/degenerate.json"]);
    assert!(out.contains("2 reports, 0 failing"));
    let csv = fs::read_to_string(dir.path().join("r/checks.csv")).unwrap();
    assert!(csv.starts_with("suite,check,relation,measured,bound,pass,method"));
}

#[test]
fn config_flags_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"seed": 1, "sede": 2}"#).unwrap();
    let out = mbump(dir.path(), &["--config", "bad.json", "verify", "holder"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));

    let cfg = r#"{"d": 1, "level": 4, "n": 1, "generator": {"kind": "power", "gamma": [1.0]}, "output": "cfg.json"}"#;
    fs::write(dir.path().join("run.json"), cfg).unwrap();
    ok(dir.path(), &["--config", "run.json", "gen", "--level", "2"]);
    let w = read_field(&dir.path().join("cfg.json")).unwrap();
    assert_eq!(w.lattice().level, 2);
    assert_eq!(w.cells()[0], Mat::scalar(0.125));

    let out = mbump(dir.path(), &["verify", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mbump(dir.path(), &["constant", "--name", "ap", "--p", "2"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs `u`"));
}
