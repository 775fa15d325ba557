//! Acceptance gate: one line per criterion, written straight to stderr so
//! it shows up in the test log whether or not the criterion passes.

use std::io::Write;
use std::time::Instant;

use mbump_core::constants::{matrix_ap, two_weight_apq};
use mbump_core::dyadic::{Census, Lattice};
use mbump_core::reducing::MveeOptions;
use mbump_core::verify::{estimate_norm, exact_avg_norm_p2, run_suite, OperatorSpec, SuiteConfig, SuiteReport, WeightedOperator};
use mbump_core::weights::WeightField;
use mbump_core::young::{luxemburg_norm, YoungFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(tag: &str, pass: bool, text: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "{tag} {verdict} {text}");
}

fn failing(r: &SuiteReport) -> Vec<String> {
    r.checks.iter().filter(|c| !c.pass).map(|c| format!("{}: {} vs {:?}", c.name, c.measured, c.bound)).collect()
}

/// Runs suites with default settings against a wall-clock limit.
fn suites(tag: &str, what: &str, names: &[&str], limit: Option<f64>) {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut count = 0;
    for name in names {
        let r = run_suite(name, &SuiteConfig::default()).unwrap();
        count += r.checks.len();
        bad.extend(failing(&r).into_iter().map(|f| format!("{name}/{f}")));
    }
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| secs < l);
    let limit_text = limit.map(|l| format!(" (limit {l} s)")).unwrap_or_default();
    let pass = bad.is_empty() && in_time;
    line(tag, pass, &format!("{what}: {count} checks, {} failing, {secs:.1} s{limit_text} {bad:?}", bad.len()));
    assert!(pass, "{tag}: {bad:?}, {secs:.1} s");
}

#[test]
fn generalized_holder() {
    suites("AC1", "generalized Hölder over 200 trials", &["holder"], Some(5.0));
}

#[test]
fn luxemburg_power_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r: f64 = rng.random_range(1.0..6.0);
        let m = rng.random_range(1..=64);
        let v: Vec<f64> = (0..m).map(|_| (rng.random_range(-3.0f64..3.0)).exp()).collect();
        let lux = luxemburg_norm(&v, &YoungFn::power(r).unwrap()).unwrap();
        let direct = (v.iter().map(|x| x.powf(r)).sum::<f64>() / m as f64).powf(1.0 / r);
        worst = worst.max((lux - direct).abs() / direct);
    }
    let pass = worst <= 1e-9;
    line("AC2", pass, &format!("Luxemburg norm of t^r vs r-th power mean, 100 trials: worst relative error {worst:.2e} (tolerance 1e-9)"));
    assert!(pass);
}

#[test]
fn reducing_operator_bands() {
    suites("AC3", "reducing operators on 50 fields, 1000 probes each", &["reducing"], Some(60.0));
}

#[test]
fn halves_anchor() {
    let lat = Lattice::new(1, 1).unwrap();
    let w = WeightField::from_scalars(lat, &[1.0, 4.0]).unwrap();
    // avg w = 5/2, avg 1/w = 5/8
    let hand_a2 = 2.5 * 0.625;
    let a2 = matrix_ap(&w, 2.0, Census::Dyadic).unwrap().value;
    let norm = exact_avg_norm_p2(&w, &w, &lat.full_block(), 0.0).unwrap();
    let apq = two_weight_apq(&w, &w, 2.0, 2.0, 0.0, Census::Dyadic).unwrap().value;
    let op = WeightedOperator::new(OperatorSpec::Averaging { alpha: 0.0, cubes: vec![lat.full_block()] }, &w, &w, 2.0, 2.0, &MveeOptions::default()).unwrap();
    let est = estimate_norm(&op, 2.0, 2.0, 8, 1).unwrap().value;
    let ratio = norm / a2.sqrt();
    let pass = (a2 - hand_a2).abs() <= 1e-12
        && (norm - 1.25).abs() <= 1e-12
        && (ratio - 1.0).abs() <= 1e-9
        && (norm / apq - 1.0).abs() <= 1e-9
        && (est / norm - 1.0).abs() <= 1e-9;
    line("AC4", pass, &format!("w = {{1, 4}} on halves: A2 = {a2} (hand 1.5625), single-cube norm = {norm} (hand 1.25), ratio = {ratio}, estimate = {est}"));
    assert!(pass);
}

#[test]
fn averaging_operator_characterization() {
    suites("AC5", "averaging operators: sufficiency and necessity over 100 pairs", &["avgop"], Some(300.0));
}

#[test]
fn weak_type_bounds() {
    suites("AC6", "weak-type norms and single-cube recovery", &["weaktype"], None);
}

#[test]
fn bump_bounds_for_maximal_fractional_and_sparse() {
    suites("AC7", "strong-norm ratios and N_Q scans, C <= 8", &["maximal", "fracint", "sparse"], None);
}

#[test]
fn sharp_constant_scaling() {
    suites("AC8", "sparse norm vs [W]_Ap scaling slope", &["sharpconst"], Some(600.0));
}

#[test]
fn reverse_holder() {
    suites("AC9", "reverse Hölder on generated direction weights", &["rh"], None);
}

#[test]
fn pointwise_duality_and_level_growth() {
    suites("AC10", "pointwise domination, duality and level growth", &["pointwise", "duality", "degenerate"], None);
}

#[test]
fn poincare_anchor_and_refinement() {
    suites("AC11", "Poincaré anchor 1/π and refinement stability", &["poincare"], None);
}

#[test]
fn reports_are_deterministic() {
    let mut same = true;
    let mut names = Vec::new();
    for name in ["holder", "weaktype", "degenerate", "convolution"] {
        let cfg = SuiteConfig { seed: 11, trials: Some(3), ..SuiteConfig::default() };
        let a = serde_json::to_string(&run_suite(name, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite(name, &cfg).unwrap()).unwrap();
        same &= a == b;
        names.push(name);
    }
    line("AC12", same, &format!("repeated runs of {names:?} give byte-identical JSON"));
    assert!(same);
}
