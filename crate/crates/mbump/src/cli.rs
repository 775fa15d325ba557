//! `mbump` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mbump_core::constants::{
    finish, BumpDefinitional, BumpParams, BumpReducing, ConstantReport, Method, MatrixAp, Params, TwoWeightApq,
};
use mbump_core::dyadic::{census_cubes, Census, Lattice};
use mbump_core::reducing::MveeOptions;
use mbump_core::verify::{
    estimate_norm, run_suite, weak_norm_estimate, NormOperator, OperatorSpec, SuiteReport, WeightedOperator, SUITES,
};
use mbump_core::weights::{lp_norm, GridFunction, WeightField};
use mbump_core::young::YoungFn;
use serde::de::DeserializeOwned;

use crate::config::{need, ConstantKind, Generator, RunConfig};
use crate::io::{read_field, write_field, write_scalar, ScalarField, VectorJson};
use crate::parallel::{par_map, par_scan_max};
use crate::report::{canonical_json, checks_csv, plots, rows_csv, summary, Row};

#[derive(Debug, Parser)]
#[command(name = "mbump", version, about = "Matrix weights, bump constants and operator norms on dyadic grids")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Threads for cube scans and suite runs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub census: Option<CensusArg>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CensusArg {
    Dyadic,
    Shifted,
    Brute,
}

impl From<CensusArg> for Census {
    fn from(c: CensusArg) -> Self {
        match c {
            CensusArg::Dyadic => Census::Dyadic,
            CensusArg::Shifted => Census::Shifted,
            CensusArg::Brute => Census::Brute,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Identity,
    Power,
    Random,
    Twisted,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Definitional,
    Reducing,
}

fn json_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Default, Args)]
pub struct WeightArgs {
    /// Weight file for U (MWF1, or its JSON mirror).
    #[arg(long)]
    pub u: Option<PathBuf>,
    /// Weight file for V; defaults to U.
    #[arg(long)]
    pub v: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct ConstantArgs {
    #[arg(long = "name", value_enum)]
    pub constant: Option<ConstantKind>,
    /// Young function as JSON, e.g. '{"family":"power_log","r":2,"delta":1}'.
    #[arg(long, value_parser = json_arg::<YoungFn>)]
    pub phi: Option<YoungFn>,
    #[arg(long, value_parser = json_arg::<YoungFn>)]
    pub psi: Option<YoungFn>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Compute bump constants even when a B-class check fails.
    #[arg(long)]
    pub allow_nonmember: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a weight field.
    Gen {
        #[arg(long, value_enum)]
        kind: Option<GenKind>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        side: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gamma: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        center: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        angle: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Output file name in the output directory; `.json` selects the
        /// JSON mirror.
        #[arg(long)]
        output: Option<String>,
    },
    /// Compute a weight constant.
    Constant {
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        constant: ConstantArgs,
    },
    /// Apply an operator to a vector function and write |Tf| as MWS1.
    Apply {
        #[command(flatten)]
        weights: WeightArgs,
        /// Operator as JSON, e.g. '{"kind":"frac_integral","alpha":0.5}'.
        #[arg(long, value_parser = json_arg::<OperatorSpec>)]
        operator: Option<OperatorSpec>,
        /// Input function as JSON {"n": .., "values": [..]}, cell-major.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Estimate an operator norm from below; with --name, also the ratio to
    /// that constant.
    Norm {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, value_parser = json_arg::<OperatorSpec>)]
        operator: Option<OperatorSpec>,
        #[arg(long)]
        budget: Option<usize>,
        /// Weak-type norm into L^{q,∞}.
        #[arg(long)]
        weak: bool,
        #[command(flatten)]
        constant: ConstantArgs,
    },
    /// Run property suites; exit status 1 if any check fails.
    Verify {
        /// Suites to run (default: all).
        suites: Vec<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        experimental: bool,
    },
    /// Summarize saved suite reports into CSV and plots.
    Report {
        /// Suite report JSON files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn weight_overrides(w: WeightArgs, c: &mut RunConfig) {
    c.u = w.u;
    c.v = w.v;
    c.p = w.p;
    c.q = w.q;
    c.alpha = w.alpha;
}

fn constant_overrides(a: ConstantArgs, c: &mut RunConfig) {
    c.constant = a.constant;
    c.phi = a.phi;
    c.psi = a.psi;
    c.method = a.method.map(|m| match m {
        MethodArg::Definitional => Method::Definitional,
        MethodArg::Reducing => Method::Reducing,
    });
    c.allow_nonmember = a.allow_nonmember.then_some(true);
}

/// Returns whether everything passed.
pub fn run(cli: Cli) -> Result<bool> {
    let base = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig {
        seed: cli.global.seed,
        workers: cli.global.workers,
        census: cli.global.census.map(Census::from),
        out: cli.global.out,
        ..Default::default()
    };
    match cli.command {
        Command::Gen { kind, d, level, n, side, gamma, center, angle, kappa, lambda, output } => {
            flags.d = d;
            flags.level = level;
            flags.n = n;
            flags.side = side;
            flags.output = output;
            let generator = generator_from_flags(kind, base.generator.clone(), gamma, center, angle, kappa, lambda)?;
            let cfg = base.overlay(flags);
            cmd_gen(&RunConfig { generator, ..cfg }).map(|_| true)
        }
        Command::Constant { weights, constant } => {
            weight_overrides(weights, &mut flags);
            constant_overrides(constant, &mut flags);
            cmd_constant(&base.overlay(flags)).map(|_| true)
        }
        Command::Apply { weights, operator, input, output } => {
            weight_overrides(weights, &mut flags);
            flags.operator = operator;
            flags.input = input;
            flags.output = output;
            cmd_apply(&base.overlay(flags)).map(|_| true)
        }
        Command::Norm { weights, operator, budget, weak, constant } => {
            weight_overrides(weights, &mut flags);
            constant_overrides(constant, &mut flags);
            flags.operator = operator;
            flags.budget = budget;
            flags.weak = weak.then_some(true);
            cmd_norm(&base.overlay(flags)).map(|_| true)
        }
        Command::Verify { suites, budget, trials, level, experimental } => {
            flags.suites = (!suites.is_empty()).then_some(suites);
            flags.budget = budget;
            flags.trials = trials;
            flags.suite_level = level;
            flags.experimental = experimental.then_some(true);
            cmd_verify(&base.overlay(flags))
        }
        Command::Report { inputs } => cmd_report(&base.overlay(flags), &inputs).map(|_| true),
    }
}

fn kind_of(g: &Generator) -> GenKind {
    match g {
        Generator::Identity => GenKind::Identity,
        Generator::Power { .. } => GenKind::Power,
        Generator::Random { .. } => GenKind::Random,
        Generator::Twisted { .. } => GenKind::Twisted,
    }
}

/// `--kind` selects a generator (keeping the config's parameters when the
/// kinds agree); the parameter flags patch whichever generator results.
fn generator_from_flags(
    kind: Option<GenKind>,
    base: Option<Generator>,
    gamma: Option<Vec<f64>>,
    center: Option<Vec<f64>>,
    angle: Option<f64>,
    kappa: Option<f64>,
    lambda: Option<f64>,
) -> Result<Option<Generator>> {
    let mut g = match (kind, base) {
        (Some(k), Some(b)) if kind_of(&b) == k => b,
        (Some(k), _) => match k {
            GenKind::Identity => Generator::Identity,
            GenKind::Power => Generator::Power { gamma: vec![0.0], center: Vec::new(), angle: 0.0 },
            GenKind::Random => Generator::Random { kappa: 10.0, lambda: 0.5 },
            GenKind::Twisted => Generator::Twisted { kappa: 1.0 },
        },
        (None, Some(b)) => b,
        (None, None) => {
            if gamma.is_some() || center.is_some() || angle.is_some() || kappa.is_some() || lambda.is_some() {
                bail!("generator parameters given without --kind");
            }
            return Ok(None);
        }
    };
    match &mut g {
        Generator::Identity => {}
        Generator::Power { gamma: g0, center: c0, angle: a0 } => {
            if let Some(v) = gamma {
                *g0 = v;
            }
            if let Some(v) = center {
                *c0 = v;
            }
            if let Some(v) = angle {
                *a0 = v;
            }
        }
        Generator::Random { kappa: k0, lambda: l0 } => {
            if let Some(v) = kappa {
                *k0 = v;
            }
            if let Some(v) = lambda {
                *l0 = v;
            }
        }
        Generator::Twisted { kappa: k0 } => {
            if let Some(v) = kappa {
                *k0 = v;
            }
        }
    }
    Ok(Some(g))
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(cfg: &RunConfig) -> Result<()> {
    let d = need(cfg.d, "d", "gen")?;
    let level = need(cfg.level, "level", "gen")?;
    let n = need(cfg.n, "n", "gen")?;
    let generator = need(cfg.generator.clone(), "generator", "gen")?;
    let lat = Lattice::with_side(d, level, cfg.side.unwrap_or(1.0))?;
    let w = generator.generate(lat, n, cfg.seed())?;
    let mut name = cfg.output.clone().unwrap_or_else(|| "field".into());
    if Path::new(&name).extension().is_none() {
        name += ".mwf";
    }
    let path = out_path(cfg, &name)?;
    write_field(&path, &w)?;
    println!(
        "generator={} seed={} d={d} level={level} n={n} side={} -> {}",
        generator.describe(),
        cfg.seed(),
        lat.side,
        path.display()
    );
    Ok(())
}

fn load_pair(cfg: &RunConfig, cmd: &str) -> Result<(WeightField, WeightField)> {
    let u = read_field(&need(cfg.u.clone(), "u", cmd)?)?;
    let v = match &cfg.v {
        Some(p) => read_field(p)?,
        None => u.clone(),
    };
    if u.lattice() != v.lattice() || u.n() != v.n() {
        bail!("U and V differ in lattice or matrix dimension");
    }
    Ok((u, v))
}

/// The constant named in `cfg`, scanned with `cfg.workers()` threads.
pub fn compute_constant(cfg: &RunConfig, u: &WeightField, v: &WeightField, cmd: &str) -> Result<ConstantReport> {
    let kind = need(cfg.constant, "constant", cmd)?;
    let census = cfg.census();
    let workers = cfg.workers();
    let cubes = census_cubes(u.lattice(), census);
    let (p, q, alpha) = cfg.exponents(cmd)?;
    let report = match kind {
        ConstantKind::Ap => {
            let f = MatrixAp::new(u, p)?;
            let best = par_scan_max(&f, &cubes, workers)?;
            finish("matrix_ap", &cubes, best, Method::Definitional, Params { p, q: p, alpha: 0.0, phi: None, psi: None }, census, Vec::new())?
        }
        ConstantKind::Apq => {
            let f = TwoWeightApq::new(u, v, p, q, alpha)?;
            let best = par_scan_max(&f, &cubes, workers)?;
            finish("two_weight_apq", &cubes, best, Method::Definitional, Params { p, q, alpha, phi: None, psi: None }, census, Vec::new())?
        }
        ConstantKind::BumpMaximal | ConstantKind::BumpDouble | ConstantKind::BumpCzo => {
            let phi = need(cfg.phi.clone(), "phi", cmd)?;
            let mut params = match kind {
                ConstantKind::BumpMaximal => BumpParams::maximal(p, q, alpha, phi),
                ConstantKind::BumpDouble => BumpParams::double(p, q, alpha, phi, need(cfg.psi.clone(), "psi", cmd)?),
                _ => BumpParams::czo(p, phi, need(cfg.psi.clone(), "psi", cmd)?),
            };
            if cfg.allow_nonmember.unwrap_or(false) {
                params = params.allow_nonmember();
            }
            let method = cfg.method.unwrap_or(Method::Definitional);
            let (best, warnings) = match method {
                Method::Definitional => {
                    let (f, w) = BumpDefinitional::new(u, v, &params)?;
                    (par_scan_max(&f, &cubes, workers)?, w)
                }
                Method::Reducing => {
                    let (f, w) = BumpReducing::new(u, v, &params, &MveeOptions::default())?;
                    (par_scan_max(&f, &cubes, workers)?, w)
                }
                Method::Estimated => bail!("constants are computed definitionally or through reducing operators"),
            };
            finish(params.name(), &cubes, best, method, params.params(), census, warnings)?
        }
    };
    Ok(report)
}

fn cmd_constant(cfg: &RunConfig) -> Result<()> {
    let (u, v) = load_pair(cfg, "constant")?;
    let report = compute_constant(cfg, &u, &v, "constant")?;
    let csv = rows_csv(&[Row::from(&report)])?;
    write_text(&out_path(cfg, "constants.csv")?, &csv)?;
    write_text(&out_path(cfg, "constants.json")?, &canonical_json(&report)?)?;
    print!("{csv}");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn operator_alpha(spec: &OperatorSpec) -> f64 {
    match spec {
        OperatorSpec::MatrixMaximal { alpha, .. }
        | OperatorSpec::AuxMaximal { alpha, .. }
        | OperatorSpec::SingleCubeAux { alpha, .. }
        | OperatorSpec::Averaging { alpha, .. }
        | OperatorSpec::Sparse { alpha, .. }
        | OperatorSpec::FracIntegral { alpha } => *alpha,
        OperatorSpec::AuxMaximalBeta { beta, .. } | OperatorSpec::OrliczMaximal { beta, .. } => *beta,
        OperatorSpec::Identity | OperatorSpec::Mollifier { .. } => 0.0,
    }
}

fn build_operator(cfg: &RunConfig, cmd: &str) -> Result<(WeightedOperator, f64, f64)> {
    let (u, v) = load_pair(cfg, cmd)?;
    let spec = need(cfg.operator.clone(), "operator", cmd)?;
    let p = need(cfg.p, "p", cmd)?;
    let q = cfg.q.unwrap_or(p);
    Ok((WeightedOperator::new(spec, &u, &v, p, q, &MveeOptions::default())?, p, q))
}

fn cmd_apply(cfg: &RunConfig) -> Result<()> {
    let (op, p, q) = build_operator(cfg, "apply")?;
    let lat = op.lattice();
    let g = match &cfg.input {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc: VectorJson = serde_json::from_str(&text).with_context(|| format!("invalid input {}", path.display()))?;
            GridFunction::new(lat, doc.n, doc.values)?
        }
        None => {
            let mut e = vec![0.0; op.n()];
            e[0] = 1.0;
            GridFunction::constant(lat, &e)
        }
    };
    if g.n() != op.n() {
        bail!("input has n={}, weights have n={}", g.n(), op.n());
    }
    let out = op.apply(&g)?;
    let cell = lat.cell_measure();
    let (num, den) = (lp_norm(&out, q, cell), lp_norm(&g.magnitudes(), p, cell));
    let mut name = cfg.output.clone().unwrap_or_else(|| "apply".into());
    if Path::new(&name).extension().is_none() {
        name += ".mws";
    }
    let path = out_path(cfg, &name)?;
    write_scalar(&path, &ScalarField { lat, values: out })?;
    println!("operator={} |Tf|_q={num} |f|_p={den} ratio={} -> {}", op.label(), num / den, path.display());
    Ok(())
}

fn cmd_norm(cfg: &RunConfig) -> Result<()> {
    let (op, p, q) = build_operator(cfg, "norm")?;
    let alpha = operator_alpha(op.spec());
    let est = if cfg.weak.unwrap_or(false) {
        weak_norm_estimate(&op, p, q, cfg.budget(), cfg.seed())?
    } else {
        estimate_norm(&op, p, q, cfg.budget(), cfg.seed())?
    };
    let mut rows = vec![Row::from_estimate(&est, alpha)];
    let mut constant = None;
    if cfg.constant.is_some() {
        let (u, v) = load_pair(cfg, "norm")?;
        let c = compute_constant(cfg, &u, &v, "norm")?;
        rows.push(Row::from(&c));
        constant = Some(c);
    }
    let csv = rows_csv(&rows)?;
    write_text(&out_path(cfg, "norm.csv")?, &csv)?;
    write_text(&out_path(cfg, "norm.json")?, &canonical_json(&est)?)?;
    print!("{csv}");
    if let Some(c) = constant {
        println!("ratio = {}", est.value / c.value);
    }
    Ok(())
}

fn reproducer(r: &SuiteReport) -> String {
    let c = &r.config;
    let mut s = format!("mbump verify {} --seed {} --census {} --budget {}", r.suite, c.seed, c.census, c.budget);
    if let Some(t) = c.trials {
        s += &format!(" --trials {t}");
    }
    if let Some(l) = c.level {
        s += &format!(" --level {l}");
    }
    if c.experimental {
        s += " --experimental";
    }
    s
}

fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    let suites: Vec<String> = cfg.suites.clone().unwrap_or_else(|| SUITES.iter().map(|s| s.to_string()).collect());
    for s in &suites {
        if !SUITES.contains(&s.as_str()) {
            bail!("unknown suite {s:?}; known: {}", SUITES.join(", "));
        }
    }
    let sc = cfg.suite_config();
    let results = par_map(&suites, cfg.workers(), |s| run_suite(s, &sc));
    let mut all = true;
    for r in results {
        let r = r?;
        write_text(&out_path(cfg, &format!("{}.json", r.suite))?, &canonical_json(&r)?)?;
        for (name, svg) in plots(&r) {
            write_text(&out_path(cfg, &name)?, &svg)?;
        }
        print!("{}", summary(&r));
        if !r.pass {
            all = false;
            println!("  rerun: {}", reproducer(&r));
        }
    }
    Ok(all)
}

fn cmd_report(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<()> {
    let mut reports = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r: SuiteReport = serde_json::from_str(&text).with_context(|| format!("invalid suite report {}", path.display()))?;
        reports.push(r);
    }
    write_text(&out_path(cfg, "checks.csv")?, &checks_csv(&reports)?)?;
    for r in &reports {
        for (name, svg) in plots(r) {
            write_text(&out_path(cfg, &name)?, &svg)?;
        }
        print!("{}", summary(r));
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} reports, {failed} failing", reports.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn kind_flag_replaces_a_different_config_generator() {
        let base = Some(Generator::Random { kappa: 3.0, lambda: 0.2 });
        let g = generator_from_flags(Some(GenKind::Power), base.clone(), Some(vec![-0.5]), None, None, None, None).unwrap();
        assert_eq!(g, Some(Generator::Power { gamma: vec![-0.5], center: vec![], angle: 0.0 }));
        let g = generator_from_flags(None, base, None, None, None, Some(7.0), None).unwrap();
        assert_eq!(g, Some(Generator::Random { kappa: 7.0, lambda: 0.2 }));
        assert!(generator_from_flags(None, None, None, None, None, Some(1.0), None).is_err());
    }
}
