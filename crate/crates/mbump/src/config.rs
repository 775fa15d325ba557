//! Run configuration: a JSON file merged with command-line flags, flags
//! taking precedence. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mbump_core::constants::Method;
use mbump_core::dyadic::{Census, Lattice, MAX_D};
use mbump_core::linalg::Mat;
use mbump_core::verify::{OperatorSpec, SuiteConfig};
use mbump_core::weights::{gen_power_weight, gen_random_field, gen_twisted_exponential, WeightField};
use mbump_core::young::YoungFn;
use serde::{Deserialize, Serialize};

/// Synthetic weight families for `gen`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Identity,
    /// `R diag(|x − c|^γ_i) Rᵀ`, with `R` a rotation by `angle` radians in
    /// the first two coordinates.
    Power {
        gamma: Vec<f64>,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        angle: f64,
    },
    Random {
        kappa: f64,
        lambda: f64,
    },
    /// Rotating exponential weight (`n = 2` only).
    Twisted {
        kappa: f64,
    },
}

impl Generator {
    pub fn generate(&self, lat: Lattice, n: usize, seed: u64) -> Result<WeightField> {
        Ok(match self {
            Generator::Identity => WeightField::identity(lat, n),
            Generator::Power { gamma, center, angle } => {
                let mut c = [0.0; MAX_D];
                for (i, v) in center.iter().enumerate().take(MAX_D) {
                    c[i] = *v;
                }
                gen_power_weight(lat, n, gamma, c, &rotation(n, *angle))?
            }
            Generator::Random { kappa, lambda } => gen_random_field(lat, n, seed, *kappa, *lambda)?,
            Generator::Twisted { kappa } => {
                if n != 2 {
                    bail!("the twisted generator needs n = 2, got n = {n}");
                }
                gen_twisted_exponential(lat, *kappa)?
            }
        })
    }

    pub fn describe(&self) -> String {
        match self {
            Generator::Identity => "identity".into(),
            Generator::Power { gamma, center, angle } => format!("power gamma={gamma:?} center={center:?} angle={angle}"),
            Generator::Random { kappa, lambda } => format!("random kappa={kappa} lambda={lambda}"),
            Generator::Twisted { kappa } => format!("twisted kappa={kappa}"),
        }
    }
}

fn rotation(n: usize, angle: f64) -> Mat {
    let mut r = Mat::identity(n);
    if n >= 2 && angle != 0.0 {
        let (s, c) = angle.sin_cos();
        r.set(0, 0, c);
        r.set(0, 1, -s);
        r.set(1, 0, s);
        r.set(1, 1, c);
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    /// Matrix `[W]_{A_p}` of `u`.
    Ap,
    /// Two-weight `[U,V]_{A^α_{p,q}}`.
    Apq,
    BumpMaximal,
    BumpDouble,
    BumpCzo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub census: Option<Census>,
    pub out: Option<PathBuf>,
    /// Random trials per norm estimate.
    pub budget: Option<usize>,
    pub d: Option<usize>,
    pub level: Option<u32>,
    pub n: Option<usize>,
    pub side: Option<f64>,
    pub generator: Option<Generator>,
    /// Weight files (`MWF1` or its JSON mirror). `v` defaults to `u`.
    pub u: Option<PathBuf>,
    pub v: Option<PathBuf>,
    /// Input vector function for `apply` (JSON).
    pub input: Option<PathBuf>,
    /// Output file stem.
    pub output: Option<String>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub constant: Option<ConstantKind>,
    pub phi: Option<YoungFn>,
    pub psi: Option<YoungFn>,
    pub allow_nonmember: Option<bool>,
    pub method: Option<Method>,
    pub operator: Option<OperatorSpec>,
    pub weak: Option<bool>,
    pub suites: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub suite_level: Option<u32>,
    pub experimental: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $over:expr; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: RunConfig) -> RunConfig {
        overlay!(self, over; seed, workers, census, out, budget, d, level, n, side, generator, u, v, input, output,
            p, q, alpha, constant, phi, psi, allow_nonmember, method, operator, weak, suites, trials, suite_level,
            experimental)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1).max(1)
    }

    pub fn census(&self) -> Census {
        self.census.unwrap_or_default()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn budget(&self) -> usize {
        self.budget.unwrap_or(8)
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            seed: self.seed(),
            census: self.census(),
            budget: self.budget(),
            trials: self.trials,
            level: self.suite_level,
            experimental: self.experimental.unwrap_or(false),
        }
    }

    /// `q` defaults to `p`, `α` to 0.
    pub fn exponents(&self, cmd: &str) -> Result<(f64, f64, f64)> {
        let p = need(self.p, "p", cmd)?;
        Ok((p, self.q.unwrap_or(p), self.alpha.unwrap_or(0.0)))
    }
}

pub fn need<T>(v: Option<T>, key: &str, cmd: &str) -> Result<T> {
    match v {
        Some(v) => Ok(v),
        None => bail!("`{cmd}` needs `{key}` (config key or --{} flag)", key.replace('_', "-")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seed": 3, "sed": 4}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        let err = serde_json::from_str::<RunConfig>(r#"{"generator": {"kind": "random", "kappa": 2, "lambda": 1, "x": 0}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let file: RunConfig =
            serde_json::from_str(r#"{"seed": 3, "p": 2.0, "generator": {"kind": "power", "gamma": [-0.5]}}"#).unwrap();
        let flags = RunConfig { seed: Some(9), q: Some(3.0), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.exponents("x").unwrap(), (2.0, 3.0, 0.0));
        assert!(matches!(merged.generator, Some(Generator::Power { .. })));
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = rotation(3, 0.7);
        let rrt = r.mul(&r.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert!((rrt.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }
}
