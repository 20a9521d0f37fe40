//! `key = value` experiment files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use kirchhoff_core::problem::{classify_exponents, validate_scalars};
use kirchhoff_core::solvers::SolverConfig;
use kirchhoff_core::KirchhoffError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("missing required key: {0}")]
    Missing(&'static str),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("duplicate key: {0}")]
    Duplicate(String),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("malformed value for {key}: {value}")]
    Malformed { key: String, value: String },
    #[error(transparent)]
    Params(#[from] KirchhoffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Solve,
    Sweep,
    Threshold,
    Verify,
    Membership,
    B0Scan,
}

impl FromStr for ExperimentKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "solve" => ExperimentKind::Solve,
            "sweep" => ExperimentKind::Sweep,
            "threshold" => ExperimentKind::Threshold,
            "verify" => ExperimentKind::Verify,
            "membership" => ExperimentKind::Membership,
            "b0-scan" => ExperimentKind::B0Scan,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Membership => "membership",
            ExperimentKind::B0Scan => "b0-scan",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { length: f64, nodes: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
    Ball { radius: f64, nodes: usize },
}

impl DomainSpec {
    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { .. } => 2,
            DomainSpec::Ball { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Constant(f64),
    /// Principal eigenfunction (sup 1) times the amplitude.
    Eigenmode(f64),
    /// `−2 + 12x − 12x²` on the unit interval, tensorized on rectangles.
    QuarticSignChanging,
    /// Whitespace-separated nodal values.
    File(PathBuf),
}

/// Which solver a `solve` experiment runs; `auto` picks by regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Auto,
    Picard,
    Newton,
    Descent,
    MountainPass,
    MultiStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub domain: DomainSpec,
    pub forcing: ForcingSpec,
    pub b: f64,
    pub alpha: f64,
    pub p: f64,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    pub solver: SolverChoice,
    pub solver_config: SolverConfig,
    pub n_starts: usize,
    pub b_factors: Vec<f64>,
    pub layer: Option<f64>,
    pub lambda_max: f64,
    pub out: PathBuf,
}

const KEYS: &[&str] = &[
    "kind", "domain", "f", "b", "alpha", "p", "N", "lambda", "lambdas", "solver", "tol",
    "max_iter", "damping", "seed", "rho0", "path_nodes", "n_starts", "b_factors", "layer",
    "lambda_max", "out",
];

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn malformed(key: &str, value: &str) -> ConfigError {
        ConfigError::Malformed {
            key: key.to_string(),
            value: value.to_string(),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| Self::malformed(key, v)))
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &'static str) -> Result<T, ConfigError> {
        self.get(key)?.ok_or(ConfigError::Missing(key))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| Self::malformed(key, v)))
                    .collect()
            })
            .transpose()
    }
}

fn parse_domain(v: &str) -> Result<DomainSpec, ConfigError> {
    let bad = || Entries::malformed("domain", v);
    let words: Vec<&str> = v.split_whitespace().collect();
    let num = |i: usize| -> Result<f64, ConfigError> {
        words.get(i).and_then(|w| w.parse().ok()).ok_or_else(bad)
    };
    let count = |i: usize| -> Result<usize, ConfigError> {
        words.get(i).and_then(|w| w.parse().ok()).ok_or_else(bad)
    };
    let spec = match words.first().copied() {
        Some("interval") if words.len() == 3 => DomainSpec::Interval {
            length: num(1)?,
            nodes: count(2)?,
        },
        Some("rectangle") if words.len() == 5 => DomainSpec::Rectangle {
            lx: num(1)?,
            ly: num(2)?,
            nx: count(3)?,
            ny: count(4)?,
        },
        Some("ball") if words.len() == 3 => DomainSpec::Ball {
            radius: num(1)?,
            nodes: count(2)?,
        },
        _ => return Err(bad()),
    };
    Ok(spec)
}

fn parse_forcing(v: &str) -> Result<ForcingSpec, ConfigError> {
    let bad = || Entries::malformed("f", v);
    let (head, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
    let rest = rest.trim();
    let amplitude = || -> Result<f64, ConfigError> {
        if rest.is_empty() {
            Ok(1.0)
        } else {
            rest.parse().map_err(|_| bad())
        }
    };
    match head {
        "constant" => Ok(ForcingSpec::Constant(amplitude()?)),
        "eigenmode" => Ok(ForcingSpec::Eigenmode(amplitude()?)),
        "quartic-signchanging" if rest.is_empty() => Ok(ForcingSpec::QuarticSignChanging),
        "file" if !rest.is_empty() => Ok(ForcingSpec::File(PathBuf::from(rest))),
        _ => Err(bad()),
    }
}

fn parse_solver(v: &str) -> Result<SolverChoice, ConfigError> {
    Ok(match v {
        "auto" => SolverChoice::Auto,
        "picard" => SolverChoice::Picard,
        "newton" => SolverChoice::Newton,
        "descent" => SolverChoice::Descent,
        "mountain-pass" => SolverChoice::MountainPass,
        "multi-start" => SolverChoice::MultiStart,
        _ => return Err(Entries::malformed("solver", v)),
    })
}

/// Parses an experiment file, filling defaults and rejecting unknown keys
/// and exponents on a regime boundary.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate(k.to_string()));
        }
    }
    let e = Entries(map);

    let kind_raw: String = e.require("kind")?;
    let kind: ExperimentKind = kind_raw
        .parse()
        .map_err(|_| Entries::malformed("kind", &kind_raw))?;
    let domain = parse_domain(e.raw("domain").ok_or(ConfigError::Missing("domain"))?)?;
    let dim = domain.dimension();
    if let Some(n) = e.get::<usize>("N")? {
        if n != dim {
            return Err(Entries::malformed("N", &n.to_string()));
        }
    }
    let forcing = match e.raw("f") {
        Some(v) => parse_forcing(v)?,
        None => ForcingSpec::Constant(1.0),
    };

    let needs_params = kind != ExperimentKind::Membership;
    let (b, alpha, p) = if needs_params {
        (e.require("b")?, e.require("alpha")?, e.require("p")?)
    } else {
        (
            e.get("b")?.unwrap_or(1.0),
            e.get("alpha")?.unwrap_or(1.0),
            e.get("p")?.unwrap_or(2.0),
        )
    };
    let lambdas = e.list("lambdas")?.unwrap_or_default();
    let lambda = match kind {
        ExperimentKind::Sweep
        | ExperimentKind::Threshold
        | ExperimentKind::Membership
        | ExperimentKind::B0Scan => {
            e.get("lambda")?.unwrap_or(0.0)
        }
        _ => e.require("lambda")?,
    };
    if kind == ExperimentKind::Sweep && lambdas.is_empty() {
        return Err(ConfigError::Missing("lambdas"));
    }
    if needs_params {
        classify_exponents(p, alpha, dim)?;
        validate_scalars(b, alpha, p, lambda, dim)?;
    }

    let defaults = SolverConfig::default();
    let solver_config = SolverConfig {
        tol: e.get("tol")?.unwrap_or(defaults.tol),
        max_iter: e.get("max_iter")?.unwrap_or(defaults.max_iter),
        damping: e.get("damping")?.unwrap_or(defaults.damping),
        seed: e.get("seed")?.unwrap_or(defaults.seed),
        rho0: e.get("rho0")?,
        path_nodes: e.get("path_nodes")?.unwrap_or(defaults.path_nodes),
    };
    solver_config.validate()?;

    Ok(ExperimentConfig {
        kind,
        domain,
        forcing,
        b,
        alpha,
        p,
        lambda,
        lambdas,
        solver: match e.raw("solver") {
            Some(v) => parse_solver(v)?,
            None => SolverChoice::Auto,
        },
        solver_config,
        n_starts: e.get("n_starts")?.unwrap_or(8),
        b_factors: e.list("b_factors")?.unwrap_or_else(|| vec![0.01, 10.0]),
        layer: e.get("layer")?,
        lambda_max: e.get("lambda_max")?.unwrap_or(1e4),
        out: e.get::<String>("out")?.map_or_else(|| PathBuf::from("out"), PathBuf::from),
    })
}
