use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operator::Target;
use crate::schedule::StepSizePolicy;
use crate::solver::{DEFAULT_C1, DEFAULT_MAX_ITERATIONS, DEFAULT_ZETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Gradient iteration.
    Dsmg,
    /// Continuous gradient flow.
    DsmgFlow,
    /// Regularized Newton baseline.
    Dsmn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dsmg => "dsmg",
            Self::DsmgFlow => "dsmg-flow",
            Self::Dsmn => "dsmn",
        }
    }

    /// Default `C0` of `a_0 = C0 δ^ζ`.
    pub fn default_c0(self) -> f64 {
        match self {
            Self::Dsmg | Self::DsmgFlow => 0.5,
            Self::Dsmn => 1.0,
        }
    }

    /// Default decay exponent of the schedule.
    pub fn default_b(self) -> f64 {
        match self {
            Self::Dsmg | Self::DsmgFlow => 0.25,
            Self::Dsmn => 1.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dsmg" => Ok(Self::Dsmg),
            "dsmg-flow" | "flow" => Ok(Self::DsmgFlow),
            "dsmn" => Ok(Self::Dsmn),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected dsmg, dsmg-flow or dsmn)"
            ))),
        }
    }
}

/// One experiment. `c0` and `b` fall back to the method defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub target: Target,
    pub n_points: usize,
    pub delta_rel: f64,
    pub method: Method,
    pub c1: f64,
    pub zeta: f64,
    pub c0: Option<f64>,
    pub b: Option<f64>,
    /// Schedule offset: `a_n = C0 δ^ζ / (c + n)^b`.
    pub c: f64,
    pub alpha_policy: StepSizePolicy,
    pub seed: u64,
    pub max_iterations: usize,
    /// Override for the derivative bound used by the step-size cap.
    pub m1: Option<f64>,
    pub dt: f64,
    pub t_max: f64,
    /// Record wall time in the summary; turn off for byte-reproducible output.
    pub timing: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "wiener".into(),
            target: Target::One,
            n_points: 100,
            delta_rel: 0.01,
            method: Method::Dsmg,
            c1: DEFAULT_C1,
            zeta: DEFAULT_ZETA,
            c0: None,
            b: None,
            c: 1.0,
            alpha_policy: StepSizePolicy::default(),
            seed: 1,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            m1: None,
            dt: 0.1,
            t_max: 10_000.0,
            timing: true,
            output_path: None,
        }
    }
}

/// Keys accepted in config files and as overrides.
pub const CONFIG_KEYS: &[&str] = &[
    "problem",
    "target",
    "n_points",
    "delta_rel",
    "method",
    "c1",
    "zeta",
    "c0",
    "b",
    "c",
    "alpha_policy",
    "seed",
    "max_iterations",
    "m1",
    "dt",
    "t_max",
    "timing",
    "output",
];

/// Keys that may hold a comma-separated list in sweep configs.
pub const SWEEP_KEYS: &[&str] = &["target", "method", "n_points", "delta_rel", "seed"];

/// Flat `key = value` settings; later insertions win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got '{raw}'", i + 1))
            })?;
            map.set(k.trim(), v.trim())?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = key.replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        self.entries.insert(key, value.into());
        Ok(())
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Expands comma-separated sweep keys into one config per combination,
    /// in the order target, method, n_points, delta_rel, seed.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let mut combos = vec![self.clone()];
        for key in SWEEP_KEYS {
            let Some(value) = self.get(key) else { continue };
            let items: Vec<&str> = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            if items.is_empty() {
                return Err(Error::Config(format!("empty value list for '{key}'")));
            }
            combos = combos
                .into_iter()
                .flat_map(|base| {
                    items.iter().map(move |item| {
                        let mut next = base.clone();
                        next.entries.insert((*key).to_string(), (*item).to_string());
                        next
                    })
                })
                .collect();
        }
        combos.iter().map(ExperimentConfig::from_map).collect()
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "cannot parse '{value}' for '{key}' as a boolean"
        ))),
    }
}

impl ExperimentConfig {
    /// Builds a config from defaults overridden by `map` and validates it.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in &map.entries {
            match key.as_str() {
                "problem" => cfg.problem = value.trim().to_string(),
                "target" => cfg.target = value.parse()?,
                "n_points" => cfg.n_points = parse_num(key, value)?,
                "delta_rel" => cfg.delta_rel = parse_num(key, value)?,
                "method" => cfg.method = value.parse()?,
                "c1" => cfg.c1 = parse_num(key, value)?,
                "zeta" => cfg.zeta = parse_num(key, value)?,
                "c0" => cfg.c0 = Some(parse_num(key, value)?),
                "b" => cfg.b = Some(parse_num(key, value)?),
                "c" => cfg.c = parse_num(key, value)?,
                "alpha_policy" => cfg.alpha_policy = value.parse()?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "max_iterations" => cfg.max_iterations = parse_num(key, value)?,
                "m1" => cfg.m1 = Some(parse_num(key, value)?),
                "dt" => cfg.dt = parse_num(key, value)?,
                "t_max" => cfg.t_max = parse_num(key, value)?,
                "timing" => cfg.timing = parse_bool(key, value)?,
                "output" => cfg.output_path = Some(PathBuf::from(value.trim())),
                _ => unreachable!("keys are checked on insertion"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn c0_or_default(&self) -> f64 {
        self.c0.unwrap_or_else(|| self.method.default_c0())
    }

    pub fn b_or_default(&self) -> f64 {
        self.b.unwrap_or_else(|| self.method.default_b())
    }

    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.problem != "wiener" {
            return fail(format!(
                "unknown problem '{}' (only 'wiener' is built in)",
                self.problem
            ));
        }
        if self.n_points < 2 {
            return fail(format!(
                "n_points must be at least 2, got {}",
                self.n_points
            ));
        }
        if !(self.delta_rel > 0.0 && self.delta_rel.is_finite()) {
            return fail(format!(
                "delta_rel = {} leaves the discrepancy threshold undefined; use a positive noise level",
                self.delta_rel
            ));
        }
        if !(self.c1 > 1.0) {
            return fail(format!("c1 must exceed 1, got {}", self.c1));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return fail(format!("zeta must lie in (0, 1], got {}", self.zeta));
        }
        if !(self.c0_or_default() > 0.0) {
            return fail(format!("c0 must be positive, got {}", self.c0_or_default()));
        }
        if !(self.b_or_default() > 0.0) {
            return fail(format!("b must be positive, got {}", self.b_or_default()));
        }
        if !(self.c > 0.0) {
            return fail(format!("c must be positive, got {}", self.c));
        }
        if let Some(m1) = self.m1 {
            if !(m1 >= 0.0 && m1.is_finite()) {
                return fail(format!("m1 must be a nonnegative number, got {m1}"));
            }
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) {
            return fail(format!(
                "dt and t_max must be positive (got {}, {})",
                self.dt, self.t_max
            ));
        }
        Ok(())
    }

    /// Short identifier used in output file names.
    pub fn tag(&self) -> String {
        format!(
            "{}_{}_n{}_d{}_s{}",
            self.method, self.target, self.n_points, self.delta_rel, self.seed
        )
    }
}
