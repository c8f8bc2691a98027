//! Experiment configuration. Sources are, in increasing precedence: suite
//! defaults, an optional config file (key=value lines or JSON), and command
//! line flags. Parsing is fail-closed: unknown keys and out-of-domain values
//! are errors, never warnings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::CliError;

pub const SUITES: [&str; 11] = [
    "doi-check",
    "moi-check",
    "derivative-check",
    "difference-check",
    "krein",
    "koplienko",
    "pair-lipschitz",
    "counterexample",
    "holder",
    "singular-decay",
    "besov-norm",
];

/// Configuration fields before defaults are applied. `None` means the source
/// did not mention the field.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub suite: Option<String>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub f: Option<String>,
    pub tol: Option<f64>,
}

impl PartialConfig {
    /// Later sources win field by field.
    pub fn overlay(mut self, over: &PartialConfig) -> Self {
        if over.suite.is_some() {
            self.suite = over.suite.clone();
        }
        if over.n.is_some() {
            self.n = over.n;
        }
        if over.trials.is_some() {
            self.trials = over.trials;
        }
        if over.seed.is_some() {
            self.seed = over.seed;
        }
        if over.p.is_some() {
            self.p = over.p;
        }
        if over.alpha.is_some() {
            self.alpha = over.alpha;
        }
        if over.f.is_some() {
            self.f = over.f.clone();
        }
        if over.tol.is_some() {
            self.tol = over.tol;
        }
        self
    }
}

/// A validated experiment description. `n`, `trials`, `p`, `alpha`, `f_name`
/// and `tol` stay optional here; each suite resolves its own defaults and
/// rejects combinations it cannot honour.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub suite: String,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub seed: u64,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub f_name: Option<String>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_partial(p: PartialConfig) -> Result<Self, CliError> {
        let suite = p
            .suite
            .ok_or_else(|| CliError::Config("no suite named".into()))?;
        if !SUITES.contains(&suite.as_str()) && suite != "doi-oracle" {
            return Err(CliError::UnknownSuite(suite));
        }
        // doi-oracle is the historical name of the doi-check suite.
        let suite = if suite == "doi-oracle" { "doi-check".to_string() } else { suite };
        if let Some(n) = p.n {
            if n < 1 {
                return Err(CliError::Config("n must be at least 1".into()));
            }
        }
        if let Some(t) = p.trials {
            if t < 1 {
                return Err(CliError::Config("trials must be at least 1".into()));
            }
        }
        if let Some(x) = p.p {
            if x.is_nan() || x < 1.0 {
                return Err(CliError::Config(format!("p must be >= 1 or inf, got {x}")));
            }
        }
        if let Some(a) = p.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::Config(format!("alpha must lie in (0,1), got {a}")));
            }
        }
        if let Some(t) = p.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("tol must be positive, got {t}")));
            }
        }
        if let Some(name) = &p.f {
            crate::fnlib::check_name(name)?;
        }
        Ok(Self {
            suite,
            n: p.n,
            trials: p.trials,
            seed: p.seed.unwrap_or(1),
            p: p.p,
            alpha: p.alpha,
            f_name: p.f,
            tol: p.tol,
        })
    }

    pub fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    pub fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    /// Resolved key -> value echo for the report header. The map form keeps
    /// the serialization order independent of source order.
    pub fn echo(&self, resolved: &[(&str, String)]) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("suite".into(), self.suite.clone());
        m.insert("seed".into(), self.seed.to_string());
        for (k, v) in resolved {
            m.insert((*k).into(), v.clone());
        }
        m
    }
}

/// Parses a config file. A leading `{` selects JSON; anything else is read
/// as `key=value` lines with `#` comments.
pub fn load_file(path: &Path) -> Result<PartialConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<PartialConfig, CliError> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("bad JSON config: {e}")));
    }
    let mut out = PartialConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| CliError::Config(format!("line {}: bad {what}: {value:?}", lineno + 1));
        match key {
            "suite" => out.suite = Some(value.to_string()),
            "n" => out.n = Some(value.parse().map_err(|_| bad("n"))?),
            "trials" => out.trials = Some(value.parse().map_err(|_| bad("trials"))?),
            "seed" => out.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "p" => out.p = Some(parse_p(value).ok_or_else(|| bad("p"))?),
            "alpha" => out.alpha = Some(value.parse().map_err(|_| bad("alpha"))?),
            "f" => out.f = Some(value.to_string()),
            "tol" => out.tol = Some(value.parse().map_err(|_| bad("tol"))?),
            other => {
                return Err(CliError::Config(format!("line {}: unknown key {other:?}", lineno + 1)))
            }
        }
    }
    Ok(out)
}

/// Accepts numbers and the spellings "inf"/"infinity" in any case.
pub fn parse_p(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}
