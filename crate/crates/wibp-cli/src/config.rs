//! Run-configuration resolution. Values are layered, later layers winning:
//!
//! ```text
//!   built-in defaults
//!     < WIBP_PARALLELISM environment variable (parallelism only)
//!     < --config file (flat key=value, or a JSON artifact to rerun)
//!     < command-line flags
//! ```
//!
//! Unknown and duplicate keys are rejected so a typo cannot silently fall
//! back to a default. Constraint violations exit naming the violated
//! inequality. The resolved semantic configuration is echoed into every
//! output artifact; execution knobs (parallelism, output paths) are not
//! part of it, so reruns of the same configuration reproduce artifacts
//! byte for byte regardless of thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use wibp::model::{validate_params, ModelParams, Subset, WeightSpec};

/// Default horizon: customers per trajectory.
pub const DEFAULT_N: u64 = 1000;
/// Default Monte Carlo replicates per suite.
pub const DEFAULT_REPS: u64 = 500;
/// Default base seed.
pub const DEFAULT_SEED: u64 = 42;
/// Default confidence level for predictive intervals.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Default model: unit weights with a small concentration, chosen so every
/// default-applicable suite resolves its asymptotic gate already at the
/// default horizon.
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_C: f64 = 0.25;
pub const DEFAULT_WEIGHTS: &str = "const:1";

/// A configuration or usage problem; the process exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// The verification suites the `verify` command can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteName {
    Oracle,
    Slln,
    CltLn,
    CltKbar,
    Cid,
    Finite,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::Oracle,
        SuiteName::Slln,
        SuiteName::CltLn,
        SuiteName::CltKbar,
        SuiteName::Cid,
        SuiteName::Finite,
    ];

    /// Canonical name; identical to the `suite` field of the report the
    /// suite produces, so artifacts rerun without translation.
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Oracle => "poisson-oracle",
            SuiteName::Slln => "slln-ln",
            SuiteName::CltLn => "clt-ln",
            SuiteName::CltKbar => "clt-kbar",
            SuiteName::Cid => "cid-identity",
            SuiteName::Finite => "finite-buffet",
        }
    }
}

impl FromStr for SuiteName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<SuiteName, ConfigError> {
        match s {
            "poisson-oracle" | "oracle" => Ok(SuiteName::Oracle),
            "slln-ln" | "slln" => Ok(SuiteName::Slln),
            "clt-ln" => Ok(SuiteName::CltLn),
            "clt-kbar" => Ok(SuiteName::CltKbar),
            "cid-identity" | "cid" => Ok(SuiteName::Cid),
            "finite-buffet" | "finite" => Ok(SuiteName::Finite),
            other => err(format!(
                "unknown suite `{other}`; expected oracle|slln|clt-ln|clt-kbar|cid|finite"
            )),
        }
    }
}

/// Fully resolved, validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub stream_id: u64,
    pub parallelism: Option<usize>,
    pub checkpoints: Option<Vec<u64>>,
    pub proxy_factor: Option<u64>,
    pub level: f64,
    /// Requested suites; empty means "every applicable suite".
    pub suites: Vec<SuiteName>,
}

/// Accumulator for the layered resolution; every field optional until
/// [`Draft::finalize`].
#[derive(Default)]
pub struct Draft {
    alpha: Option<f64>,
    beta: Option<f64>,
    c: Option<f64>,
    weights: Option<String>,
    subset: Option<String>,
    n: Option<u64>,
    reps: Option<u64>,
    seed: Option<u64>,
    stream_id: Option<u64>,
    parallelism: Option<usize>,
    checkpoints: Option<String>,
    proxy_factor: Option<u64>,
    level: Option<f64>,
    suites: Option<String>,
}

const KNOWN_KEYS: [&str; 14] = [
    "alpha",
    "beta",
    "c",
    "weights",
    "subset",
    "n",
    "reps",
    "seed",
    "stream_id",
    "parallelism",
    "checkpoints",
    "proxy_factor",
    "level",
    "suites",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| ConfigError(format!("config key `{key}`: cannot parse `{value}`: {e}")))
}

impl Draft {
    /// Reads `WIBP_PARALLELISM`; an unset or empty variable is ignored.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        match std::env::var("WIBP_PARALLELISM") {
            Ok(v) if v.trim().is_empty() => Ok(()),
            Ok(v) => {
                let threads: usize = parse_num("WIBP_PARALLELISM", v.trim())?;
                if threads == 0 {
                    return err("WIBP_PARALLELISM must be at least 1");
                }
                self.parallelism = Some(threads);
                Ok(())
            }
            Err(_) => Ok(()),
        }
    }

    /// Applies one key=value entry; keys outside [`KNOWN_KEYS`] are errors.
    pub fn apply_entry(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return err(format!(
                "unknown config key `{key}`; known keys: {}",
                KNOWN_KEYS.join(", ")
            ));
        }
        match key {
            "alpha" => self.alpha = Some(parse_num(key, value)?),
            "beta" => self.beta = Some(parse_num(key, value)?),
            "c" => self.c = Some(parse_num(key, value)?),
            "weights" => self.weights = Some(value.to_string()),
            "subset" => self.subset = Some(value.to_string()),
            "n" => self.n = Some(parse_num(key, value)?),
            "reps" => self.reps = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "stream_id" => self.stream_id = Some(parse_num(key, value)?),
            "parallelism" => {
                let threads: usize = parse_num(key, value)?;
                if threads == 0 {
                    return err("config key `parallelism` must be at least 1");
                }
                self.parallelism = Some(threads);
            }
            "checkpoints" => self.checkpoints = Some(value.to_string()),
            "proxy_factor" => self.proxy_factor = Some(parse_num(key, value)?),
            "level" => self.level = Some(parse_num(key, value)?),
            "suites" => self.suites = Some(value.to_string()),
            _ => unreachable!("key membership checked above"),
        }
        Ok(())
    }

    /// Loads a config file: flat `key=value` lines with `#` comments, or a
    /// JSON artifact previously written by this binary (detected by a
    /// leading `{`), whose embedded `config` object is replayed.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config `{}`: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            self.apply_artifact(path, &text)
        } else {
            self.apply_flat(path, &text)
        }
    }

    fn apply_flat(&mut self, path: &Path, text: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!(
                    "{}:{}: expected key=value, got `{}`",
                    path.display(),
                    idx + 1,
                    line
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return err(format!(
                    "{}:{}: duplicate config key `{key}`",
                    path.display(),
                    idx + 1
                ));
            }
            seen.push(key.to_string());
            self.apply_entry(key, value)?;
        }
        Ok(())
    }

    /// Replays the `config` object of a JSON artifact. Reports also carry
    /// their horizon, replicate count, and seed as top-level fields; those
    /// fill any key the embedded config left unset.
    fn apply_artifact(&mut self, path: &Path, text: &str) -> Result<(), ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| ConfigError(format!("malformed JSON in `{}`: {e}", path.display())))?;
        let Some(config) = value.get("config").and_then(|c| c.as_object()) else {
            return err(format!(
                "`{}` is JSON but has no `config` object to rerun from",
                path.display()
            ));
        };
        let mut entries: BTreeMap<&str, String> = BTreeMap::new();
        for (key, val) in config {
            let Some(s) = val.as_str() else {
                return err(format!(
                    "`{}`: config key `{key}` is not a string",
                    path.display()
                ));
            };
            entries.insert(key.as_str(), s.to_string());
        }
        for (key, top) in [("n", "n"), ("reps", "reps"), ("seed", "base_seed")] {
            if !entries.contains_key(key) {
                if let Some(v) = value.get(top).and_then(|v| v.as_u64()) {
                    entries.insert(key, v.to_string());
                }
            }
        }
        if !entries.contains_key("suites") {
            if let Some(s) = value.get("suite").and_then(|v| v.as_str()) {
                entries.insert("suites", s.to_string());
            }
        }
        for (key, val) in entries {
            self.apply_entry(key, &val)?;
        }
        Ok(())
    }

    /// Validates everything and fills defaults.
    pub fn finalize(self) -> Result<RunConfig, ConfigError> {
        let weights: WeightSpec = self
            .weights
            .as_deref()
            .unwrap_or(DEFAULT_WEIGHTS)
            .parse()
            .map_err(|e| ConfigError(format!("{e}")))?;
        let mut params = ModelParams::new(
            self.alpha.unwrap_or(DEFAULT_ALPHA),
            self.beta.unwrap_or(DEFAULT_BETA),
            self.c.unwrap_or(DEFAULT_C),
            weights,
        );
        if let Some(spec) = &self.subset {
            let subset: Subset = spec.parse().map_err(|e| ConfigError(format!("{e}")))?;
            params = params.with_subset(subset);
        }
        validate_params(&params).map_err(|e| ConfigError(format!("{e}")))?;
        let n = self.n.unwrap_or(DEFAULT_N);
        if n == 0 {
            return err("n must be at least 1");
        }
        let reps = self.reps.unwrap_or(DEFAULT_REPS);
        if reps == 0 {
            return err("reps must be at least 1");
        }
        let level = self.level.unwrap_or(DEFAULT_LEVEL);
        if !(level > 0.0 && level < 1.0) {
            return err(format!("level must lie in (0, 1); got {level}"));
        }
        if let Some(f) = self.proxy_factor {
            if f < 2 {
                return err("proxy_factor must be at least 2");
            }
        }
        let checkpoints = match &self.checkpoints {
            None => None,
            Some(spec) => Some(parse_checkpoints(spec, n)?),
        };
        let suites = match &self.suites {
            None => Vec::new(),
            Some(spec) => {
                let mut list = Vec::new();
                for part in spec.split(',') {
                    let name: SuiteName = part.trim().parse()?;
                    if !list.contains(&name) {
                        list.push(name);
                    }
                }
                list
            }
        };
        Ok(RunConfig {
            params,
            n,
            reps,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            stream_id: self.stream_id.unwrap_or(0),
            parallelism: self.parallelism,
            checkpoints,
            proxy_factor: self.proxy_factor,
            level,
            suites,
        })
    }
}

fn parse_checkpoints(spec: &str, n: u64) -> Result<Vec<u64>, ConfigError> {
    let mut points = Vec::new();
    for part in spec.split(',') {
        let p: u64 = parse_num("checkpoints", part.trim())?;
        if p == 0 || p > n {
            return err(format!(
                "checkpoint {p} must lie in [1, n]; got n = {n}"
            ));
        }
        points.push(p);
    }
    if points.is_empty() {
        return err("checkpoints must list at least one customer index");
    }
    Ok(points)
}

impl RunConfig {
    /// The semantic configuration echoed into artifacts: model parameters
    /// plus the listed run keys. Execution knobs are deliberately absent.
    pub fn echo(&self, keys: &[&str]) -> BTreeMap<String, String> {
        let mut map = self.params.config_entries();
        for &key in keys {
            let value = match key {
                "n" => self.n.to_string(),
                "reps" => self.reps.to_string(),
                "seed" => self.seed.to_string(),
                "stream_id" => self.stream_id.to_string(),
                "level" => format!("{}", self.level),
                "proxy_factor" => match self.proxy_factor {
                    Some(f) => f.to_string(),
                    None => continue,
                },
                "checkpoints" => match &self.checkpoints {
                    Some(points) => points
                        .iter()
                        .map(u64::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                    None => continue,
                },
                other => unreachable!("unknown echo key {other}"),
            };
            map.insert(key.to_string(), value);
        }
        map
    }
}
