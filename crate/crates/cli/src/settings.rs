//! Flag/config-file resolution.
//!
//! Every run is configured by the same small set of knobs. Precedence is
//! explicit flag, then `key=value` line in the optional `--config` file,
//! then the built-in default (the squeezed-state regime of the reference
//! experiment: `V_x = 0.32`, `V_p = 8.5`, `Q = 1.0`).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Engine {
    Analytic,
    Montecarlo,
    Both,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Engine::Analytic => "analytic",
            Engine::Montecarlo => "montecarlo",
            Engine::Both => "both",
        };
        f.write_str(name)
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "montecarlo" => Ok(Engine::Montecarlo),
            "both" => Ok(Engine::Both),
            other => Err(format!(
                "unknown engine {other:?} (analytic|montecarlo|both)"
            )),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub vx: f64,
    pub vp: f64,
    pub sigma: f64,
    pub q: f64,
    pub theta: f64,
    pub eta: f64,
    pub nqcp: u32,
    pub trials: u64,
    pub seed: u64,
    pub engine: Engine,
    pub shards: u32,
}

impl Settings {
    /// One-line `key=value` echo for the table headers.
    pub fn echo(&self) -> String {
        format!(
            "vx={} vp={} sigma={} q={} theta={} eta={} nqcp={} trials={} seed={} engine={} shards={}",
            self.vx,
            self.vp,
            self.sigma,
            self.q,
            self.theta,
            self.eta,
            self.nqcp,
            self.trials,
            self.seed,
            self.engine,
            self.shards
        )
    }
}

/// Option-valued mirror of [`Settings`], filled by clap.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct SettingsArgs {
    /// Squeezed-quadrature input variance (shot-noise units)
    #[arg(long, global = true)]
    pub vx: Option<f64>,
    /// Anti-squeezed-quadrature input variance (shot-noise units)
    #[arg(long, global = true)]
    pub vp: Option<f64>,
    /// Phase-noise standard deviation (radians)
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Trigger threshold half-width Q (shot-noise units)
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Trigger quadrature angle theta (radians)
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Detection efficiency in (0, 1]
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Consecutive triggers required (channel probing depth)
    #[arg(long, global = true)]
    pub nqcp: Option<u32>,
    /// Monte Carlo trials per grid point
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Random seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Computation engine
    #[arg(long, global = true, value_enum)]
    pub engine: Option<Engine>,
    /// Independent Monte Carlo shards
    #[arg(long, global = true)]
    pub shards: Option<u32>,
}

const CONFIG_KEYS: &[&str] = &[
    "vx", "vp", "sigma", "q", "theta", "eta", "nqcp", "trials", "seed", "engine", "shards",
];

/// Parses a `#`-commented `key=value` defaults file.
pub fn load_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config {}:{}: expected key=value, got {raw:?}",
                path.display(),
                i + 1
            ))
        })?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(CliError::Usage(format!(
                "config {}:{}: unknown key {key:?} (known: {})",
                path.display(),
                i + 1,
                CONFIG_KEYS.join(", ")
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn pick<T: FromStr>(
    flag: Option<T>,
    file: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|e| CliError::Usage(format!("config value for {key}: {e}"))),
        None => Ok(default),
    }
}

/// Merges flags over the config file over the built-in defaults.
pub fn resolve(args: &SettingsArgs, config: Option<&Path>) -> Result<Settings, CliError> {
    let file = match config {
        Some(path) => load_config_file(path)?,
        None => HashMap::new(),
    };
    Ok(Settings {
        vx: pick(args.vx, &file, "vx", 0.32)?,
        vp: pick(args.vp, &file, "vp", 8.5)?,
        sigma: pick(args.sigma, &file, "sigma", 0.28)?,
        q: pick(args.q, &file, "q", 1.0)?,
        theta: pick(args.theta, &file, "theta", 0.0)?,
        eta: pick(args.eta, &file, "eta", 1.0)?,
        nqcp: pick(args.nqcp, &file, "nqcp", 1)?,
        trials: pick(args.trials, &file, "trials", 1_000_000)?,
        seed: pick(args.seed, &file, "seed", 1)?,
        engine: pick(args.engine, &file, "engine", Engine::Analytic)?,
        shards: pick(args.shards, &file, "shards", 1)?,
    })
}

/// Parses a comma-separated grid of numbers.
pub fn parse_grid<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    let values: Result<Vec<T>, _> = raw
        .split(',')
        .map(|piece| piece.trim().parse::<T>())
        .collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err(CliError::Usage(format!("empty {what} grid"))),
        Err(e) => Err(CliError::Usage(format!("bad {what} grid {raw:?}: {e}"))),
    }
}
