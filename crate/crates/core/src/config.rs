//! Experiment configuration, read from TOML. Every field has a default, so
//! an empty file is a valid configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapt::{db_grid, uniform_env_distribution, EnvDistribution, EnvTuple, QoSPolicy};
use crate::error::{Error, Result};
use crate::modem::SchemeId;

/// Evenly spaced dB grid, written `lo:hi:step` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub const fn new(lo: f64, hi: f64, step: f64) -> Self {
        Grid { lo, hi, step }
    }

    /// Checks the grid, naming the offending field as `{name}.lo` etc.
    pub fn validate(&self, name: &str) -> Result<()> {
        if !self.lo.is_finite() {
            return Err(Error::config(format!("{name}.lo"), "must be finite"));
        }
        if !self.hi.is_finite() {
            return Err(Error::config(format!("{name}.hi"), "must be finite"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config(format!("{name}.step"), format!("must be > 0, got {}", self.step)));
        }
        if self.lo > self.hi {
            return Err(Error::config(format!("{name}.hi"), format!("{} is below lo = {}", self.hi, self.lo)));
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        db_grid(self.lo, self.hi, self.step)
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config("grid", format!("expected lo:hi:step, got `{s}`")));
        }
        let num = |i: usize, name: &str| {
            parts[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("grid.{name}"), format!("`{}` is not a number", parts[i])))
        };
        Ok(Grid::new(num(0, "lo")?, num(1, "hi")?, num(2, "step")?))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// Link-state distribution: a uniform Eb/N0 grid with fixed channel extras.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub fading_gain: f64,
    pub interference_power: f64,
    pub distance_m: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            lo: 0.0,
            hi: 25.0,
            step: 1.0,
            fading_gain: 1.0,
            interference_power: 0.0,
            distance_m: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn grid(&self) -> Grid {
        Grid::new(self.lo, self.hi, self.step)
    }

    pub fn distribution(&self, symbol_period_s: f64) -> Result<EnvDistribution> {
        self.grid().validate("env")?;
        let template = EnvTuple {
            fading_gain: self.fading_gain,
            interference_power: self.interference_power,
            distance_m: self.distance_m,
            ..EnvTuple::new(0.0, SchemeId::NoTx, symbol_period_s)
        };
        template.validate().map_err(|e| match e {
            Error::InvalidConfig { field, reason } => Error::config(format!("env.{field}"), reason),
            other => other,
        })?;
        uniform_env_distribution(self.lo, self.hi, self.step, template)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    /// File of `time ebn0_db` lines, time in ticks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    pub duration_ticks: u64,
    pub payload_symbols: usize,
    pub header_scheme: SchemeId,
}

impl Default for SessionSection {
    fn default() -> Self {
        SessionSection {
            trajectory: None,
            duration_ticks: 400,
            payload_symbols: 24,
            header_scheme: SchemeId::Bpsk,
        }
    }
}

pub const MIN_BITS_PER_POINT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub schemes: Vec<SchemeId>,
    pub bits_per_point: u64,
    pub symbol_period_s: f64,
    /// Eb/N0 grid for sweeps and threshold tables; each command has its own
    /// default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub policy: QoSPolicy,
    pub env: EnvConfig,
    pub session: SessionSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            schemes: SchemeId::CORE.to_vec(),
            bits_per_point: 1_000_000,
            symbol_period_s: 1.0 / 3.0e6,
            grid: None,
            out: None,
            policy: QoSPolicy::default(),
            env: EnvConfig::default(),
            session: SessionSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "must list at least one scheme"));
        }
        if self.schemes.contains(&SchemeId::NoTx) {
            return Err(Error::config("schemes", "notx is implied and may not be listed"));
        }
        if self.bits_per_point < MIN_BITS_PER_POINT {
            return Err(Error::config(
                "bits_per_point",
                format!("must be at least {MIN_BITS_PER_POINT}, got {}", self.bits_per_point),
            ));
        }
        if !(self.symbol_period_s > 0.0 && self.symbol_period_s.is_finite()) {
            return Err(Error::config("symbol_period_s", "must be > 0"));
        }
        if let Some(g) = &self.grid {
            g.validate("grid")?;
        }
        self.policy.validate()?;
        self.env.distribution(self.symbol_period_s)?;
        if self.session.payload_symbols == 0 {
            return Err(Error::config("session.payload_symbols", "must be >= 1"));
        }
        if self.session.header_scheme == SchemeId::NoTx {
            return Err(Error::config("session.header_scheme", "must be a transmitting scheme"));
        }
        Ok(())
    }
}

/// Parses `time ebn0_db` lines (whitespace or comma separated). Blank lines
/// and `#` comments are skipped; errors carry 1-based line numbers.
pub fn parse_trajectory(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = |what: String| Error::InvalidTrajectory(format!("line {}: {what}", n + 1));
        if fields.len() != 2 {
            return Err(bad(format!("expected `time ebn0_db`, got `{line}`")));
        }
        let t: f64 = fields[0].parse().map_err(|_| bad(format!("time `{}` is not a number", fields[0])))?;
        let db: f64 = fields[1].parse().map_err(|_| bad(format!("Eb/N0 `{}` is not a number", fields[1])))?;
        if !t.is_finite() || db.is_nan() {
            return Err(bad("values must be numbers".into()));
        }
        if let Some(&(prev, _)) = out.last() {
            if t <= prev {
                return Err(bad(format!("time {t} does not follow {prev}")));
            }
        }
        out.push((t, db));
    }
    if out.is_empty() {
        return Err(Error::InvalidTrajectory("no points".into()));
    }
    Ok(out)
}

pub fn load_trajectory(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_trajectory(&text).map_err(|e| match e {
        Error::InvalidTrajectory(m) => Error::InvalidTrajectory(format!("{}: {m}", path.display())),
        other => other,
    })
}
