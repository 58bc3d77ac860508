use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::deep::DqnConfig;
use crate::envs::EnvKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Q,
    OrdinalQ,
    Dqn,
    OrdinalDqn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Q => "q",
            Algorithm::OrdinalQ => "ordinal-q",
            Algorithm::Dqn => "dqn",
            Algorithm::OrdinalDqn => "ordinal-dqn",
        }
    }

    pub fn is_ordinal(self) -> bool {
        matches!(self, Algorithm::OrdinalQ | Algorithm::OrdinalDqn)
    }

    pub fn is_deep(self) -> bool {
        matches!(self, Algorithm::Dqn | Algorithm::OrdinalDqn)
    }

    /// The numeric learner of the same family.
    pub fn numeric_counterpart(self) -> Algorithm {
        match self {
            Algorithm::Q | Algorithm::OrdinalQ => Algorithm::Q,
            Algorithm::Dqn | Algorithm::OrdinalDqn => Algorithm::Dqn,
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q" => Ok(Algorithm::Q),
            "ordinal-q" => Ok(Algorithm::OrdinalQ),
            "dqn" => Ok(Algorithm::Dqn),
            "ordinal-dqn" => Ok(Algorithm::OrdinalDqn),
            _ => Err(Error::UnknownToken {
                kind: "algorithm",
                token: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How numeric learners see rewards. Ordinal learners rank whatever they
/// receive, so both modes give them the same tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardMode {
    Standard,
    /// `(r - min) / 100`.
    Cr,
}

impl RewardMode {
    pub fn name(self) -> &'static str {
        match self {
            RewardMode::Standard => "standard",
            RewardMode::Cr => "cr",
        }
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(RewardMode::Standard),
            "cr" => Ok(RewardMode::Cr),
            _ => Err(Error::UnknownToken {
                kind: "reward mode",
                token: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Tabular learning rate.
    pub alpha: f64,
    pub gamma: f64,
    /// Adam step size for the deep learners.
    pub learning_rate: f64,
    pub batch: usize,
    pub memory: usize,
    pub sync_period: u64,
    pub hidden: Vec<usize>,
    pub epsilon_floor: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        let deep = DqnConfig::default();
        Self {
            alpha: 0.1,
            gamma: 0.9,
            learning_rate: deep.learning_rate,
            batch: deep.batch,
            memory: deep.memory,
            sync_period: deep.sync_period,
            hidden: deep.hidden,
            epsilon_floor: 0.0,
        }
    }
}

impl Hyperparameters {
    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            gamma: self.gamma,
            memory: self.memory,
            batch: self.batch,
            sync_period: self.sync_period,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub algo: Algorithm,
    pub reward: RewardMode,
    pub episodes: usize,
    /// `None` selects 0..9 for tabular and 0..4 for deep learners.
    pub seeds: Option<Vec<u64>>,
    /// Greedy evaluation and reporting interval; `None` means episodes / 20.
    pub eval_every: Option<usize>,
    pub out: Option<PathBuf>,
    /// Record per-episode wall time. Without it the `wall_ms` column is
    /// empty and the CSV depends on the seeds alone.
    pub timing: bool,
    pub hyper: Hyperparameters,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::CartPole,
            algo: Algorithm::OrdinalQ,
            reward: RewardMode::Standard,
            episodes: 1000,
            seeds: None,
            eval_every: None,
            out: None,
            timing: true,
            hyper: Hyperparameters::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("bad value '{value}' for {key}"))),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Splits `key = value` lines, skipping blanks and `#` comments. Returns
/// `(line number, key, value)` triples.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one option by the name of its CLI flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let h = &mut self.hyper;
        match key {
            "env" => self.env = value.parse()?,
            "algo" => self.algo = value.parse()?,
            "reward" => self.reward = value.parse()?,
            "episodes" => self.episodes = parse_value(key, value)?,
            "seeds" => self.seeds = Some(parse_list(key, value)?),
            "eval-every" => self.eval_every = Some(parse_value(key, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "timing" => self.timing = parse_bool(key, value)?,
            "alpha" => h.alpha = parse_value(key, value)?,
            "gamma" => h.gamma = parse_value(key, value)?,
            "lr" => h.learning_rate = parse_value(key, value)?,
            "batch" => h.batch = parse_value(key, value)?,
            "memory" => h.memory = parse_value(key, value)?,
            "sync" => h.sync_period = parse_value(key, value)?,
            "hidden" => h.hidden = parse_list(key, value)?,
            "epsilon-floor" => h.epsilon_floor = parse_value(key, value)?,
            _ => {
                return Err(Error::UnknownToken {
                    kind: "config key",
                    token: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies a config file on top of `self`; errors carry line numbers.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in parse_config(text)? {
            self.set(&key, &value).map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None if self.algo.is_deep() => (0..5).collect(),
            None => (0..10).collect(),
        }
    }

    pub fn eval_interval(&self) -> usize {
        self.eval_every.unwrap_or((self.episodes / 20).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::InvalidConfig("episodes must be at least 1".into()));
        }
        if self.seeds().is_empty() {
            return Err(Error::InvalidConfig("no seeds".into()));
        }
        if self.eval_interval() == 0 {
            return Err(Error::InvalidConfig("eval-every must be at least 1".into()));
        }
        let h = &self.hyper;
        if !(0.0..=1.0).contains(&h.alpha) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: h.alpha,
            });
        }
        if !(0.0..1.0).contains(&h.gamma) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: h.gamma,
            });
        }
        if !(0.0..=1.0).contains(&h.epsilon_floor) {
            return Err(Error::OutOfRange {
                name: "epsilon floor",
                value: h.epsilon_floor,
            });
        }
        if self.algo.is_deep() && (h.batch == 0 || h.memory == 0 || h.sync_period == 0) {
            return Err(Error::ZeroSize);
        }
        Ok(())
    }

    /// The resolved configuration as `key = value` lines, readable by
    /// [`ExperimentConfig::from_text`].
    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let mut lines = vec![
            format!("env = {}", self.env),
            format!("algo = {}", self.algo),
            format!("reward = {}", self.reward),
            format!("episodes = {}", self.episodes),
            format!("seeds = {}", join(&self.seeds())),
            format!("eval-every = {}", self.eval_interval()),
            format!("timing = {}", self.timing),
            format!("alpha = {}", h.alpha),
            format!("gamma = {}", h.gamma),
            format!("lr = {}", h.learning_rate),
            format!("batch = {}", h.batch),
            format!("memory = {}", h.memory),
            format!("sync = {}", h.sync_period),
            format!("hidden = {}", join(&h.hidden)),
            format!("epsilon-floor = {}", h.epsilon_floor),
        ];
        if let Some(out) = &self.out {
            lines.push(format!("out = {}", out.display()));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}
