use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no rewards")]
    NoRewards,
    #[error("invalid reward: {0}")]
    InvalidReward(f64),
    #[error("reward not in tier map: {0}")]
    UnknownReward(f64),
    #[error("tier count mismatch: {left} vs {right}")]
    TierCountMismatch { left: usize, right: usize },
    #[error("tier {tier} out of range 1..={tiers}")]
    TierOutOfRange { tier: usize, tiers: usize },
    #[error("need at least two actions, got {0}")]
    TooFewActions(usize),
    #[error("empty score list")]
    EmptyScores,
    #[error("{name} = {value} out of range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid action {action} (action count {count})")]
    InvalidAction { action: usize, count: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("network size must be at least 1")]
    ZeroSize,
    #[error("architecture mismatch")]
    ArchitectureMismatch,
    #[error("nothing to sample")]
    EmptyBuffer,
    #[error("non-deterministic transition spec: {0}")]
    NonDeterministic(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown {kind} '{token}'")]
    UnknownToken { kind: &'static str, token: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input")]
    EmptyInput,
    #[error("malformed csv at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
