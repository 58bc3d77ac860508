//! Deterministic environments with the reward structures used in the
//! experiments: CartPole, Acrobot and a five-state chain with exact oracles.

mod acrobot;
mod cartpole;
mod chain;
mod mdp;

use std::fmt;
use std::str::FromStr;

pub use acrobot::{acrobot_observation, acrobot_step, mechanical_energy, Acrobot, AcrobotState};
pub use cartpole::{cartpole_step, CartPole, CartPoleState};
pub use chain::{Chain, CHAIN_HORIZON, CHAIN_STATES};
pub use mdp::{exact_policy_distributions, Outcome, PolicyRanking, TabularMdp};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// Time limit reached without a terminal state.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// How an episode counts as a win.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WinRule {
    /// Survived until the time limit.
    ReachedTimeLimit,
    /// Reached a terminal state before the time limit.
    TerminalBeforeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_count: usize,
    /// Every reward the dynamics can emit, ascending.
    pub rewards: Vec<f64>,
    pub max_steps: usize,
    pub win: WinRule,
    pub win_description: &'static str,
}

impl EnvSpec {
    pub fn is_win(&self, last: &StepResult) -> bool {
        match self.win {
            WinRule::ReachedTimeLimit => last.truncated && !last.terminal,
            WinRule::TerminalBeforeLimit => last.terminal,
        }
    }

    pub(crate) fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.action_count {
            return Err(Error::InvalidAction {
                action,
                count: self.action_count,
            });
        }
        Ok(())
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;
    /// Starts a new episode; the initial state is a pure function of `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    Acrobot,
    Chain,
}

impl EnvKind {
    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::CartPole => Box::new(CartPole::new()),
            EnvKind::Acrobot => Box::new(Acrobot::new()),
            EnvKind::Chain => Box::new(Chain::new()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::Acrobot => "acrobot",
            EnvKind::Chain => "chain",
        }
    }

    /// Network input features for an observation. The chain position is
    /// one-hot encoded; the control tasks pass their state through.
    pub fn features(self, state: &[f64]) -> Vec<f64> {
        match self {
            EnvKind::Chain => {
                let mut one_hot = vec![0.0; CHAIN_STATES];
                let pos = (state[0].round() as usize).min(CHAIN_STATES - 1);
                one_hot[pos] = 1.0;
                one_hot
            }
            _ => state.to_vec(),
        }
    }

    pub fn feature_dim(self) -> usize {
        match self {
            EnvKind::CartPole => 4,
            EnvKind::Acrobot => 6,
            EnvKind::Chain => CHAIN_STATES,
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cartpole" => Ok(EnvKind::CartPole),
            "acrobot" => Ok(EnvKind::Acrobot),
            "chain" => Ok(EnvKind::Chain),
            _ => Err(Error::UnknownToken {
                kind: "environment",
                token: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fuzz(kind: EnvKind, steps: usize) {
        let mut env = kind.make();
        let spec = env.spec().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        env.reset(0);
        let mut episode = 0u64;
        for _ in 0..steps {
            let action = rng.gen_range(0..spec.action_count);
            let out = env.step(action).unwrap();
            assert_eq!(out.next_state.len(), spec.state_dim);
            assert!(
                spec.rewards.iter().any(|&r| r == out.reward),
                "{kind}: undeclared reward {}",
                out.reward
            );
            if out.done() {
                episode += 1;
                env.reset(episode);
            }
        }
    }

    #[test]
    fn reward_set_closure() {
        for kind in [EnvKind::CartPole, EnvKind::Acrobot, EnvKind::Chain] {
            fuzz(kind, 100_000);
        }
    }

    #[test]
    fn reset_is_seed_deterministic() {
        for kind in [EnvKind::CartPole, EnvKind::Acrobot, EnvKind::Chain] {
            let mut a = kind.make();
            let mut b = kind.make();
            assert_eq!(a.reset(42), b.reset(42));
            let actions = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1];
            for &act in &actions {
                assert_eq!(a.step(act).unwrap(), b.step(act).unwrap());
            }
        }
    }

    #[test]
    fn invalid_actions_rejected() {
        for kind in [EnvKind::CartPole, EnvKind::Acrobot, EnvKind::Chain] {
            let mut env = kind.make();
            env.reset(0);
            let k = env.spec().action_count;
            assert!(matches!(env.step(k), Err(Error::InvalidAction { .. })));
        }
    }

    #[test]
    fn parse_kind() {
        assert_eq!("CartPole".parse::<EnvKind>().unwrap(), EnvKind::CartPole);
        let err = "taxi".parse::<EnvKind>().unwrap_err();
        assert!(err.to_string().contains("taxi"));
    }

    #[test]
    fn chain_features_one_hot() {
        assert_eq!(
            EnvKind::Chain.features(&[3.0]),
            vec![0.0, 0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(EnvKind::CartPole.features(&[1.0, 2.0, 3.0, 4.0]).len(), 4);
    }
}
