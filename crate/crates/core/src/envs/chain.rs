use super::mdp::{Outcome, TabularMdp};
use super::{EnvSpec, Environment, StepResult, WinRule};
use crate::Result;

pub const CHAIN_STATES: usize = 5;
pub const CHAIN_HORIZON: usize = 20;
const GOAL: usize = CHAIN_STATES - 1;
const STEP_REWARD: f64 = -1.0;
const GOAL_REWARD: f64 = 10.0;

/// Five states in a line. Action 0 moves left (staying put at the left
/// end), action 1 moves right; entering the rightmost state ends the episode.
pub struct Chain {
    spec: EnvSpec,
    position: usize,
    steps: usize,
}

impl Chain {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "chain",
                state_dim: 1,
                action_count: 2,
                rewards: vec![STEP_REWARD, GOAL_REWARD],
                max_steps: CHAIN_HORIZON,
                win: WinRule::TerminalBeforeLimit,
                win_description: "reached the right end",
            },
            position: 0,
            steps: 0,
        }
    }

    fn transition(position: usize, action: usize) -> (usize, f64, bool) {
        let next = if action == 1 {
            position + 1
        } else {
            position.saturating_sub(1)
        };
        if next == GOAL {
            (next, GOAL_REWARD, true)
        } else {
            (next, STEP_REWARD, false)
        }
    }

    /// The transition table of the chain.
    pub fn mdp() -> TabularMdp {
        let mut mdp = TabularMdp::new(CHAIN_STATES, 2, 0);
        mdp.set_terminal(GOAL);
        for s in 0..GOAL {
            for a in 0..2 {
                let (next, reward, terminal) = Self::transition(s, a);
                mdp.set_outcomes(
                    s,
                    a,
                    vec![Outcome {
                        probability: 1.0,
                        next,
                        reward,
                        terminal,
                    }],
                );
            }
        }
        mdp
    }
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Chain {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.position = 0;
        self.steps = 0;
        vec![0.0]
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.spec.check_action(action)?;
        let (next, reward, terminal) = Self::transition(self.position, action);
        self.position = next;
        self.steps += 1;
        Ok(StepResult {
            next_state: vec![next as f64],
            reward,
            terminal,
            truncated: !terminal && self.steps >= CHAIN_HORIZON,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::exact_policy_distributions;
    use crate::ordinal::TierMap;

    fn rollout(action: usize) -> (usize, f64, StepResult) {
        let mut env = Chain::new();
        env.reset(0);
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            let out = env.step(action).unwrap();
            ret += out.reward;
            steps += 1;
            if out.done() {
                return (steps, ret, out);
            }
        }
    }

    #[test]
    fn always_right_reaches_goal() {
        let (steps, ret, last) = rollout(1);
        assert_eq!(steps, 4);
        assert_eq!(ret, 7.0);
        assert!(last.terminal);
    }

    #[test]
    fn always_left_truncates() {
        let (steps, ret, last) = rollout(0);
        assert_eq!(steps, 20);
        assert_eq!(ret, -20.0);
        assert!(last.truncated && !last.terminal);
    }

    #[test]
    fn value_iteration_oracle() {
        let q = Chain::mdp().value_iteration(0.9, 1e-12);
        // right-moving values in closed form: -1 + 0.9 * V(next)
        let v3 = 10.0;
        let v2 = -1.0 + 0.9 * v3;
        let v1 = -1.0 + 0.9 * v2;
        let v0 = -1.0 + 0.9 * v1;
        for (s, v) in [v0, v1, v2, v3].iter().enumerate() {
            assert!((q[s][1] - v).abs() < 1e-10);
            assert!(q[s][1] > q[s][0]);
        }
        assert!((q[0][0] - (-1.0 + 0.9 * v0)).abs() < 1e-10);
        assert!((q[3][0] - (-1.0 + 0.9 * v2)).abs() < 1e-10);
        assert_eq!(q[4], vec![0.0, 0.0]);
    }

    #[test]
    fn exact_distributions_match_geometric_series() {
        let mdp = Chain::mdp();
        let tiers = TierMap::from_rewards(&mdp.rewards()).unwrap();
        let gamma = 0.9f64;
        let right = vec![1; CHAIN_STATES];
        let d = exact_policy_distributions(&mdp, &right, gamma, &tiers).unwrap();
        // terminal-adjacent pair carries no continuation
        assert_eq!(d[3][1].mass(), &[0.0, 1.0]);
        for s in 0..4 {
            // simulated rollout from s taking right
            let mut low = 0.0;
            let mut high = 0.0;
            let mut pos = s;
            let mut t = 0;
            loop {
                let (next, reward, terminal) = Chain::transition(pos, 1);
                if reward > 0.0 {
                    high += gamma.powi(t);
                } else {
                    low += gamma.powi(t);
                }
                if terminal {
                    break;
                }
                pos = next;
                t += 1;
            }
            assert!((d[s][1].mass()[0] - low).abs() < 1e-9);
            assert!((d[s][1].mass()[1] - high).abs() < 1e-9);
            let horizon = 4 - s;
            let geometric: f64 = (0..horizon).map(|t| gamma.powi(t as i32)).sum();
            assert!((d[s][1].total() - geometric).abs() < 1e-9);
        }
        // a left step from 0 bootstraps off D(0, right)
        let expected: Vec<f64> = d[0][1].mass().iter().map(|m| 0.9 * m).collect();
        assert!((d[0][0].mass()[0] - (1.0 + expected[0])).abs() < 1e-12);
        assert!((d[0][0].mass()[1] - expected[1]).abs() < 1e-12);

        let d0 = exact_policy_distributions(&mdp, &right, 0.0, &tiers).unwrap();
        assert_eq!(d0[0][1].mass(), &[1.0, 0.0]);
        assert_eq!(d0[3][1].mass(), &[0.0, 1.0]);
    }

    #[test]
    fn geometric_mass_identity_for_every_policy() {
        let mdp = Chain::mdp();
        let tiers = TierMap::from_rewards(&mdp.rewards()).unwrap();
        let gamma = 0.9f64;
        for policy in mdp.enumerate_policies() {
            let d = exact_policy_distributions(&mdp, &policy, gamma, &tiers).unwrap();
            for s in 0..GOAL {
                for a in 0..2 {
                    // realized horizon: steps until the goal, or unbounded
                    let mut pos = s;
                    let mut action = a;
                    let mut steps = 0;
                    let horizon = loop {
                        let (next, _, terminal) = Chain::transition(pos, action);
                        steps += 1;
                        if terminal {
                            break Some(steps);
                        }
                        if steps > 50 {
                            break None;
                        }
                        pos = next;
                        action = policy[pos];
                    };
                    let expected = match horizon {
                        Some(h) => (0..h).map(|t| gamma.powi(t)).sum::<f64>(),
                        None => 1.0 / (1.0 - gamma),
                    };
                    assert!((d[s][a].total() - expected).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn superiority_optimal_is_always_right() {
        let mdp = Chain::mdp();
        let tiers = TierMap::from_rewards(&mdp.rewards()).unwrap();
        let rankings = mdp.rank_policies(0.9, &tiers).unwrap();
        assert_eq!(rankings.len(), 16);
        let consistent: Vec<_> = rankings.iter().filter(|r| r.consistent).collect();
        assert_eq!(consistent.len(), 1);
        assert_eq!(&consistent[0].policy[..4], &[1, 1, 1, 1]);
        let best = mdp.superiority_optimal_policy(0.9, &tiers).unwrap();
        assert_eq!(&best[..4], &[1, 1, 1, 1]);
    }
}
