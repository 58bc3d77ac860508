//! Finite MDPs given as explicit transition tables, with the exact
//! solutions used as oracles for the learners.

use crate::ordinal::{distribution_scores, normalize, superiority_scores, OrdinalDistribution, TierMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    pub next: usize,
    pub reward: f64,
    /// The transition enters a terminal state.
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct TabularMdp {
    states: usize,
    actions: usize,
    start: usize,
    outcomes: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
}

/// One deterministic policy from an exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct PolicyRanking {
    pub policy: Vec<usize>,
    /// Superiority of this policy's start-state distribution against the
    /// start-state distributions of every other enumerated policy.
    pub start_score: f64,
    /// Every non-terminal state's action maximizes the superiority scores of
    /// the policy's own distributions in that state.
    pub consistent: bool,
}

impl TabularMdp {
    pub fn new(states: usize, actions: usize, start: usize) -> Self {
        Self {
            states,
            actions,
            start,
            outcomes: vec![Vec::new(); states * actions],
            terminal: vec![false; states],
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn set_terminal(&mut self, state: usize) {
        self.terminal[state] = true;
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn set_outcomes(&mut self, state: usize, action: usize, outcomes: Vec<Outcome>) {
        self.outcomes[state * self.actions + action] = outcomes;
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Outcome] {
        &self.outcomes[state * self.actions + action]
    }

    /// Distinct rewards appearing in the table.
    pub fn rewards(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.outcomes.iter().flatten().map(|o| o.reward).collect();
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }

    fn deterministic_outcome(&self, state: usize, action: usize) -> Result<Outcome> {
        match self.outcomes(state, action) {
            [o] if (o.probability - 1.0).abs() < 1e-12 => Ok(*o),
            other => Err(Error::NonDeterministic(format!(
                "state {state} action {action} has {} outcomes",
                other.len()
            ))),
        }
    }

    /// Optimal action values by value iteration, iterated until the largest
    /// change falls below `tolerance`. Terminal states have value zero.
    pub fn value_iteration(&self, gamma: f64, tolerance: f64) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.actions]; self.states];
        loop {
            let mut next = q.clone();
            let mut delta: f64 = 0.0;
            for s in (0..self.states).filter(|&s| !self.terminal[s]) {
                for a in 0..self.actions {
                    let v: f64 = self
                        .outcomes(s, a)
                        .iter()
                        .map(|o| {
                            let cont = if o.terminal {
                                0.0
                            } else {
                                q[o.next].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                            };
                            o.probability * (o.reward + gamma * cont)
                        })
                        .sum();
                    delta = delta.max((v - q[s][a]).abs());
                    next[s][a] = v;
                }
            }
            q = next;
            if delta < tolerance {
                return q;
            }
        }
    }

    /// Every deterministic policy; terminal states are fixed to action 0.
    pub fn enumerate_policies(&self) -> Vec<Vec<usize>> {
        let free: Vec<usize> = (0..self.states).filter(|&s| !self.terminal[s]).collect();
        let count = self.actions.pow(free.len() as u32);
        (0..count)
            .map(|mut code| {
                let mut policy = vec![0; self.states];
                for &s in &free {
                    policy[s] = code % self.actions;
                    code /= self.actions;
                }
                policy
            })
            .collect()
    }

    /// Ranks all deterministic policies by their exact tier distributions.
    pub fn rank_policies(&self, gamma: f64, tiers: &TierMap) -> Result<Vec<PolicyRanking>> {
        let policies = self.enumerate_policies();
        let mut starts = Vec::with_capacity(policies.len());
        let mut consistent = Vec::with_capacity(policies.len());
        for policy in &policies {
            let d = exact_policy_distributions(self, policy, gamma, tiers)?;
            starts.push(normalize(&d[self.start][policy[self.start]]));
            let mut ok = true;
            for s in (0..self.states).filter(|&s| !self.terminal[s]) {
                let scores = distribution_scores(&d[s])?;
                let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if scores[policy[s]] < best - 1e-12 {
                    ok = false;
                    break;
                }
            }
            consistent.push(ok);
        }
        let start_scores = superiority_scores(&starts)?;
        Ok(policies
            .into_iter()
            .zip(start_scores)
            .zip(consistent)
            .map(|((policy, start_score), consistent)| PolicyRanking {
                policy,
                start_score,
                consistent,
            })
            .collect())
    }

    /// The self-consistent policy with the best start-state superiority.
    pub fn superiority_optimal_policy(&self, gamma: f64, tiers: &TierMap) -> Result<Vec<usize>> {
        self.rank_policies(gamma, tiers)?
            .into_iter()
            .filter(|r| r.consistent)
            .max_by(|a, b| a.start_score.total_cmp(&b.start_score))
            .map(|r| r.policy)
            .ok_or_else(|| Error::NonDeterministic("no self-consistent policy".into()))
    }
}

/// Exact fixed point `D(s,a) = e_tier(s,a) + gamma * D(s', policy(s'))` of
/// the ordinal update for a deterministic MDP and policy, indexed
/// `[state][action]`. Trajectories that loop are summed in closed form.
pub fn exact_policy_distributions(
    mdp: &TabularMdp,
    policy: &[usize],
    gamma: f64,
    tiers: &TierMap,
) -> Result<Vec<Vec<OrdinalDistribution>>> {
    if policy.len() != mdp.states {
        return Err(Error::DimensionMismatch {
            expected: mdp.states,
            got: policy.len(),
        });
    }
    let n = tiers.tiers();
    let mut table = vec![vec![OrdinalDistribution::zeros(n); mdp.actions]; mdp.states];
    for s in (0..mdp.states).filter(|&s| !mdp.terminal[s]) {
        for a in 0..mdp.actions {
            // tier offsets along the trajectory, and the visited states
            let mut tier_seq = Vec::new();
            let mut visited: Vec<usize> = Vec::new();
            let mut outcome = mdp.deterministic_outcome(s, a)?;
            let mut cycle_start = None;
            loop {
                tier_seq.push(tiers.tier_of(outcome.reward)?.offset());
                if outcome.terminal {
                    break;
                }
                if let Some(pos) = visited.iter().position(|&v| v == outcome.next) {
                    // tier_seq[pos + 1..] repeats forever
                    cycle_start = Some(pos + 1);
                    break;
                }
                visited.push(outcome.next);
                outcome = mdp.deterministic_outcome(outcome.next, policy[outcome.next])?;
            }
            let mut mass = vec![0.0; n];
            match cycle_start {
                None => {
                    for (t, &tier) in tier_seq.iter().enumerate() {
                        mass[tier] += gamma.powi(t as i32);
                    }
                }
                Some(start) => {
                    let period = tier_seq.len() - start;
                    let scale = 1.0 / (1.0 - gamma.powi(period as i32));
                    for (t, &tier) in tier_seq.iter().enumerate() {
                        let w = gamma.powi(t as i32);
                        mass[tier] += if t >= start { w * scale } else { w };
                    }
                }
            }
            table[s][a] = OrdinalDistribution::from_mass(mass)?;
        }
    }
    Ok(table)
}
