use std::fmt::Write as _;

use crate::envs::{exact_policy_distributions, Chain};
use crate::ordinal::{distribution_scores, TierMap};
use crate::Result;

fn actions(policy: &[usize]) -> String {
    policy.iter().map(|&a| if a == 1 { 'R' } else { 'L' }).collect()
}

/// Exact solutions of the chain: optimal Q-values by value iteration and
/// every deterministic policy ranked by start-state superiority.
pub fn chain_oracle_report(gamma: f64) -> Result<String> {
    let mdp = Chain::mdp();
    let mut s = String::new();
    let _ = writeln!(s, "chain, gamma = {gamma}");
    let _ = writeln!(s, "value iteration:");
    let q = mdp.value_iteration(gamma, 1e-12);
    for (state, row) in q.iter().enumerate().filter(|(s, _)| !mdp.is_terminal(*s)) {
        let best = if row[1] > row[0] { "R" } else { "L" };
        let _ = writeln!(s, "  s{state}  Q(L) = {:.6}  Q(R) = {:.6}  greedy {best}", row[0], row[1]);
    }

    let tiers = TierMap::from_rewards(&mdp.rewards())?;
    let mut ranked = mdp.rank_policies(gamma, &tiers)?;
    ranked.sort_by(|a, b| b.start_score.total_cmp(&a.start_score));
    let free = mdp.states() - 1;
    let _ = writeln!(s, "ordinal policies (states 0..{}, L/R):", free - 1);
    for r in &ranked {
        let d = exact_policy_distributions(&mdp, &r.policy, gamma, &tiers)?;
        let start = &d[mdp.start()][r.policy[mdp.start()]];
        let _ = writeln!(
            s,
            "  {}  superiority {:.6}  start D = [{}]  {}",
            actions(&r.policy[..free]),
            r.start_score,
            start.mass().iter().map(|m| format!("{m:.6}")).collect::<Vec<_>>().join(", "),
            if r.consistent { "self-consistent" } else { "" }
        );
    }
    let best = mdp.superiority_optimal_policy(gamma, &tiers)?;
    let d = exact_policy_distributions(&mdp, &best, gamma, &tiers)?;
    let _ = writeln!(s, "superiority-optimal policy: {}", actions(&best[..free]));
    for state in 0..free {
        let scores = distribution_scores(&d[state])?;
        let _ = writeln!(s, "  s{state}  scores L = {:.6}  R = {:.6}", scores[0], scores[1]);
    }
    Ok(s)
}
