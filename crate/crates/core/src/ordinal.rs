//! Ordinal reward representation and the statistical-superiority value function.
//!
//! Rewards are reduced to their rank among all rewards an environment can
//! emit. A state-action pair accumulates an unnormalized [`OrdinalDistribution`]
//! over those ranks; at decision time the distributions of all actions are
//! normalized and each action is scored by its averaged probability of
//! drawing a better tier than a random alternative action.

use rand::Rng;

use crate::{Error, Result};

/// Absolute tolerance used when looking a numeric reward up in a [`TierMap`].
pub const REWARD_TOLERANCE: f64 = 1e-9;

const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One-based rank of a reward within its [`TierMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrdinalTier(usize);

impl OrdinalTier {
    pub fn new(index: usize, tiers: usize) -> Result<Self> {
        if index == 0 || index > tiers {
            return Err(Error::TierOutOfRange { tier: index, tiers });
        }
        Ok(Self(index))
    }

    /// The one-based rank.
    pub fn index(self) -> usize {
        self.0
    }

    /// Zero-based position, for indexing distribution vectors.
    pub fn offset(self) -> usize {
        self.0 - 1
    }
}

/// Order-preserving assignment of numeric rewards to tiers `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TierMap {
    sorted_rewards: Vec<f64>,
}

impl TierMap {
    /// Builds the map from the set of rewards an environment can emit.
    /// Duplicates (within [`REWARD_TOLERANCE`]) collapse into one tier.
    pub fn from_rewards(rewards: &[f64]) -> Result<Self> {
        Ok(Self {
            sorted_rewards: sorted_distinct(rewards)?,
        })
    }

    pub fn tiers(&self) -> usize {
        self.sorted_rewards.len()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.sorted_rewards
    }

    /// Rank of `reward`; errors if the reward is not a member of the map.
    pub fn tier_of(&self, reward: f64) -> Result<OrdinalTier> {
        self.sorted_rewards
            .iter()
            .position(|&r| (r - reward).abs() <= REWARD_TOLERANCE)
            .map(|i| OrdinalTier(i + 1))
            .ok_or(Error::UnknownReward(reward))
    }
}

/// Shorthand for [`TierMap::from_rewards`].
pub fn tier_map_from_rewards(rewards: &[f64]) -> Result<TierMap> {
    TierMap::from_rewards(rewards)
}

/// Shorthand for [`TierMap::tier_of`].
pub fn to_ordinal(map: &TierMap, reward: f64) -> Result<OrdinalTier> {
    map.tier_of(reward)
}

fn sorted_distinct(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::NoRewards);
    }
    if let Some(&bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::InvalidReward(bad));
    }
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|b, a| (*b - *a).abs() <= REWARD_TOLERANCE);
    Ok(sorted)
}

/// Numeric reward relabelling that shifts the minimum to zero and shrinks
/// the scale by 100. Order-preserving, so the tiering is unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMap {
    pairs: Vec<(f64, f64)>,
}

impl RewardMap {
    /// `(original, changed)` pairs in ascending order of the original reward.
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn apply(&self, reward: f64) -> Result<f64> {
        self.pairs
            .iter()
            .find(|(r, _)| (r - reward).abs() <= REWARD_TOLERANCE)
            .map(|&(_, changed)| changed)
            .ok_or(Error::UnknownReward(reward))
    }

    pub fn changed_rewards(&self) -> Vec<f64> {
        self.pairs.iter().map(|&(_, c)| c).collect()
    }
}

pub fn change_rewards(rewards: &[f64]) -> Result<RewardMap> {
    let sorted = sorted_distinct(rewards)?;
    let min = sorted[0];
    Ok(RewardMap {
        pairs: sorted.iter().map(|&r| (r, (r - min) / 100.0)).collect(),
    })
}

/// Accumulated, possibly unnormalized, per-tier reward mass.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalDistribution {
    mass: Vec<f64>,
}

impl OrdinalDistribution {
    /// All-zero distribution over `tiers` tiers.
    pub fn zeros(tiers: usize) -> Self {
        Self {
            mass: vec![0.0; tiers],
        }
    }

    pub fn from_mass(mass: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::OutOfRange {
                name: "distribution mass",
                value: bad,
            });
        }
        Ok(Self { mass })
    }

    /// Unit mass on a single tier.
    pub fn unit(tier: OrdinalTier, tiers: usize) -> Self {
        let mut d = Self::zeros(tiers);
        d.mass[tier.offset()] = 1.0;
        d
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn tiers(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn normalize(&self) -> ProbabilityVector {
        normalize(self)
    }

    /// In-place form of [`ordinal_update`].
    pub fn update(
        &mut self,
        tier: OrdinalTier,
        next: &OrdinalDistribution,
        alpha: f64,
        gamma: f64,
        terminal: bool,
    ) -> Result<()> {
        check_learning_rates(alpha, gamma)?;
        let n = self.tiers();
        if next.tiers() != n {
            return Err(Error::TierCountMismatch {
                left: n,
                right: next.tiers(),
            });
        }
        if tier.index() > n {
            return Err(Error::TierOutOfRange {
                tier: tier.index(),
                tiers: n,
            });
        }
        for (i, (d, &d_next)) in self.mass.iter_mut().zip(&next.mass).enumerate() {
            let reward = if i == tier.offset() { 1.0 } else { 0.0 };
            let continuation = if terminal { 0.0 } else { gamma * d_next };
            *d += alpha * (reward + continuation - *d);
            // (1 - alpha) * d + alpha * target can round a hair below zero
            if *d < 0.0 {
                *d = 0.0;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_learning_rates(alpha: f64, gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
        });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
        });
    }
    Ok(())
}

/// Interpolates `d` toward `e_tier + gamma * d_next` with rate `alpha`.
/// The continuation term is dropped for terminal transitions.
pub fn ordinal_update(
    d: &OrdinalDistribution,
    tier: OrdinalTier,
    d_next: &OrdinalDistribution,
    alpha: f64,
    gamma: f64,
    terminal: bool,
) -> Result<OrdinalDistribution> {
    let mut out = d.clone();
    out.update(tier, d_next, alpha, gamma, terminal)?;
    Ok(out)
}

/// A normalized distribution over tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::OutOfRange {
                name: "probability",
                value: bad,
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::OutOfRange {
                name: "probability sum",
                value: sum,
            });
        }
        Ok(Self { probs })
    }

    pub fn uniform(tiers: usize) -> Self {
        Self {
            probs: vec![1.0 / tiers as f64; tiers],
        }
    }

    pub fn unit(tier: OrdinalTier, tiers: usize) -> Self {
        let mut probs = vec![0.0; tiers];
        probs[tier.offset()] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tiers(&self) -> usize {
        self.probs.len()
    }
}

/// Normalizes accumulated mass. A distribution with no mass yet is treated
/// as uniform, so unvisited actions score exactly one half.
pub fn normalize(d: &OrdinalDistribution) -> ProbabilityVector {
    normalize_mass(&d.mass)
}

/// Normalization of a raw mass vector that may contain negative entries
/// (network predictions). Negative entries count as zero.
pub fn normalize_clamped(raw: &[f64]) -> ProbabilityVector {
    let clamped: Vec<f64> = raw.iter().map(|&v| clamp_mass(v)).collect();
    normalize_mass(&clamped)
}

/// Clamp applied to a predicted distribution entry before it is used as mass.
#[inline]
pub fn clamp_mass(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn normalize_mass(mass: &[f64]) -> ProbabilityVector {
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        ProbabilityVector {
            probs: mass.iter().map(|&m| m / total).collect(),
        }
    } else {
        ProbabilityVector::uniform(mass.len())
    }
}

/// Probability that a draw from `a` lands in a strictly higher tier than a
/// draw from `b`, with ties counting one half.
pub fn win_probability(a: &ProbabilityVector, b: &ProbabilityVector) -> Result<f64> {
    if a.tiers() != b.tiers() {
        return Err(Error::TierCountMismatch {
            left: a.tiers(),
            right: b.tiers(),
        });
    }
    Ok(win_probability_unchecked(&a.probs, &b.probs))
}

// Written as 1/2 + (P(a > b) - P(b > a)) / 2 so identical inputs give
// exactly one half.
fn win_probability_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let (mut below_a, mut below_b) = (0.0, 0.0);
    let (mut greater, mut less) = (0.0, 0.0);
    for (&pa, &pb) in a.iter().zip(b) {
        greater += pa * below_b;
        less += pb * below_a;
        below_a += pa;
        below_b += pb;
    }
    0.5 + 0.5 * (greater - less)
}

/// Averaged win probability of each action against the other `k - 1`.
pub fn superiority_scores(all: &[ProbabilityVector]) -> Result<Vec<f64>> {
    let k = all.len();
    if k < 2 {
        return Err(Error::TooFewActions(k));
    }
    let n = all[0].tiers();
    if let Some(bad) = all.iter().find(|p| p.tiers() != n) {
        return Err(Error::TierCountMismatch {
            left: n,
            right: bad.tiers(),
        });
    }
    let mut scores = vec![0.0; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let w = win_probability_unchecked(&all[i].probs, &all[j].probs);
            scores[i] += w;
            scores[j] += 1.0 - w;
        }
    }
    let denom = (k - 1) as f64;
    scores.iter_mut().for_each(|s| *s /= denom);
    Ok(scores)
}

/// Scores for raw distributions; zero-mass entries normalize to uniform.
pub fn distribution_scores(all: &[OrdinalDistribution]) -> Result<Vec<f64>> {
    let probs: Vec<ProbabilityVector> = all.iter().map(normalize).collect();
    superiority_scores(&probs)
}

/// Index of a maximal score, ties broken uniformly at random.
pub fn greedy_action<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Result<usize> {
    let best = scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut first = None;
    let mut count = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s == best {
            first.get_or_insert(i);
            count += 1;
        }
    }
    let first = first.ok_or(Error::NonFinite)?;
    if count == 1 {
        return Ok(first);
    }
    let pick = rng.gen_range(0..count);
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == best)
        .nth(pick)
        .map(|(i, _)| i)
        .unwrap_or(first))
}

/// With probability `epsilon` a uniformly random action, otherwise greedy.
/// No exploration draw is consumed when `epsilon` is zero.
pub fn epsilon_greedy_action<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..scores.len()));
    }
    greedy_action(scores, rng)
}

/// Linear ε decay from 1 at the first episode to `floor` at half of the
/// total episode count, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    total_episodes: usize,
    floor: f64,
}

impl EpsilonSchedule {
    pub fn new(total_episodes: usize, floor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::OutOfRange {
                name: "epsilon floor",
                value: floor,
            });
        }
        Ok(Self {
            total_episodes,
            floor,
        })
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let half = self.total_episodes as f64 / 2.0;
        let e = episode as f64;
        if e >= half {
            self.floor
        } else {
            1.0 - (1.0 - self.floor) * (e / half)
        }
    }
}

pub fn epsilon_at(schedule: &EpsilonSchedule, episode: usize) -> f64 {
    schedule.epsilon_at(episode)
}
