//! Table-based learners: numeric Q-learning and ordinal Q-learning over
//! reward-tier distributions, plus equal-width state discretization.

use std::f64::consts::PI;

use rand::Rng;

use crate::ordinal::{
    check_learning_rates, distribution_scores, epsilon_greedy_action, greedy_action,
    OrdinalDistribution, OrdinalTier,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucketing {
    pub lower: f64,
    pub upper: f64,
    pub buckets: usize,
}

/// Maps a continuous state to a table index: every component is clipped to
/// its bounds, split into equal-width buckets, and the buckets are combined
/// mixed-radix with the first component most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    dims: Vec<Bucketing>,
}

impl Discretizer {
    pub fn new(dims: Vec<Bucketing>) -> Result<Self> {
        for d in &dims {
            if d.buckets == 0 {
                return Err(Error::ZeroSize);
            }
            if d.lower.partial_cmp(&d.upper) != Some(std::cmp::Ordering::Less) {
                return Err(Error::OutOfRange {
                    name: "discretizer lower bound",
                    value: d.lower,
                });
            }
        }
        Ok(Self { dims })
    }

    fn uniform(bounds: &[(f64, f64)], buckets: usize) -> Self {
        Self {
            dims: bounds
                .iter()
                .map(|&(lower, upper)| Bucketing {
                    lower,
                    upper,
                    buckets,
                })
                .collect(),
        }
    }

    /// Ten buckets for each of position, velocity, angle and angular velocity.
    pub fn cartpole() -> Self {
        Self::uniform(
            &[(-2.4, 2.4), (-3.0, 3.0), (-0.21, 0.21), (-3.5, 3.5)],
            10,
        )
    }

    /// Six buckets for each of the six observation features.
    pub fn acrobot() -> Self {
        Self::uniform(
            &[
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-1.0, 1.0),
                (-4.0 * PI, 4.0 * PI),
                (-9.0 * PI, 9.0 * PI),
            ],
            6,
        )
    }

    /// One bucket per chain position.
    pub fn chain() -> Self {
        Self::uniform(&[(0.0, 5.0)], 5)
    }

    pub fn dims(&self) -> &[Bucketing] {
        &self.dims
    }

    pub fn state_count(&self) -> usize {
        self.dims.iter().map(|d| d.buckets).product()
    }

    pub fn discretize(&self, state: &[f64]) -> Result<usize> {
        if state.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: state.len(),
            });
        }
        let mut index = 0;
        for (d, &x) in self.dims.iter().zip(state) {
            if x.is_nan() {
                return Err(Error::NonFinite);
            }
            let x = x.clamp(d.lower, d.upper);
            let frac = (x - d.lower) / (d.upper - d.lower);
            let bucket = ((frac * d.buckets as f64) as usize).min(d.buckets - 1);
            index = index * d.buckets + bucket;
        }
        Ok(index)
    }
}

/// Gap between the best and second-best score.
pub(crate) fn top_two_gap(scores: &[f64]) -> Result<(f64, f64)> {
    if scores.len() < 2 {
        return Err(Error::TooFewActions(scores.len()));
    }
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &s in scores {
        if s > best {
            second = best;
            best = s;
        } else if s > second {
            second = s;
        }
    }
    Ok((best, best - second))
}

/// Common decision interface of the two table learners.
pub trait ActionTable {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Per-action decision scores in `state`.
    fn scores(&self, state: usize) -> Result<Vec<f64>>;
    /// Margin of the best action, as plotted for value-function convergence.
    fn value_margin(&self, state: usize) -> Result<f64>;

    fn act<R: Rng + ?Sized>(&self, state: usize, epsilon: f64, rng: &mut R) -> Result<usize>
    where
        Self: Sized,
    {
        epsilon_greedy_action(&self.scores(state)?, epsilon, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericQTable {
    states: usize,
    actions: usize,
    q: Vec<f64>,
}

impl NumericQTable {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            q: vec![0.0; states * actions],
        }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.q[state * self.actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.actions..(state + 1) * self.actions]
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.states {
            return Err(Error::DimensionMismatch {
                expected: self.states,
                got: state,
            });
        }
        if action >= self.actions {
            return Err(Error::InvalidAction {
                action,
                count: self.actions,
            });
        }
        Ok(())
    }

    /// `Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))`, without the
    /// bootstrap term for terminal transitions.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        terminal: bool,
        alpha: f64,
        gamma: f64,
    ) -> Result<()> {
        check_learning_rates(alpha, gamma)?;
        self.check(state, action)?;
        self.check(next_state, 0)?;
        let continuation = if terminal {
            0.0
        } else {
            self.row(next_state)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let q = self.get(state, action);
        self.set(state, action, q + alpha * (reward + gamma * continuation - q));
        Ok(())
    }
}

impl ActionTable for NumericQTable {
    fn state_count(&self) -> usize {
        self.states
    }

    fn action_count(&self) -> usize {
        self.actions
    }

    fn scores(&self, state: usize) -> Result<Vec<f64>> {
        self.check(state, 0)?;
        Ok(self.row(state).to_vec())
    }

    /// Relative gap `(max - second) / |max|`.
    fn value_margin(&self, state: usize) -> Result<f64> {
        self.check(state, 0)?;
        let (best, gap) = top_two_gap(self.row(state))?;
        Ok(gap / (best.abs() + 1e-12))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalQTable {
    states: usize,
    actions: usize,
    tiers: usize,
    d: Vec<OrdinalDistribution>,
}

impl OrdinalQTable {
    pub fn new(states: usize, actions: usize, tiers: usize) -> Self {
        Self {
            states,
            actions,
            tiers,
            d: vec![OrdinalDistribution::zeros(tiers); states * actions],
        }
    }

    pub fn tiers(&self) -> usize {
        self.tiers
    }

    pub fn distribution(&self, state: usize, action: usize) -> &OrdinalDistribution {
        &self.d[state * self.actions + action]
    }

    pub fn set_distribution(&mut self, state: usize, action: usize, d: OrdinalDistribution) {
        assert_eq!(d.tiers(), self.tiers);
        self.d[state * self.actions + action] = d;
    }

    pub fn distributions(&self, state: usize) -> &[OrdinalDistribution] {
        &self.d[state * self.actions..(state + 1) * self.actions]
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.states {
            return Err(Error::DimensionMismatch {
                expected: self.states,
                got: state,
            });
        }
        Ok(())
    }

    /// Greedy action in `state` under the superiority scores.
    pub fn greedy<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Result<usize> {
        greedy_action(&self.scores(state)?, rng)
    }

    /// Ordinal Q-learning step: bootstrap from the distribution of the
    /// greedy action in `next_state` (not needed for terminal transitions).
    #[allow(clippy::too_many_arguments)]
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: usize,
        action: usize,
        tier: OrdinalTier,
        next_state: usize,
        terminal: bool,
        alpha: f64,
        gamma: f64,
        rng: &mut R,
    ) -> Result<()> {
        check_learning_rates(alpha, gamma)?;
        self.check_state(state)?;
        self.check_state(next_state)?;
        if action >= self.actions {
            return Err(Error::InvalidAction {
                action,
                count: self.actions,
            });
        }
        let next = if terminal {
            OrdinalDistribution::zeros(self.tiers)
        } else {
            let best = self.greedy(next_state, rng)?;
            self.distribution(next_state, best).clone()
        };
        self.d[state * self.actions + action].update(tier, &next, alpha, gamma, terminal)
    }
}

impl ActionTable for OrdinalQTable {
    fn state_count(&self) -> usize {
        self.states
    }

    fn action_count(&self) -> usize {
        self.actions
    }

    fn scores(&self, state: usize) -> Result<Vec<f64>> {
        self.check_state(state)?;
        distribution_scores(self.distributions(state))
    }

    /// Absolute gap between the two best superiority scores.
    fn value_margin(&self, state: usize) -> Result<f64> {
        let (_, gap) = top_two_gap(&self.scores(state)?)?;
        Ok(gap)
    }
}
