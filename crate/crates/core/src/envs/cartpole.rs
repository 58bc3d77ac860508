use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, Environment, StepResult, WinRule};
use crate::Result;

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
// half the pole length
const LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = POLE_MASS * LENGTH;
const FORCE: f64 = 10.0;
const TAU: f64 = 0.02;

pub const ANGLE_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const POSITION_LIMIT: f64 = 2.4;
const MAX_STEPS: usize = 200;

/// `(x, x_dot, theta, theta_dot)`
pub type CartPoleState = [f64; 4];

/// One Euler step of the cart-pole dynamics. Returns the next state and
/// whether it is a failure state.
pub fn cartpole_step(state: &CartPoleState, action: usize) -> (CartPoleState, bool) {
    let [x, x_dot, theta, theta_dot] = *state;
    let force = if action == 1 { FORCE } else { -FORCE };
    let (sin, cos) = theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

    let next = [
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    ];
    let failed = next[0].abs() > POSITION_LIMIT || next[2].abs() > ANGLE_LIMIT;
    (next, failed)
}

/// Pole balancing on a cart; actions push left (0) or right (1).
/// Reward 1 per surviving step, 0 on the step that fails.
pub struct CartPole {
    spec: EnvSpec,
    state: CartPoleState,
    steps: usize,
}

impl CartPole {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "cartpole",
                state_dim: 4,
                action_count: 2,
                rewards: vec![0.0, 1.0],
                max_steps: MAX_STEPS,
                win: WinRule::ReachedTimeLimit,
                win_description: "balanced for 200 steps",
            },
            state: [0.0; 4],
            steps: 0,
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Places the system in an arbitrary state and restarts the step count.
    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state: CartPoleState = std::array::from_fn(|_| rng.gen_range(-0.05..=0.05));
        self.set_state(state);
        state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.spec.check_action(action)?;
        let (next, failed) = cartpole_step(&self.state, action);
        self.state = next;
        self.steps += 1;
        Ok(StepResult {
            next_state: next.to_vec(),
            reward: if failed { 0.0 } else { 1.0 },
            terminal: failed,
            truncated: !failed && self.steps >= MAX_STEPS,
        })
    }
}
