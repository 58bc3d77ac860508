use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvSpec, Environment, StepResult, WinRule};
use crate::Result;

const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
const DT: f64 = 0.2;

pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];
const MAX_STEPS: usize = 500;

/// `(theta1, theta2, omega1, omega2)`, angles measured from hanging down.
pub type AcrobotState = [f64; 4];

fn derivatives(s: &[f64; 5]) -> [f64; 5] {
    let [theta1, theta2, dtheta1, dtheta2, torque] = *s;
    let (m1, m2, l1, lc1, lc2) = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_1, LINK_COM_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let g = GRAVITY;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2, 0.0]
}

fn rk4(y0: &[f64; 5], dt: f64) -> [f64; 5] {
    let add = |y: &[f64; 5], k: &[f64; 5], h: f64| -> [f64; 5] {
        std::array::from_fn(|i| y[i] + h * k[i])
    };
    let k1 = derivatives(y0);
    let k2 = derivatives(&add(y0, &k1, dt / 2.0));
    let k3 = derivatives(&add(y0, &k2, dt / 2.0));
    let k4 = derivatives(&add(y0, &k3, dt));
    std::array::from_fn(|i| y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// One RK4 step under the torque selected by `action`. Angles are wrapped
/// to `[-pi, pi)` and velocities clipped. Returns the next state and
/// whether the tip is above the goal height.
pub fn acrobot_step(state: &AcrobotState, action: usize) -> (AcrobotState, bool) {
    let augmented = [state[0], state[1], state[2], state[3], TORQUES[action]];
    let y = rk4(&augmented, DT);
    let next = [
        wrap_angle(y[0]),
        wrap_angle(y[1]),
        y[2].clamp(-MAX_VEL_1, MAX_VEL_1),
        y[3].clamp(-MAX_VEL_2, MAX_VEL_2),
    ];
    let reached = -next[0].cos() - (next[0] + next[1]).cos() > 1.0;
    (next, reached)
}

pub fn acrobot_observation(state: &AcrobotState) -> Vec<f64> {
    let [t1, t2, w1, w2] = *state;
    vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), w1, w2]
}

/// Kinetic plus potential energy, used to sanity-check the integrator.
pub fn mechanical_energy(state: &AcrobotState) -> f64 {
    let [t1, t2, w1, w2] = *state;
    let (m1, m2, l1, lc1, lc2) = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_1, LINK_COM_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let d11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d12 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let d22 = m2 * lc2 * lc2 + i2;
    let kinetic = 0.5 * (d11 * w1 * w1 + 2.0 * d12 * w1 * w2 + d22 * w2 * w2);
    let potential = -GRAVITY * (m1 * lc1 * t1.cos() + m2 * (l1 * t1.cos() + lc2 * (t1 + t2).cos()));
    kinetic + potential
}

/// Two-link underactuated pendulum; actions apply torque -1, 0 or +1 at the
/// second joint. Reward -1 per step, 0 on the step reaching the goal height.
pub struct Acrobot {
    spec: EnvSpec,
    state: AcrobotState,
    steps: usize,
}

impl Acrobot {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "acrobot",
                state_dim: 6,
                action_count: 3,
                rewards: vec![-1.0, 0.0],
                max_steps: MAX_STEPS,
                win: WinRule::TerminalBeforeLimit,
                win_description: "tip above goal height within 500 steps",
            },
            state: [0.0; 4],
            steps: 0,
        }
    }

    pub fn state(&self) -> AcrobotState {
        self.state
    }

    pub fn set_state(&mut self, state: AcrobotState) {
        self.state = state;
        self.steps = 0;
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Acrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state: AcrobotState = std::array::from_fn(|_| rng.gen_range(-0.1..=0.1));
        self.set_state(state);
        acrobot_observation(&state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.spec.check_action(action)?;
        let (next, reached) = acrobot_step(&self.state, action);
        self.state = next;
        self.steps += 1;
        Ok(StepResult {
            next_state: acrobot_observation(&next),
            reward: if reached { 0.0 } else { -1.0 },
            terminal: reached,
            truncated: !reached && self.steps >= MAX_STEPS,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn no_torque_from_rest_stays_down() {
        let mut env = Acrobot::new();
        env.set_state([0.0; 4]);
        for _ in 0..10 {
            let out = env.step(1).unwrap();
            assert!(!out.terminal);
            assert_eq!(out.reward, -1.0);
        }
    }

    #[test]
    fn energy_conserved_without_torque() {
        // a free swing well beyond the reset range
        let mut state: AcrobotState = [0.5, -0.3, 0.0, 0.0];
        let e0 = mechanical_energy(&state);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            state = acrobot_step(&state, 1).0;
            worst = worst.max((mechanical_energy(&state) - e0).abs());
        }
        assert!(worst / e0.abs() < 0.01, "drift {worst} of {e0}");
    }

    #[test]
    fn velocities_clipped() {
        let mut env = Acrobot::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        env.reset(0);
        for episode in 0..50u64 {
            loop {
                let out = env.step(rng.gen_range(0..3)).unwrap();
                let s = env.state();
                assert!(s[2].abs() <= MAX_VEL_1 && s[3].abs() <= MAX_VEL_2);
                assert!(s[0].abs() <= PI && s[1].abs() <= PI);
                if out.done() {
                    break;
                }
            }
            env.reset(episode + 1);
        }
    }

    #[test]
    fn terminal_before_limit_is_win() {
        let env = Acrobot::new();
        let terminal = StepResult {
            next_state: vec![0.0; 6],
            reward: 0.0,
            terminal: true,
            truncated: false,
        };
        let timeout = StepResult {
            terminal: false,
            truncated: true,
            reward: -1.0,
            ..terminal.clone()
        };
        assert!(env.spec().is_win(&terminal));
        assert!(!env.spec().is_win(&timeout));
    }

    #[test]
    fn truncates_at_five_hundred() {
        let mut env = Acrobot::new();
        env.set_state([0.0; 4]);
        for t in 1..=MAX_STEPS {
            let out = env.step(1).unwrap();
            assert_eq!(out.truncated, t == MAX_STEPS);
        }
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }
}
