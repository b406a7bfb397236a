use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, Environment, StepResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LanderAction {
    Noop = 0,
    /// Left-side engine: pushes toward +x and rotates clockwise.
    LeftEngine = 1,
    Main = 2,
    /// Right-side engine: pushes toward -x and rotates counter-clockwise.
    RightEngine = 3,
}

impl LanderAction {
    pub fn from_index(a: usize) -> Option<Self> {
        [Self::Noop, Self::LeftEngine, Self::Main, Self::RightEngine]
            .get(a)
            .copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanderParams {
    pub gravity: f64,
    pub main_accel: f64,
    pub side_accel: f64,
    pub side_torque: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Pad spans `[-pad_half_width, pad_half_width]` on the ground.
    pub pad_half_width: f64,
    pub leg_offset: f64,
    pub safe_vx: f64,
    pub safe_vy: f64,
    pub safe_angle: f64,
    pub x_limit: f64,
    pub y_limit: f64,
    pub main_fuel: f64,
    pub side_fuel: f64,
    pub crash_reward: f64,
    pub land_reward: f64,
    pub init_x: [f64; 2],
    pub init_y: [f64; 2],
    pub init_vx: [f64; 2],
    pub init_vy: [f64; 2],
    pub init_angle: [f64; 2],
    pub init_omega: [f64; 2],
}

impl Default for LanderParams {
    fn default() -> Self {
        Self {
            gravity: 1.0,
            main_accel: 2.5,
            side_accel: 0.6,
            side_torque: 1.0,
            dt: 0.02,
            max_steps: 500,
            pad_half_width: 0.25,
            leg_offset: 0.1,
            safe_vx: 0.5,
            safe_vy: 0.5,
            safe_angle: 0.3,
            x_limit: 1.5,
            y_limit: 2.5,
            main_fuel: 0.3,
            side_fuel: 0.03,
            crash_reward: -100.0,
            land_reward: 100.0,
            init_x: [-0.8, 0.8],
            init_y: [1.3, 1.5],
            init_vx: [-0.3, 0.3],
            init_vy: [-0.3, 0.0],
            init_angle: [-0.1, 0.1],
            init_omega: [-0.1, 0.1],
        }
    }
}

/// Rigid-body lander on flat ground with a landing pad around `x = 0`.
///
/// Observation: `x, y, vx, vy, angle, omega, left_leg, right_leg`. Reward is the
/// change in a potential (distance to the pad, speed, tilt, leg contact) minus
/// fuel. Touchdown with small speed and tilt on or off the pad is a landing;
/// anything else touching the ground, or leaving the arena, is a crash.
#[derive(Clone, Debug)]
pub struct LanderLite {
    params: LanderParams,
    state: [f64; 6],
    legs: [bool; 2],
    steps: usize,
    shaping: f64,
    done: bool,
    landed: bool,
}

impl LanderLite {
    pub fn new(params: LanderParams) -> Self {
        let mut env = Self {
            params,
            state: [0.0; 6],
            legs: [false; 2],
            steps: 0,
            shaping: 0.0,
            done: true,
            landed: false,
        };
        env.shaping = env.potential();
        env
    }

    pub fn params(&self) -> &LanderParams {
        &self.params
    }

    pub fn landed(&self) -> bool {
        self.landed
    }

    /// Places the lander in an explicit state `(x, y, vx, vy, angle, omega)`.
    pub fn reset_to(&mut self, state: [f64; 6]) -> Vec<f64> {
        self.state = state;
        self.legs = [false; 2];
        self.steps = 0;
        self.done = false;
        self.landed = false;
        self.shaping = self.potential();
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        let mut o = self.state.to_vec();
        o.push(self.legs[0] as u8 as f64);
        o.push(self.legs[1] as u8 as f64);
        o
    }

    fn potential(&self) -> f64 {
        let [x, y, vx, vy, angle, _] = self.state;
        -100.0 * (x * x + y * y).sqrt() - 100.0 * (vx * vx + vy * vy).sqrt() - 100.0 * angle.abs()
            + 10.0 * self.legs[0] as u8 as f64
            + 10.0 * self.legs[1] as u8 as f64
    }
}

impl Environment for LanderLite {
    fn observation_dim(&self) -> usize {
        8
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = &self.params;
        let mut draw = |r: [f64; 2]| if r[0] < r[1] { rng.gen_range(r[0]..r[1]) } else { r[0] };
        let state = [
            draw(p.init_x),
            draw(p.init_y),
            draw(p.init_vx),
            draw(p.init_vy),
            draw(p.init_angle),
            draw(p.init_omega),
        ];
        self.reset_to(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        check_action(action, 4)?;
        let p = &self.params;
        let [mut x, mut y, mut vx, mut vy, mut angle, mut omega] = self.state;
        let (s, c) = angle.sin_cos();
        let (mut ax, mut ay, mut alpha, mut fuel) = (0.0, -p.gravity, 0.0, 0.0);
        match LanderAction::from_index(action).expect("checked") {
            LanderAction::Noop => {}
            LanderAction::Main => {
                ax -= s * p.main_accel;
                ay += c * p.main_accel;
                fuel = p.main_fuel;
            }
            LanderAction::LeftEngine => {
                ax += c * p.side_accel;
                ay += s * p.side_accel;
                alpha = -p.side_torque;
                fuel = p.side_fuel;
            }
            LanderAction::RightEngine => {
                ax -= c * p.side_accel;
                ay -= s * p.side_accel;
                alpha = p.side_torque;
                fuel = p.side_fuel;
            }
        }
        vx += ax * p.dt;
        vy += ay * p.dt;
        omega += alpha * p.dt;
        x += vx * p.dt;
        y += vy * p.dt;
        angle += omega * p.dt;

        let lift = p.leg_offset * angle.sin();
        let legs = [y - lift <= 0.0, y + lift <= 0.0];
        let touching = legs[0] || legs[1] || y <= 0.0;
        let out_of_bounds = x.abs() > p.x_limit || y > p.y_limit;
        let safe = vx.abs() <= p.safe_vx && vy.abs() <= p.safe_vy && angle.abs() <= p.safe_angle;

        let mut terminal = false;
        let reward;
        if touching && safe {
            y = y.max(0.0);
            self.state = [x, y, vx, vy, angle, omega];
            self.legs = [true, true];
            let shaping = self.potential();
            reward = shaping - self.shaping - fuel + p.land_reward;
            self.shaping = shaping;
            self.landed = true;
            terminal = true;
        } else if touching || out_of_bounds {
            self.state = [x, y, vx, vy, angle, omega];
            self.legs = legs;
            reward = p.crash_reward;
            terminal = true;
        } else {
            self.state = [x, y, vx, vy, angle, omega];
            self.legs = legs;
            let shaping = self.potential();
            reward = shaping - self.shaping - fuel;
            self.shaping = shaping;
        }
        self.steps += 1;
        let truncated = !terminal && self.steps >= self.params.max_steps;
        self.done = terminal || truncated;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal,
            truncated,
        })
    }

    fn solve_threshold(&self) -> f64 {
        200.0
    }
}
