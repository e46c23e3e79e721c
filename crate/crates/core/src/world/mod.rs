//! Agent and environment state, robot dynamics, and the closed-loop episode
//! runner.
//!
//! Both agents are planar double integrators. The discrete-time model is the
//! exact zero-order-hold discretization, so a control applied at step `k`
//! already moves the position at `k + 1` (by `ts²/2 · u`).

mod episode;

pub use episode::{run_episode, EpisodeRunner};

use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec4 = Vector4<f64>;

/// Planar position and velocity of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pos: Vec2,
    pub vel: Vec2,
}

impl AgentState {
    pub fn new(pos: Vec2, vel: Vec2) -> Self {
        Self { pos, vel }
    }

    pub fn at_rest(pos: Vec2) -> Self {
        Self {
            pos,
            vel: Vec2::zeros(),
        }
    }

    /// Stacked `(px, py, vx, vy)`.
    pub fn to_vec4(&self) -> Vec4 {
        Vec4::new(self.pos.x, self.pos.y, self.vel.x, self.vel.y)
    }

    pub fn from_vec4(x: &Vec4) -> Self {
        Self {
            pos: Vec2::new(x[0], x[1]),
            vel: Vec2::new(x[2], x[3]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pos
            .iter()
            .chain(self.vel.iter())
            .all(|v| v.is_finite())
    }
}

/// A goal position embedded in state space with zero velocity.
pub fn goal_state(goal: &Vec2) -> Vec4 {
    Vec4::new(goal.x, goal.y, 0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub human: AgentState,
    pub robot: AgentState,
    pub human_goal: Vec2,
    pub robot_goal: Vec2,
    pub k: usize,
}

impl EnvState {
    /// Euclidean distance between the two agents' positions.
    pub fn distance(&self) -> f64 {
        (self.robot.pos - self.human.pos).norm()
    }
}

/// Control-affine discrete-time robot model `x' = drift·x + input·u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDynamics {
    pub ts: f64,
    pub control_bounds: Vec2,
    pub drift_matrix: Matrix4<f64>,
    pub input_matrix: Matrix4x2<f64>,
}

impl RobotDynamics {
    /// Planar double integrator under zero-order hold.
    pub fn double_integrator(ts: f64, control_bounds: Vec2) -> Self {
        let (drift_matrix, input_matrix) = double_integrator_matrices(ts);
        Self {
            ts,
            control_bounds,
            drift_matrix,
            input_matrix,
        }
    }

    pub fn clip(&self, u: &Vec2) -> Vec2 {
        clip_to_box(u, &self.control_bounds)
    }

    /// Continuous-time drift `f_R(x)` implied by one discrete step:
    /// `(drift·x − x) / ts`.
    pub fn drift_rate(&self, x: &Vec4) -> Vec4 {
        (self.drift_matrix * x - x) / self.ts
    }

    /// Continuous-time input map `g_R`: `input / ts`.
    pub fn input_rate(&self) -> Matrix4x2<f64> {
        self.input_matrix / self.ts
    }
}

pub(crate) fn double_integrator_matrices(ts: f64) -> (Matrix4<f64>, Matrix4x2<f64>) {
    let mut a = Matrix4::identity();
    a[(0, 2)] = ts;
    a[(1, 3)] = ts;
    let mut b = Matrix4x2::zeros();
    b[(0, 0)] = 0.5 * ts * ts;
    b[(1, 1)] = 0.5 * ts * ts;
    b[(2, 0)] = ts;
    b[(3, 1)] = ts;
    (a, b)
}

pub fn clip_to_box(u: &Vec2, bounds: &Vec2) -> Vec2 {
    Vec2::new(
        u.x.clamp(-bounds.x, bounds.x),
        u.y.clamp(-bounds.y, bounds.y),
    )
}

/// Advance the robot one step. The caller is responsible for clipping `u`.
pub fn step_robot(dyn_: &RobotDynamics, x: &AgentState, u: &Vec2) -> Result<AgentState> {
    if !x.is_finite() || !u.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidState(format!(
            "non-finite robot state or control: x = {:?}, u = {:?}",
            x.to_vec4().as_slice(),
            u.as_slice()
        )));
    }
    let next = dyn_.drift_matrix * x.to_vec4() + dyn_.input_matrix * u;
    Ok(AgentState::from_vec4(&next))
}

/// Ordered list of `(activation step, goal)`; the latest activated entry wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSchedule {
    pub entries: Vec<(usize, Vec2)>,
}

impl GoalSchedule {
    pub fn fixed(goal: Vec2) -> Self {
        Self {
            entries: vec![(0, goal)],
        }
    }

    pub fn goal_at(&self, k: usize) -> Vec2 {
        self.entries
            .iter()
            .filter(|(start, _)| *start <= k)
            .max_by_key(|(start, _)| *start)
            .or_else(|| self.entries.first())
            .map(|(_, g)| *g)
            .unwrap_or_else(Vec2::zeros)
    }
}
