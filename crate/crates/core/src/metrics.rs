//! Evaluation metrics: runtime and held-out prediction error, safety
//! interventions, the robot's influence field and the one-step safe
//! reachable-set size.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{predict_observation, BeliefState, Prediction};
use crate::config::ScenarioLayout;
use crate::error::{Error, Result};
use crate::explore::{risk_neutral, RiskPreference};
use crate::human::{step_human, PotentialFieldHuman};
use crate::model::HumanModel;
use crate::neural::Frame;
use crate::safety::{safe_control_set_from_index, SafetyIndex, SafetyIndexParams};
use crate::world::{step_robot, AgentState, EnvState, RobotDynamics, Vec2};

/// One CSV row per simulated step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub human_px: f64,
    pub human_py: f64,
    pub human_vx: f64,
    pub human_vy: f64,
    pub robot_px: f64,
    pub robot_py: f64,
    pub robot_vx: f64,
    pub robot_vy: f64,
    pub human_goal_x: f64,
    pub human_goal_y: f64,
    pub robot_goal_x: f64,
    pub robot_goal_y: f64,
    pub distance: f64,
    pub u_ref_x: f64,
    pub u_ref_y: f64,
    pub u_safe_x: f64,
    pub u_safe_y: f64,
    pub intervened: bool,
    pub infeasible: bool,
    pub phi: f64,
    pub lambda_sea: f64,
    pub runtime_error: f64,
    pub cov_norm: f64,
    pub clamped: bool,
    /// Index of the chosen grid candidate (exploring controllers only).
    pub choice: Option<usize>,
    pub tie: Option<bool>,
    pub j_min: Option<f64>,
    pub j_max: Option<f64>,
    pub held_out: Option<f64>,
    pub reachable: Option<f64>,
    /// Error of the un-adapted model on the same step.
    pub frozen_error: Option<f64>,
}

impl StepRecord {
    pub fn env_fields(env: &EnvState) -> Self {
        Self {
            k: env.k,
            human_px: env.human.pos.x,
            human_py: env.human.pos.y,
            human_vx: env.human.vel.x,
            human_vy: env.human.vel.y,
            robot_px: env.robot.pos.x,
            robot_py: env.robot.pos.y,
            robot_vx: env.robot.vel.x,
            robot_vy: env.robot.vel.y,
            human_goal_x: env.human_goal.x,
            human_goal_y: env.human_goal.y,
            robot_goal_x: env.robot_goal.x,
            robot_goal_y: env.robot_goal.y,
            distance: env.distance(),
            u_ref_x: 0.0,
            u_ref_y: 0.0,
            u_safe_x: 0.0,
            u_safe_y: 0.0,
            intervened: false,
            infeasible: false,
            phi: 0.0,
            lambda_sea: 0.0,
            runtime_error: 0.0,
            cov_norm: 0.0,
            clamped: false,
            choice: None,
            tie: None,
            j_min: None,
            j_max: None,
            held_out: None,
            reachable: None,
            frozen_error: None,
        }
    }
}

pub fn count_interventions(records: &[StepRecord]) -> usize {
    records.iter().filter(|r| r.intervened).count()
}

/// Fixed rollouts of the true human against the goal-focused robot. Each
/// trajectory holds `horizon + 1` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutSuite {
    pub trajectories: Vec<Vec<Frame>>,
    pub horizon: usize,
}

impl HeldOutSuite {
    pub fn generate(
        human: &PotentialFieldHuman,
        layout: &ScenarioLayout,
        dyn_: &RobotDynamics,
        neutral: &RiskPreference,
        count: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajectories = (0..count)
            .map(|_| {
                let ic = layout.sample(&mut rng);
                rollout(human, &ic, dyn_, neutral, horizon, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trajectories,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Closed loop with the neutral robot and no safety monitor.
pub fn rollout<R: Rng + ?Sized>(
    human: &PotentialFieldHuman,
    ic: &crate::config::InitialConditions,
    dyn_: &RobotDynamics,
    neutral: &RiskPreference,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Frame>> {
    let schedule = ic.human_schedule();
    let mut env = EnvState {
        human: ic.human,
        robot: ic.robot,
        human_goal: schedule.goal_at(0),
        robot_goal: ic.robot_goal,
        k: 0,
    };
    let mut frames = Vec::with_capacity(horizon + 1);
    for k in 0..horizon {
        env.k = k;
        env.human_goal = schedule.goal_at(k);
        frames.push(Frame {
            human: env.human,
            robot: env.robot,
            goal: env.human_goal,
        });
        let u = risk_neutral(neutral, dyn_, &env.robot, &env.robot_goal);
        let (h_next, _) = step_human(human, &env, rng);
        env.robot = step_robot(dyn_, &env.robot, &u)?;
        env.human = h_next;
    }
    env.human_goal = schedule.goal_at(horizon);
    frames.push(Frame {
        human: env.human,
        robot: env.robot,
        goal: env.human_goal,
    });
    Ok(frames)
}

/// Mean one-step error of a frozen model over every step of the suite.
pub fn held_out_error(
    belief: &BeliefState,
    model: &HumanModel,
    suite: &HeldOutSuite,
) -> Result<f64> {
    let window = model.window_len();
    let mut total = 0.0;
    let mut count = 0usize;
    for traj in &suite.trajectories {
        for k in 0..traj.len().saturating_sub(1) {
            let start = (k + 1).saturating_sub(window);
            let obs = model.observe(belief, &traj[start..=k])?;
            let pred = predict_observation(belief, &obs)?;
            total += (traj[k + 1].human.to_vec4() - pred.x_hat_next).norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("held-out suite"));
    }
    Ok(total / count as f64)
}

/// Robot positions on a square grid centred on the human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceGrid {
    pub half_width: f64,
    pub n: usize,
}

impl InfluenceGrid {
    pub fn points(&self, center: &Vec2) -> Vec<Vec2> {
        let n = self.n.max(2);
        let step = 2.0 * self.half_width / (n - 1) as f64;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(
                    center
                        + Vec2::new(
                            -self.half_width + step * i as f64,
                            -self.half_width + step * j as f64,
                        ),
                );
            }
        }
        out
    }
}

/// Full-state change of the noiseless human in one step, with the goal
/// placed at the human so only the robot's repulsion acts. One value per
/// grid point (robot at rest there).
pub fn influence_map(human: &PotentialFieldHuman, x_h: &AgentState, points: &[Vec2]) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let (next, _) = human.mean_step(x_h, &AgentState::at_rest(*p), &x_h.pos);
            (next.to_vec4() - x_h.to_vec4()).norm()
        })
        .collect()
}

/// Area of positions reachable in one step with controls from the safe set.
///
/// Controls are sampled uniformly in the box; the raster is anchored to the
/// bounding box of all sampled outcomes (safe or not), so a larger safe set
/// can only occupy more cells.
#[allow(clippy::too_many_arguments)]
pub fn reachable_set_size(
    env: &EnvState,
    index: &SafetyIndex,
    prediction: &Prediction,
    params: &SafetyIndexParams,
    dyn_: &RobotDynamics,
    n_u: usize,
    grid_res: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if n_u < 100 || !(grid_res > 0.0) {
        return Err(Error::Config(
            "reachable set needs n_u >= 100 and grid_res > 0".into(),
        ));
    }
    let set = safe_control_set_from_index(params, env, index, prediction, dyn_);
    let b = dyn_.control_bounds;
    let mut pts = Vec::with_capacity(n_u);
    let mut keep = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        let u = Vec2::new(rng.random_range(-b.x..=b.x), rng.random_range(-b.y..=b.y));
        pts.push(step_robot(dyn_, &env.robot, &u)?.pos);
        keep.push(set.contains(&u));
    }
    let min = pts
        .iter()
        .fold(Vec2::repeat(f64::INFINITY), |m, p| m.inf(p));
    let cells: HashSet<(i64, i64)> = pts
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| {
            (
                ((p.x - min.x) / grid_res).floor() as i64,
                ((p.y - min.y) / grid_res).floor() as i64,
            )
        })
        .collect();
    Ok(cells.len() as f64 * grid_res * grid_res)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Last logged held-out value of an episode.
pub fn final_held_out(records: &[StepRecord]) -> Option<f64> {
    records.iter().rev().find_map(|r| r.held_out)
}

pub fn mean_reachable(records: &[StepRecord]) -> Option<f64> {
    let v: Vec<f64> = records.iter().filter_map(|r| r.reachable).collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Mean runtime error over the last `n` steps.
pub fn tail_runtime_error(records: &[StepRecord], n: usize) -> f64 {
    let start = records.len().saturating_sub(n);
    mean(
        &records[start..]
            .iter()
            .map(|r| r.runtime_error)
            .collect::<Vec<_>>(),
    )
}

pub fn tail_frozen_error(records: &[StepRecord], n: usize) -> Option<f64> {
    let start = records.len().saturating_sub(n);
    let v: Option<Vec<f64>> = records[start..].iter().map(|r| r.frozen_error).collect();
    v.map(|v| mean(&v))
}
