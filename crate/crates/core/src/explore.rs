//! Reference controllers for the three risk preferences.
//!
//! Neutral is plain state feedback towards the robot goal. Seeking and averse
//! scan a deterministic control grid and pick the extremum of the two-step
//! parameter-covariance norm `‖Σ_θθ(k+2)‖`.

use nalgebra::{Matrix2x4, Matrix4};
use serde::{Deserialize, Serialize};

use crate::adapt::{
    covariance_norm_with, predicted_covariance, propagate, BeliefState, Observation, Prediction,
};
use crate::error::{Error, Result};
use crate::model::{History, HumanModel};
use crate::neural::Frame;
use crate::world::{goal_state, step_robot, AgentState, EnvState, RobotDynamics, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskTag {
    Neutral,
    Seeking,
    Averse,
}

impl RiskTag {
    pub fn name(&self) -> &'static str {
        match self {
            RiskTag::Neutral => "neutral",
            RiskTag::Seeking => "seeking",
            RiskTag::Averse => "averse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreParams {
    /// Position gain of the neutral feedback.
    pub k_p: f64,
    /// Velocity gain of the neutral feedback.
    pub k_d: f64,
    /// Grid size; must be a square ≥ 4.
    pub n_candidates: usize,
    /// Weight on squared distance of the next robot position to its goal.
    pub goal_bias: f64,
}

impl Default for ExploreParams {
    fn default() -> Self {
        Self {
            k_p: 2.0,
            k_d: 3.0,
            n_candidates: 25,
            goal_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskPreference {
    pub tag: RiskTag,
    pub k_fb: Matrix2x4<f64>,
    pub n_candidates: usize,
    pub goal_bias: f64,
}

impl RiskPreference {
    pub fn new(tag: RiskTag, params: &ExploreParams, dyn_: &RobotDynamics) -> Result<Self> {
        let mut k_fb = Matrix2x4::zeros();
        k_fb[(0, 0)] = params.k_p;
        k_fb[(1, 1)] = params.k_p;
        k_fb[(0, 2)] = params.k_d;
        k_fb[(1, 3)] = params.k_d;
        let side = grid_side(params.n_candidates);
        if side * side != params.n_candidates || side < 2 {
            return Err(Error::Config(format!(
                "n_candidates must be a square of at least 4, got {}",
                params.n_candidates
            )));
        }
        if !(params.goal_bias >= 0.0) {
            return Err(Error::Config("goal_bias must be nonnegative".into()));
        }
        let rho = closed_loop_radius(&k_fb, dyn_);
        if !(rho < 1.0) {
            return Err(Error::Config(format!(
                "feedback gain is not stabilizing (spectral radius {rho:.4})"
            )));
        }
        Ok(Self {
            tag,
            k_fb,
            n_candidates: params.n_candidates,
            goal_bias: params.goal_bias,
        })
    }
}

fn grid_side(n: usize) -> usize {
    (n as f64).sqrt().round() as usize
}

/// Spectral radius of `drift − input·K`.
pub fn closed_loop_radius(k_fb: &Matrix2x4<f64>, dyn_: &RobotDynamics) -> f64 {
    let a: Matrix4<f64> = dyn_.drift_matrix - dyn_.input_matrix * k_fb;
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn risk_neutral(
    pref: &RiskPreference,
    dyn_: &RobotDynamics,
    x_r: &AgentState,
    goal: &Vec2,
) -> Vec2 {
    let err = x_r.to_vec4() - goal_state(goal);
    dyn_.clip(&(-pref.k_fb * err))
}

/// The fixed grid over the control box, row by row.
pub fn candidate_grid(n_candidates: usize, bounds: &Vec2) -> Vec<Vec2> {
    let side = grid_side(n_candidates).max(2);
    let at = |i: usize, b: f64| -b + 2.0 * b * i as f64 / (side - 1) as f64;
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            out.push(Vec2::new(at(i, bounds.x), at(j, bounds.y)));
        }
    }
    out
}

/// First virtual step, shared by every candidate: the belief after a
/// zero-innovation update at `k` and the belief-mean human state at `k+1`.
#[derive(Debug, Clone)]
pub struct Lookahead {
    belief1: BeliefState,
    human_next: AgentState,
    robot: AgentState,
    goal: Vec2,
    history: History,
}

impl Lookahead {
    pub fn new(
        env: &EnvState,
        belief: &BeliefState,
        obs: &Observation,
        pred: &Prediction,
        history: &History,
    ) -> Self {
        let phi = obs.matrix();
        let belief1 = propagate(belief, &phi, &pred.sigma_h_next, None, true);
        Self {
            belief1,
            human_next: AgentState::from_vec4(&pred.x_hat_next),
            robot: env.robot,
            goal: env.human_goal,
            history: history.clone(),
        }
    }

    /// `‖Σ_θθ(k+2)‖` when `u` is applied at `k`.
    pub fn cost(&self, u: &Vec2, dyn_: &RobotDynamics, model: &HumanModel) -> Result<f64> {
        let robot1 = step_robot(dyn_, &self.robot, u)?;
        let frames = self.history.extended(Frame {
            human: self.human_next,
            robot: robot1,
            goal: self.goal,
        });
        let obs1 = model.observe(&self.belief1, &frames)?;
        let phi1 = obs1.matrix();
        let sigma_h2 = predicted_covariance(&phi1, &self.belief1.sigma_tt, &self.belief1.noise_cov);
        let b2 = propagate(&self.belief1, &phi1, &sigma_h2, None, true);
        Ok(covariance_norm_with(&b2.sigma_tt, b2.norm))
    }
}

/// Two-step covariance cost for a single candidate.
pub fn lookahead_cost(
    u: &Vec2,
    env: &EnvState,
    belief: &BeliefState,
    dyn_: &RobotDynamics,
    model: &HumanModel,
    history: &History,
) -> Result<f64> {
    let obs = model.observe(belief, history.frames())?;
    let pred = crate::adapt::predict_observation(belief, &obs)?;
    Lookahead::new(env, belief, &obs, &pred, history).cost(u, dyn_, model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub u: Vec2,
    pub index: usize,
    pub costs: Vec<f64>,
    /// More than one candidate attained the extremum.
    pub tie: bool,
}

const TIE_RTOL: f64 = 1e-12;

/// Pick the extremum over the grid plus the neutral control.
pub fn risk_extremum(
    pref: &RiskPreference,
    env: &EnvState,
    lookahead: &Lookahead,
    dyn_: &RobotDynamics,
    model: &HumanModel,
) -> Result<Selection> {
    let sign = match pref.tag {
        RiskTag::Seeking => 1.0,
        RiskTag::Averse => -1.0,
        RiskTag::Neutral => {
            return Err(Error::Config(
                "risk_extremum needs seeking or averse".into(),
            ))
        }
    };
    let mut cands = candidate_grid(pref.n_candidates, &dyn_.control_bounds);
    cands.push(risk_neutral(pref, dyn_, &env.robot, &env.robot_goal));

    let mut costs = Vec::with_capacity(cands.len());
    let mut scores = Vec::with_capacity(cands.len());
    for u in &cands {
        let j = lookahead.cost(u, dyn_, model)?;
        let mut score = sign * j;
        if pref.goal_bias > 0.0 {
            let next = step_robot(dyn_, &env.robot, u)?;
            score -= pref.goal_bias * (next.pos - env.robot_goal).norm_squared();
        }
        costs.push(j);
        scores.push(score);
    }
    let (index, tie) = select(&cands, &scores);
    Ok(Selection {
        u: cands[index],
        index,
        costs,
        tie,
    })
}

/// Index of the highest score; near-equal scores break by smallest norm,
/// then lexicographically.
pub fn select(cands: &[Vec2], scores: &[f64]) -> (usize, bool) {
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_RTOL * best.abs();
    let tied: Vec<usize> = (0..scores.len())
        .filter(|&i| best - scores[i] <= tol)
        .collect();
    let pick = *tied
        .iter()
        .min_by(|&&a, &&b| {
            let (ua, ub) = (cands[a], cands[b]);
            ua.norm_squared()
                .total_cmp(&ub.norm_squared())
                .then(ua.x.total_cmp(&ub.x))
                .then(ua.y.total_cmp(&ub.y))
        })
        .expect("at least one candidate");
    (pick, tied.len() > 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::{AdaptParams, UncertaintyMode};
    use crate::human::{HumanParams, PotentialFieldHuman};
    use nalgebra::Matrix4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dyn_() -> RobotDynamics {
        RobotDynamics::double_integrator(0.1, Vec2::new(5.0, 5.0))
    }

    fn pref(tag: RiskTag) -> RiskPreference {
        RiskPreference::new(tag, &ExploreParams::default(), &dyn_()).unwrap()
    }

    #[test]
    fn neutral_zero_at_goal() {
        let g = Vec2::new(1.0, 2.0);
        let u = risk_neutral(
            &pref(RiskTag::Neutral),
            &dyn_(),
            &AgentState::at_rest(g),
            &g,
        );
        assert_eq!(u, Vec2::zeros());
    }

    #[test]
    fn neutral_attracts() {
        let u = risk_neutral(
            &pref(RiskTag::Neutral),
            &dyn_(),
            &AgentState::at_rest(Vec2::new(1.0, 0.0)),
            &Vec2::zeros(),
        );
        assert!(u.x < 0.0);
        assert_eq!(u.y, 0.0);
    }

    #[test]
    fn neutral_converges_from_arena_starts() {
        let d = dyn_();
        let p = pref(RiskTag::Neutral);
        for (sx, sy) in [(-5.0, -5.0), (5.0, 4.0), (0.3, -4.8), (-4.0, 0.0)] {
            let goal = Vec2::new(1.0, -1.0);
            let mut x = AgentState::new(Vec2::new(sx, sy), Vec2::new(1.0, -1.0));
            for _ in 0..100 {
                let u = risk_neutral(&p, &d, &x, &goal);
                x = step_robot(&d, &x, &u).unwrap();
            }
            assert!(
                (x.pos - goal).norm() < 0.05,
                "from ({sx},{sy}): {:?}",
                x.pos
            );
        }
    }

    #[test]
    fn rejects_bad_gain_and_grid() {
        let d = dyn_();
        let bad = ExploreParams {
            k_p: -1.0,
            ..ExploreParams::default()
        };
        assert!(RiskPreference::new(RiskTag::Neutral, &bad, &d).is_err());
        let bad = ExploreParams {
            n_candidates: 7,
            ..ExploreParams::default()
        };
        assert!(RiskPreference::new(RiskTag::Neutral, &bad, &d).is_err());
    }

    #[test]
    fn grid_covers_corners() {
        let g = candidate_grid(25, &Vec2::new(5.0, 5.0));
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], Vec2::new(-5.0, -5.0));
        assert_eq!(g[24], Vec2::new(5.0, 5.0));
        assert_eq!(g[12], Vec2::zeros());
    }

    #[test]
    fn tie_break_smallest_norm_then_lexicographic() {
        let c = vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, -1.0),
        ];
        let (i, tie) = select(&c, &[2.0, 2.0, 2.0]);
        assert!(tie);
        assert_eq!(c[i], Vec2::new(0.0, -1.0));
        let (i, tie) = select(&c, &[1.0, 3.0, 2.0]);
        assert!(!tie);
        assert_eq!(i, 1);
    }

    pub(crate) fn scenario(
        mode: UncertaintyMode,
        sigma0: f64,
        w: Matrix4<f64>,
        d: f64,
    ) -> (EnvState, BeliefState, History) {
        let hp = HumanParams::default();
        let human = PotentialFieldHuman::new(&hp, 0.1);
        let (a, b) = human.ground_truth_params();
        let params = AdaptParams {
            sigma0,
            perturbation: 0.0,
            ..AdaptParams::default()
        };
        let belief =
            BeliefState::linear(mode, &a, &b, &params, w, &mut ChaCha8Rng::seed_from_u64(0));
        let env = EnvState {
            human: AgentState::at_rest(Vec2::zeros()),
            robot: AgentState::at_rest(Vec2::new(d, 0.0)),
            human_goal: Vec2::new(0.0, 3.0),
            robot_goal: Vec2::new(d, 0.0),
            k: 0,
        };
        let mut h = History::new(1);
        h.push(Frame {
            human: env.human,
            robot: env.robot,
            goal: env.human_goal,
        });
        (env, belief, h)
    }

    #[test]
    fn identical_candidates_identical_cost() {
        let (env, belief, h) = scenario(
            UncertaintyMode::Interactive,
            1.0,
            Matrix4::identity() * 1e-4,
            2.0,
        );
        let m = HumanModel::Linear;
        let u = Vec2::new(1.0, -2.0);
        let a = lookahead_cost(&u, &env, &belief, &dyn_(), &m, &h).unwrap();
        let b = lookahead_cost(&u, &env, &belief, &dyn_(), &m, &h).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn zero_uncertainty_zero_cost() {
        let (env, belief, h) = scenario(UncertaintyMode::Interactive, 0.0, Matrix4::zeros(), 2.0);
        let m = HumanModel::Linear;
        for u in candidate_grid(25, &Vec2::new(5.0, 5.0)) {
            assert_eq!(
                lookahead_cost(&u, &env, &belief, &dyn_(), &m, &h).unwrap(),
                0.0
            );
        }
        let la = {
            let obs = m.observe(&belief, h.frames()).unwrap();
            let pred = crate::adapt::predict_observation(&belief, &obs).unwrap();
            Lookahead::new(&env, &belief, &obs, &pred, &h)
        };
        let sel = risk_extremum(&pref(RiskTag::Seeking), &env, &la, &dyn_(), &m).unwrap();
        assert!(sel.tie);
        assert_eq!(sel.u, Vec2::zeros());
    }

    #[test]
    fn toward_human_shrinks_cost_with_unit_prior() {
        // human at its goal: features are pure repulsion, so candidates differ
        // only in excitation magnitude, and with F = Σ = I more excitation
        // contracts the covariance
        let (mut env, belief, _) = scenario(
            UncertaintyMode::Interactive,
            1.0,
            Matrix4::identity() * 1e-4,
            1.5,
        );
        env.human_goal = env.human.pos;
        let mut h = History::new(1);
        h.push(Frame {
            human: env.human,
            robot: env.robot,
            goal: env.human_goal,
        });
        let m = HumanModel::Linear;
        let toward = lookahead_cost(&Vec2::new(-5.0, 0.0), &env, &belief, &dyn_(), &m, &h).unwrap();
        let away = lookahead_cost(&Vec2::new(5.0, 0.0), &env, &belief, &dyn_(), &m, &h).unwrap();
        assert!(toward < away, "toward {toward} away {away}");
    }

    #[test]
    fn intrinsic_mode_is_indifferent() {
        let (env, belief, h) = scenario(
            UncertaintyMode::Intrinsic,
            1.0,
            Matrix4::identity() * 1e-4,
            1.5,
        );
        let m = HumanModel::Linear;
        let base = lookahead_cost(&Vec2::zeros(), &env, &belief, &dyn_(), &m, &h).unwrap();
        for u in candidate_grid(25, &Vec2::new(5.0, 5.0)) {
            let j = lookahead_cost(&u, &env, &belief, &dyn_(), &m, &h).unwrap();
            assert_eq!(j.to_bits(), base.to_bits());
        }
    }
}
