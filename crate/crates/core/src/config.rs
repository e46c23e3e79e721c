//! Scenario description, initial-condition sampling and validation.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{AdaptParams, UncertaintyMode};
use crate::error::{Error, Result};
use crate::explore::{ExploreParams, RiskTag};
use crate::human::HumanParams;
use crate::safety::SafetyIndexParams;
use crate::world::{AgentState, GoalSchedule, RobotDynamics, Vec2};

pub const SCHEMA_VERSION: u32 = 1;

/// Which model the robot adapts online.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanSource {
    Analytical,
    Neural,
}

impl HumanSource {
    pub fn name(&self) -> &'static str {
        match self {
            HumanSource::Analytical => "analytical",
            HumanSource::Neural => "neural",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    pub human: AgentState,
    pub robot: AgentState,
    /// `(activation step, goal)`, first entry active from step 0.
    pub human_goals: Vec<(usize, Vec2)>,
    pub robot_goal: Vec2,
}

impl InitialConditions {
    pub fn human_schedule(&self) -> GoalSchedule {
        GoalSchedule {
            entries: self.human_goals.clone(),
        }
    }

    pub fn sample_default<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ScenarioLayout::default().sample(rng)
    }
}

/// Crossing layout: the human walks left to right, the robot bottom to top,
/// so goal-focused paths meet near the middle of the arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioLayout {
    pub arena_half_width: f64,
    /// Lateral jitter of starts and goals.
    pub jitter: f64,
    /// Step at which the human's goal switches; `None` keeps one goal.
    pub goal_switch_step: Option<usize>,
    /// Overrides sampling when present.
    pub initial: Option<InitialConditions>,
}

impl Default for ScenarioLayout {
    fn default() -> Self {
        Self {
            arena_half_width: 4.0,
            jitter: 2.0,
            goal_switch_step: Some(50),
            initial: None,
        }
    }
}

impl ScenarioLayout {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InitialConditions {
        // always draw, so the stream position does not depend on the override
        let a = self.arena_half_width;
        let j = self.jitter;
        let mut u = |lo: f64, hi: f64| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let human = AgentState::at_rest(Vec2::new(-a, u(-j, j)));
        let goal1 = Vec2::new(a, u(-j, j));
        let robot = AgentState::at_rest(Vec2::new(u(-j, j), -a));
        let robot_goal = Vec2::new(u(-j, j), a);
        let goal2 = Vec2::new(u(-a + 1.0, a - 1.0), u(-a + 1.0, a - 1.0));
        if let Some(ic) = &self.initial {
            return ic.clone();
        }
        let mut human_goals = vec![(0, goal1)];
        if let Some(s) = self.goal_switch_step {
            human_goals.push((s, goal2));
        }
        InitialConditions {
            human,
            robot,
            human_goals,
            robot_goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricParams {
    /// Held-out error is evaluated every this many steps (0 disables).
    pub held_out_every: usize,
    pub suite_size: usize,
    pub suite_horizon: usize,
    pub suite_seed: u64,
    pub reachable_set: bool,
    pub n_u: usize,
    pub grid_res: f64,
    /// Also log the error of the un-adapted model on every step.
    pub frozen_replay: bool,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            held_out_every: 10,
            suite_size: 10,
            suite_horizon: 100,
            suite_seed: 7,
            reachable_set: false,
            n_u: 2000,
            grid_res: 0.0025,
            frozen_replay: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon: usize,
    pub ts: f64,
    pub control_bound: f64,
    pub risk: RiskTag,
    pub uncertainty: UncertaintyMode,
    pub human_model: HumanSource,
    /// Trained network file, required for `human_model = neural`.
    pub model_path: Option<PathBuf>,
    pub human: HumanParams,
    pub safety_enabled: bool,
    pub safety: SafetyIndexParams,
    /// Disable to keep the initial model frozen.
    pub adapt_enabled: bool,
    pub adapt: AdaptParams,
    pub explore: ExploreParams,
    pub layout: ScenarioLayout,
    pub metrics: MetricParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            horizon: 100,
            ts: 0.1,
            control_bound: 5.0,
            risk: RiskTag::Neutral,
            uncertainty: UncertaintyMode::Interactive,
            human_model: HumanSource::Analytical,
            model_path: None,
            human: HumanParams::default(),
            safety_enabled: true,
            safety: SafetyIndexParams::default(),
            adapt_enabled: true,
            adapt: AdaptParams::default(),
            explore: ExploreParams::default(),
            layout: ScenarioLayout::default(),
            metrics: MetricParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::Config(format!(
                "ts must be positive, got {}",
                self.ts
            )));
        }
        if !(self.control_bound > 0.0 && self.control_bound.is_finite()) {
            return Err(Error::Config("control_bound must be positive".into()));
        }
        if !(self.human.gamma >= 0.0) {
            return Err(Error::Config("gamma must be nonnegative".into()));
        }
        let h = &self.human;
        if ![h.k_p, h.k_d, h.k_repel, h.noise_pos_std, h.noise_vel_std]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return Err(Error::Config(
                "human gains and noise must be finite and nonnegative".into(),
            ));
        }
        self.safety_params().validate()?;
        self.adapt.validate()?;
        let m = &self.metrics;
        if m.reachable_set && (m.n_u < 100 || !(m.grid_res > 0.0)) {
            return Err(Error::Config(
                "reachable set needs n_u >= 100 and grid_res > 0".into(),
            ));
        }
        if m.held_out_every > 0 && (m.suite_size == 0 || m.suite_horizon == 0) {
            return Err(Error::Config("held-out suite must be non-empty".into()));
        }
        if let Some(ic) = &self.layout.initial {
            if !ic.human.is_finite() || !ic.robot.is_finite() {
                return Err(Error::Config("initial states must be finite".into()));
            }
            if ic.human_goals.is_empty() {
                return Err(Error::Config(
                    "initial human_goals must be non-empty".into(),
                ));
            }
        }
        crate::explore::RiskPreference::new(self.risk, &self.explore, &self.dynamics())?;
        Ok(())
    }

    pub fn dynamics(&self) -> RobotDynamics {
        RobotDynamics::double_integrator(self.ts, Vec2::repeat(self.control_bound))
    }

    /// Safety parameters with the scenario's sampling time.
    pub fn safety_params(&self) -> SafetyIndexParams {
        SafetyIndexParams {
            ts: self.ts,
            ..self.safety.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
