use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adapt::{predict_observation, update, BeliefState, UncertaintyMode};
use crate::config::{HumanSource, ScenarioConfig};
use crate::error::{Error, Result};
use crate::explore::{risk_extremum, risk_neutral, Lookahead, RiskPreference, RiskTag};
use crate::human::{step_human, PotentialFieldHuman};
use crate::metrics::{held_out_error, reachable_set_size, HeldOutSuite, StepRecord};
use crate::model::{History, HumanModel};
use crate::neural::{Frame, MlpModel};
use crate::safety::{monitor, phi, safe_control_set_from_index};
use crate::world::{step_robot, EnvState};

const STREAM_INIT: u64 = 0;
const STREAM_THETA: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_REACH: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Owns everything one closed-loop episode needs besides its own mutable
/// state: the validated config, the optional network and the held-out suite.
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    cfg: ScenarioConfig,
    network: Option<Arc<MlpModel>>,
    suite: Option<Arc<HeldOutSuite>>,
}

impl EpisodeRunner {
    /// Validates the config and loads the network file for neural runs.
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let network = match cfg.human_model {
            HumanSource::Analytical => None,
            HumanSource::Neural => {
                let path = cfg
                    .model_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("neural human model needs model_path".into()))?;
                Some(Arc::new(MlpModel::load(path)?))
            }
        };
        Ok(Self {
            cfg,
            network,
            suite: None,
        })
    }

    pub fn with_network(cfg: ScenarioConfig, network: Arc<MlpModel>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            network: Some(network),
            suite: None,
        })
    }

    pub fn with_suite(mut self, suite: Arc<HeldOutSuite>) -> Self {
        self.suite = Some(suite);
        self
    }

    pub fn reseeded(mut self, seed: u64) -> Self {
        self.cfg.seed = seed;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn truth(&self) -> PotentialFieldHuman {
        PotentialFieldHuman::new(&self.cfg.human, self.cfg.ts)
    }

    pub fn model(&self) -> HumanModel {
        match (&self.cfg.human_model, &self.network) {
            (HumanSource::Neural, Some(n)) => HumanModel::Neural(n.clone()),
            _ => HumanModel::Linear,
        }
    }

    /// The held-out suite implied by the config (ignores any fixed initial
    /// conditions so the suite has distinct rollouts).
    pub fn build_suite(&self) -> Result<HeldOutSuite> {
        let cfg = &self.cfg;
        let dyn_ = cfg.dynamics();
        let neutral = RiskPreference::new(RiskTag::Neutral, &cfg.explore, &dyn_)?;
        let mut layout = cfg.layout.clone();
        layout.initial = None;
        HeldOutSuite::generate(
            &self.truth(),
            &layout,
            &dyn_,
            &neutral,
            cfg.metrics.suite_size,
            cfg.metrics.suite_horizon,
            cfg.metrics.suite_seed,
        )
    }

    pub fn initial_belief(&self) -> Result<BeliefState> {
        let cfg = &self.cfg;
        let truth = self.truth();
        let w = cfg.human.noise_cov();
        match &self.model() {
            HumanModel::Linear => {
                let (a, b) = truth.ground_truth_params();
                let mut rng = stream(cfg.seed, STREAM_THETA);
                Ok(BeliefState::linear(
                    cfg.uncertainty,
                    &a,
                    &b,
                    &cfg.adapt,
                    w,
                    &mut rng,
                ))
            }
            HumanModel::Neural(net) => Ok(BeliefState::new(
                net.last_layer_theta(),
                &cfg.adapt,
                w,
                UncertaintyMode::Full,
            )),
        }
    }

    pub fn run(&self) -> Result<Vec<StepRecord>> {
        self.run_with_belief().map(|(r, _)| r)
    }

    /// Records plus the final belief.
    pub fn run_with_belief(&self) -> Result<(Vec<StepRecord>, BeliefState)> {
        let cfg = &self.cfg;
        let dyn_ = cfg.dynamics();
        let sp = cfg.safety_params();
        let truth = self.truth();
        let model = self.model();
        let pref = RiskPreference::new(cfg.risk, &cfg.explore, &dyn_)?;
        let neutral = RiskPreference::new(RiskTag::Neutral, &cfg.explore, &dyn_)?;

        let suite = match (&self.suite, cfg.metrics.held_out_every) {
            (_, 0) => None,
            (Some(s), _) => Some(s.clone()),
            (None, _) => Some(Arc::new(self.build_suite()?)),
        };

        let ic = cfg.layout.sample(&mut stream(cfg.seed, STREAM_INIT));
        let schedule = ic.human_schedule();
        let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
        let mut reach_rng = stream(cfg.seed, STREAM_REACH);

        let mut belief = self.initial_belief()?;
        let frozen = cfg.metrics.frozen_replay.then(|| belief.clone());
        let mut history = History::new(model.window_len());
        let mut env = EnvState {
            human: ic.human,
            robot: ic.robot,
            human_goal: schedule.goal_at(0),
            robot_goal: ic.robot_goal,
            k: 0,
        };
        let mut lambda_prev = 0.0;
        let mut records = Vec::with_capacity(cfg.horizon);

        for k in 0..cfg.horizon {
            env.k = k;
            env.human_goal = schedule.goal_at(k);
            history.push(Frame {
                human: env.human,
                robot: env.robot,
                goal: env.human_goal,
            });
            let at = |e: Error| Error::NumericalFailure {
                step: k,
                what: e.to_string(),
            };

            let obs = model.observe(&belief, history.frames())?;
            let pred = predict_observation(&belief, &obs)?;
            let mut rec = StepRecord::env_fields(&env);

            let u_ref = match pref.tag {
                RiskTag::Neutral => risk_neutral(&neutral, &dyn_, &env.robot, &env.robot_goal),
                _ => {
                    let la = Lookahead::new(&env, &belief, &obs, &pred, &history);
                    let sel = risk_extremum(&pref, &env, &la, &dyn_, &model).map_err(at)?;
                    rec.choice = Some(sel.index);
                    rec.tie = Some(sel.tie);
                    rec.j_min = sel.costs.iter().cloned().reduce(f64::min);
                    rec.j_max = sel.costs.iter().cloned().reduce(f64::max);
                    dyn_.clip(&sel.u)
                }
            };

            let index = phi(&sp, &env, lambda_prev).map_err(at)?;
            let set = safe_control_set_from_index(&sp, &env, &index, &pred, &dyn_);
            let u_safe = if cfg.safety_enabled {
                let out = monitor(&set, &u_ref, &dyn_.control_bounds);
                rec.intervened = out.intervened;
                rec.infeasible = out.infeasible;
                out.u_safe
            } else {
                u_ref
            };
            lambda_prev = set.lambda_sea;
            if cfg.metrics.reachable_set {
                rec.reachable = Some(reachable_set_size(
                    &env,
                    &index,
                    &pred,
                    &sp,
                    &dyn_,
                    cfg.metrics.n_u,
                    cfg.metrics.grid_res,
                    &mut reach_rng,
                )?);
            }

            let (h_next, clamped) = step_human(&truth, &env, &mut noise_rng);
            let r_next = step_robot(&dyn_, &env.robot, &u_safe).map_err(at)?;
            if !h_next.is_finite() {
                return Err(at(Error::InvalidState("human state".into())));
            }

            rec.u_ref_x = u_ref.x;
            rec.u_ref_y = u_ref.y;
            rec.u_safe_x = u_safe.x;
            rec.u_safe_y = u_safe.y;
            rec.phi = index.phi;
            rec.lambda_sea = set.lambda_sea;
            rec.clamped = clamped;
            rec.runtime_error = (h_next.to_vec4() - pred.x_hat_next).norm();
            if let Some(f) = &frozen {
                let o = model.observe(f, history.frames())?;
                let p = predict_observation(f, &o)?;
                rec.frozen_error = Some((h_next.to_vec4() - p.x_hat_next).norm());
            }

            if cfg.adapt_enabled {
                belief = update(&belief, &h_next, &obs.matrix(), &pred);
                if !belief.theta_hat.iter().all(|v| v.is_finite())
                    || !belief.sigma_tt.iter().all(|v| v.is_finite())
                {
                    return Err(at(Error::InvalidState("belief".into())));
                }
            }
            rec.cov_norm = belief.covariance_norm();

            let every = cfg.metrics.held_out_every;
            if let Some(s) = &suite {
                if k == 0 || (k + 1) % every == 0 || k + 1 == cfg.horizon {
                    rec.held_out = Some(held_out_error(&belief, &model, s)?);
                }
            }

            records.push(rec);
            env.human = h_next;
            env.robot = r_next;
        }
        Ok((records, belief))
    }
}

pub fn run_episode(cfg: &ScenarioConfig) -> Result<Vec<StepRecord>> {
    EpisodeRunner::new(cfg.clone())?.run()
}
