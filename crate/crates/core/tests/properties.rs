//! Property tests over the module invariants.

use nalgebra::{DMatrix, DVector, Matrix4};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use safe_explore::adapt::{
    predict_observation, predicted_covariance, update, virtual_update, AdaptParams, BeliefState,
    Observation, Prediction, UncertaintyMode,
};
use safe_explore::explore::{
    candidate_grid, lookahead_cost, risk_extremum, ExploreParams, Lookahead, RiskPreference,
    RiskTag,
};
use safe_explore::human::{features, HumanParams, PotentialFieldHuman};
use safe_explore::metrics::{influence_map, reachable_set_size};
use safe_explore::model::{History, HumanModel};
use safe_explore::neural::Frame;
use safe_explore::safety::{monitor, phi, safe_control_set, SafeControlSet, SafetyIndexParams};
use safe_explore::world::{
    clip_to_box, step_robot, AgentState, EnvState, RobotDynamics, Vec2, Vec4,
};

fn dyn_() -> RobotDynamics {
    RobotDynamics::double_integrator(0.1, Vec2::new(5.0, 5.0))
}

fn coord() -> impl Strategy<Value = f64> {
    -4.0..4.0
}

fn agent() -> impl Strategy<Value = AgentState> {
    (coord(), coord(), -2.0..2.0, -2.0..2.0)
        .prop_map(|(x, y, vx, vy)| AgentState::new(Vec2::new(x, y), Vec2::new(vx, vy)))
}

/// Two agents at least `0.2` m apart.
fn pair() -> impl Strategy<Value = (AgentState, AgentState)> {
    (agent(), agent()).prop_filter("agents too close", |(h, r)| (h.pos - r.pos).norm() > 0.2)
}

fn env_of(h: AgentState, r: AgentState, goal: Vec2) -> EnvState {
    EnvState {
        human: h,
        robot: r,
        human_goal: goal,
        robot_goal: Vec2::zeros(),
        k: 0,
    }
}

fn spd(seed: u64, n: usize, scale: f64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a * a.transpose() + DMatrix::identity(n, n) * 0.05) * scale
}

fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    let sym = (m - m.transpose()).amax() <= tol * (1.0 + m.amax());
    sym && m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .all(|&e| e >= -tol * (1.0 + m.amax()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn factorization_reproduces_noiseless_step((h, r) in pair(), gx in coord(), gy in coord(), gamma in 0.0..80.0) {
        let human = PotentialFieldHuman::new(&HumanParams { gamma, ..HumanParams::default() }, 0.1).noiseless();
        let goal = Vec2::new(gx, gy);
        let (a, b) = human.ground_truth_params();
        let f = features(&h, &r, &goal);
        let linear = a * h.to_vec4() + b * f.values;
        let (next, _) = human.mean_step(&h, &r, &goal);
        prop_assert!((next.to_vec4() - linear).norm() < 1e-10);
    }

    #[test]
    fn doubling_distance_halves_repulsion((h, r) in pair()) {
        let far = AgentState::new(h.pos + (r.pos - h.pos) * 2.0, r.vel);
        let g = h.pos;
        let near = features(&h, &r, &g).repulsion().norm();
        let double = features(&h, &far, &g).repulsion().norm();
        prop_assert!((double - near / 2.0).abs() < 1e-12 * near.max(1.0));
    }

    #[test]
    fn robot_influence_monotone_in_gamma((h, r) in pair(), g1 in 0.0..60.0, dg in 0.0..40.0) {
        let p = HumanParams::default();
        let lo = PotentialFieldHuman::new(&p, 0.1).with_gamma(g1);
        let hi = PotentialFieldHuman::new(&p, 0.1).with_gamma(g1 + dg);
        let rest = AgentState::at_rest(h.pos);
        let a = influence_map(&lo, &rest, &[r.pos])[0];
        let b = influence_map(&hi, &rest, &[r.pos])[0];
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn covariances_stay_symmetric_psd(seed in 0u64..10_000, lambda in 0.9..=1.0f64, s0 in 0.0..2.0f64,
                                      feat in prop::collection::vec(-3.0..3.0f64, 4), steps in 1usize..6) {
        let params = AdaptParams { forgetting: lambda, sigma0: s0, ..AdaptParams::default() };
        let mut b = BeliefState::new(DVector::zeros(16), &params, Matrix4::identity() * 1e-4, UncertaintyMode::Full);
        b.gain = spd(seed, 16, 1.0);
        for i in 0..steps {
            let phi_v = DVector::from_iterator(4, feat.iter().map(|v| v * (1.0 + i as f64 * 0.3)));
            let obs = Observation::new(phi_v, Vec4::zeros());
            let pred = predict_observation(&b, &obs).unwrap();
            let y = AgentState::from_vec4(&(pred.x_hat_next + Vec4::repeat(0.01)));
            b = update(&b, &y, &obs.matrix(), &pred);
            prop_assert!(is_psd(&b.sigma_tt, 1e-9));
            prop_assert!(is_psd(&b.gain, 1e-9));
            prop_assert!(is_psd(&DMatrix::from_column_slice(4, 4, pred.sigma_h_next.as_slice()), 1e-9));
        }
    }

    #[test]
    fn virtual_update_leaves_estimate(seed in 0u64..10_000, feat in prop::collection::vec(-3.0..3.0f64, 4)) {
        let theta = DVector::from_fn(16, |i, _| (i as f64 * 0.37 + seed as f64).sin());
        let b = BeliefState::new(theta.clone(), &AdaptParams::default(), Matrix4::identity() * 1e-4, UncertaintyMode::Full);
        let phi_m = Observation::new(DVector::from_vec(feat), Vec4::zeros()).matrix();
        let sh = predicted_covariance(&phi_m, &b.sigma_tt, &b.noise_cov);
        let v = virtual_update(&b, &phi_m, &sh);
        prop_assert_eq!(v.theta_hat, theta);
    }

    #[test]
    fn monitor_output_is_admissible(lx in -3.0..3.0f64, ly in -3.0..3.0f64, s in -10.0..10.0f64,
                                    bx in 0.5..5.0f64, by in 0.5..5.0f64, ux in -8.0..8.0f64, uy in -8.0..8.0f64) {
        let set = SafeControlSet { l: Vec2::new(lx, ly), s, phi_value: 0.0, lambda_sea: 0.0 };
        let b = Vec2::new(bx, by);
        let u_ref = Vec2::new(ux, uy);
        let out = monitor(&set, &u_ref, &b);
        prop_assert!(out.u_safe.x.abs() <= bx + 1e-12 && out.u_safe.y.abs() <= by + 1e-12);
        if !out.infeasible {
            prop_assert!(set.l.dot(&out.u_safe) <= s + 1e-9 * (1.0 + s.abs()));
        }
        let clipped = clip_to_box(&u_ref, &b);
        if set.contains(&clipped) {
            prop_assert_eq!(out.u_safe, clipped);
        }
        // idempotent
        let again = monitor(&set, &out.u_safe, &b);
        if !out.infeasible {
            prop_assert!((again.u_safe - out.u_safe).norm() < 1e-9);
        }
    }

    #[test]
    fn more_uncertainty_never_enlarges_safe_set((h, r) in pair(), s1 in 0.0..0.1f64, extra in 0.0..0.1f64) {
        let p = SafetyIndexParams::default();
        let env = env_of(h, r, Vec2::zeros());
        let pred = |s: f64| Prediction { x_hat_next: h.to_vec4(), sigma_h_next: Matrix4::identity() * s };
        let a = safe_control_set(&p, &env, &pred(s1), &dyn_(), 0.0).unwrap();
        let b = safe_control_set(&p, &env, &pred(s1 + extra), &dyn_(), 0.0).unwrap();
        prop_assert!(b.s <= a.s + 1e-12);
        prop_assert!(b.lambda_sea >= a.lambda_sea - 1e-12);
    }

    #[test]
    fn reachable_set_monotone_in_uncertainty((h, r) in pair(), s1 in 0.0..0.05f64, extra in 0.0..0.05f64, seed in 0u64..1000) {
        let p = SafetyIndexParams::default();
        let env = env_of(h, r, Vec2::zeros());
        let idx = phi(&p, &env, 0.0).unwrap();
        let pred = |s: f64| Prediction { x_hat_next: h.to_vec4(), sigma_h_next: Matrix4::identity() * s };
        let size = |s: f64| reachable_set_size(&env, &idx, &pred(s), &p, &dyn_(), 400, 0.0025,
                                               &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(size(s1 + extra) <= size(s1));
    }

    #[test]
    fn phi_gradient_matches_central_differences((h, r) in pair()) {
        let p = SafetyIndexParams::default();
        let env = env_of(h, r, Vec2::zeros());
        let idx = phi(&p, &env, 0.2).unwrap();
        let eps = 1e-6;
        for i in 0..4 {
            let mut e = env;
            let mut x = e.robot.to_vec4();
            x[i] += eps;
            e.robot = AgentState::from_vec4(&x);
            let up = phi(&p, &e, 0.2).unwrap().phi;
            x[i] -= 2.0 * eps;
            e.robot = AgentState::from_vec4(&x);
            let down = phi(&p, &e, 0.2).unwrap().phi;
            let num = (up - down) / (2.0 * eps);
            prop_assert!((num - idx.grad_robot[i]).abs() <= 1e-5 * (1.0 + idx.grad_robot.norm()));
        }
        prop_assert_eq!(idx.grad_human, -idx.grad_robot);
    }

    #[test]
    fn robot_step_matches_closed_form(x in agent(), ux in -5.0..5.0f64, uy in -5.0..5.0f64) {
        let u = Vec2::new(ux, uy);
        let next = step_robot(&dyn_(), &x, &u).unwrap();
        let ts = 0.1;
        prop_assert!((next.pos - (x.pos + x.vel * ts + u * (0.5 * ts * ts))).norm() < 1e-12);
        prop_assert!((next.vel - (x.vel + u * ts)).norm() < 1e-12);
    }

    #[test]
    fn seeking_cost_dominates_averse_cost((h, r) in pair(), gx in coord(), gy in coord(), s0 in 1e-4..1.0f64) {
        let hp = HumanParams::default();
        let truth = PotentialFieldHuman::new(&hp, 0.1);
        let (a, b) = truth.ground_truth_params();
        let params = AdaptParams { sigma0: s0, ..AdaptParams::default() };
        let belief = BeliefState::linear(UncertaintyMode::Interactive, &a, &b, &params, hp.noise_cov(),
                                         &mut ChaCha8Rng::seed_from_u64(1));
        let env = env_of(h, r, Vec2::new(gx, gy));
        let mut hist = History::new(1);
        hist.push(Frame { human: h, robot: r, goal: env.human_goal });
        let model = HumanModel::Linear;
        let obs = model.observe(&belief, hist.frames()).unwrap();
        let pred = predict_observation(&belief, &obs).unwrap();
        let la = Lookahead::new(&env, &belief, &obs, &pred, &hist);
        let ex = ExploreParams::default();
        let seek = risk_extremum(&RiskPreference::new(RiskTag::Seeking, &ex, &dyn_()).unwrap(), &env, &la, &dyn_(), &model).unwrap();
        let avoid = risk_extremum(&RiskPreference::new(RiskTag::Averse, &ex, &dyn_()).unwrap(), &env, &la, &dyn_(), &model).unwrap();
        let j = |u: &Vec2| la.cost(u, &dyn_(), &model).unwrap();
        prop_assert!(j(&seek.u) >= j(&avoid.u));
        // the lookahead object and the one-shot helper agree
        let u = candidate_grid(25, &Vec2::new(5.0, 5.0))[7];
        prop_assert_eq!(j(&u), lookahead_cost(&u, &env, &belief, &dyn_(), &model, &hist).unwrap());
        // choices come from the box
        for s in [&seek, &avoid] {
            prop_assert!(s.u.x.abs() <= 5.0 && s.u.y.abs() <= 5.0);
            prop_assert_eq!(s.costs.len(), 26);
        }
    }
}
