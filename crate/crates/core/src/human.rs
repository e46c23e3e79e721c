//! Simulated ground-truth human and the feature map shared with the robot's
//! linear model.
//!
//! The human is a planar double integrator driven by a potential field:
//! attraction toward its goal (PD on the full state error, the goal having zero
//! velocity) plus a repulsion from the robot scaled by `gamma / d²`. Written in
//! terms of the feature vector `[p_H − p_G ; (p_H − p_R)/d²]`, one noiseless
//! step is exactly `A_H·x_H + B_H·u_H`.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::world::{AgentState, EnvState, Vec2, Vec4};

/// Distance below which the `1/d²` repulsion is evaluated at `D_EPS`.
pub const D_EPS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanParams {
    pub k_p: f64,
    pub k_d: f64,
    /// Repulsion gain; `gamma * k_repel / d` is the push magnitude in m/s².
    pub k_repel: f64,
    pub gamma: f64,
    /// Position noise standard deviation (m).
    pub noise_pos_std: f64,
    /// Velocity noise standard deviation (m/s).
    pub noise_vel_std: f64,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            k_p: 1.0,
            k_d: 1.4,
            k_repel: 0.1,
            gamma: 30.0,
            noise_pos_std: 0.01,
            noise_vel_std: 0.02,
        }
    }
}

impl HumanParams {
    pub fn noise_cov(&self) -> Matrix4<f64> {
        let p = self.noise_pos_std * self.noise_pos_std;
        let v = self.noise_vel_std * self.noise_vel_std;
        Matrix4::from_diagonal(&Vec4::new(p, p, v, v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFieldHuman {
    /// Position block of the goal gain `K_1`.
    pub k_goal_pos: Matrix2<f64>,
    /// Velocity (damping) block of `K_1`.
    pub k_goal_vel: Matrix2<f64>,
    /// Repulsion gain `K_2`; acts on the position difference only.
    pub k_repel: Matrix2<f64>,
    pub gamma: f64,
    pub ts: f64,
    pub noise_cov: Matrix4<f64>,
}

impl PotentialFieldHuman {
    pub fn new(params: &HumanParams, ts: f64) -> Self {
        Self {
            k_goal_pos: Matrix2::identity() * params.k_p,
            k_goal_vel: Matrix2::identity() * params.k_d,
            k_repel: Matrix2::identity() * params.k_repel,
            gamma: params.gamma,
            ts,
            noise_cov: params.noise_cov(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_cov = Matrix4::zeros();
        self
    }

    /// Acceleration commanded by the potential field.
    pub fn acceleration(&self, x_h: &AgentState, x_r: &AgentState, goal: &Vec2) -> (Vec2, bool) {
        let f = features(x_h, x_r, goal);
        let a = -self.k_goal_pos * f.goal_error() - self.k_goal_vel * x_h.vel
            + self.k_repel * f.repulsion() * self.gamma;
        (a, f.clamped)
    }

    /// Noiseless next state.
    pub fn mean_step(&self, x_h: &AgentState, x_r: &AgentState, goal: &Vec2) -> (AgentState, bool) {
        let (a, clamped) = self.acceleration(x_h, x_r, goal);
        let ts = self.ts;
        let next = AgentState {
            pos: x_h.pos + x_h.vel * ts + a * (0.5 * ts * ts),
            vel: x_h.vel + a * ts,
        };
        (next, clamped)
    }

    /// Exact linear-in-features factorization `(A_H, B_H)` of `mean_step`.
    pub fn ground_truth_params(&self) -> (Matrix4<f64>, Matrix4<f64>) {
        let ts = self.ts;
        let half = 0.5 * ts * ts;
        let i2 = Matrix2::<f64>::identity();

        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<2, 2>(0, 0).copy_from(&i2);
        a.fixed_view_mut::<2, 2>(0, 2)
            .copy_from(&(i2 * ts - self.k_goal_vel * half));
        a.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&(i2 - self.k_goal_vel * ts));

        let mut b = Matrix4::zeros();
        b.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&(-self.k_goal_pos * half));
        b.fixed_view_mut::<2, 2>(0, 2)
            .copy_from(&(self.k_repel * (half * self.gamma)));
        b.fixed_view_mut::<2, 2>(2, 0)
            .copy_from(&(-self.k_goal_pos * ts));
        b.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&(self.k_repel * (ts * self.gamma)));
        (a, b)
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec4 {
        sample_gaussian(&self.noise_cov, rng)
    }
}

/// Draw from `N(0, cov)` for a symmetric PSD `cov`. Always consumes four
/// normal draws so the RNG stream does not depend on `cov`.
pub fn sample_gaussian<R: Rng + ?Sized>(cov: &Matrix4<f64>, rng: &mut R) -> Vec4 {
    let z = Vec4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    if cov.iter().all(|v| *v == 0.0) {
        return Vec4::zeros();
    }
    if (0..4).all(|i| (0..4).all(|j| i == j || cov[(i, j)] == 0.0)) {
        return Vec4::from_fn(|i, _| cov[(i, i)].max(0.0).sqrt() * z[i]);
    }
    let eig = SymmetricEigen::new(*cov);
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Matrix4::from_diagonal(&sqrt_vals) * z
}

/// `[p_H − p_G ; (p_H − p_R)/d²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec4,
    /// `d` fell below `D_EPS` and was clamped.
    pub clamped: bool,
}

impl FeatureVector {
    pub fn goal_error(&self) -> Vec2 {
        Vec2::new(self.values[0], self.values[1])
    }

    pub fn repulsion(&self) -> Vec2 {
        Vec2::new(self.values[2], self.values[3])
    }
}

pub fn features(x_h: &AgentState, x_r: &AgentState, goal: &Vec2) -> FeatureVector {
    let rel = x_h.pos - x_r.pos;
    let d = rel.norm();
    let clamped = d <= D_EPS;
    let repulsion = if clamped {
        // keep the direction when it exists; coincident agents push along +x
        let dir = if d > 0.0 {
            rel / d
        } else {
            Vec2::new(1.0, 0.0)
        };
        dir / D_EPS
    } else {
        rel / (d * d)
    };
    let ge = x_h.pos - goal;
    FeatureVector {
        values: Vec4::new(ge.x, ge.y, repulsion.x, repulsion.y),
        clamped,
    }
}

/// One stochastic human step. Returns the next state and the clamp flag.
pub fn step_human<R: Rng + ?Sized>(
    h: &PotentialFieldHuman,
    env: &EnvState,
    rng: &mut R,
) -> (AgentState, bool) {
    let (mean, clamped) = h.mean_step(&env.human, &env.robot, &env.human_goal);
    let noise = h.sample_noise(rng);
    (AgentState::from_vec4(&(mean.to_vec4() + noise)), clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(h: AgentState, r: AgentState, goal: Vec2) -> EnvState {
        EnvState {
            human: h,
            robot: r,
            human_goal: goal,
            robot_goal: Vec2::zeros(),
            k: 0,
        }
    }

    #[test]
    fn feature_examples() {
        let f = features(
            &AgentState::at_rest(Vec2::new(1.0, 0.0)),
            &AgentState::at_rest(Vec2::new(0.0, 0.0)),
            &Vec2::new(1.0, 0.0),
        );
        assert_eq!(f.values, Vec4::new(0.0, 0.0, 1.0, 0.0));

        let f = features(
            &AgentState::at_rest(Vec2::new(2.0, 2.0)),
            &AgentState::at_rest(Vec2::new(2.0, 0.0)),
            &Vec2::new(0.0, 2.0),
        );
        assert_eq!(f.values, Vec4::new(2.0, 0.0, 0.0, 0.5));
        assert!(!f.clamped);
    }

    #[test]
    fn doubling_distance_halves_repulsion_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let dir =
                Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
            let d: f64 = rng.random_range(0.1..10.0);
            let h = AgentState::at_rest(Vec2::zeros());
            let near = features(&h, &AgentState::at_rest(-dir * d), &Vec2::zeros());
            let far = features(&h, &AgentState::at_rest(-dir * (2.0 * d)), &Vec2::zeros());
            let ratio = far.repulsion().norm() / near.repulsion().norm();
            assert!((ratio - 0.5).abs() < 1e-12, "ratio {ratio}");
        }
    }

    #[test]
    fn coincident_agents_are_clamped() {
        let p = AgentState::at_rest(Vec2::new(0.3, 0.3));
        let f = features(&p, &p, &Vec2::zeros());
        assert!(f.clamped);
        assert!(f.values.iter().all(|v| v.is_finite()));
        assert!((f.repulsion().norm() - 1.0 / D_EPS).abs() < 1e-9);
    }

    #[test]
    fn attraction_only_equilibrium() {
        let h = PotentialFieldHuman::new(&HumanParams::default(), 0.1)
            .with_gamma(0.0)
            .noiseless();
        let goal = Vec2::new(2.0, -1.0);
        let e = env(
            AgentState::at_rest(goal),
            AgentState::at_rest(Vec2::new(2.5, -1.0)),
            goal,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, _) = step_human(&h, &e, &mut rng);
        assert_eq!(next, e.human);
    }

    #[test]
    fn repelled_away_from_adjacent_robot() {
        let h = PotentialFieldHuman::new(&HumanParams::default(), 0.1).noiseless();
        let goal = Vec2::new(0.0, 0.0);
        let e = env(
            AgentState::at_rest(goal),
            AgentState::at_rest(Vec2::new(-0.6, -0.8)),
            goal,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, _) = step_human(&h, &e, &mut rng);
        assert!(next.vel.x > 0.0 && next.vel.y > 0.0);
    }

    #[test]
    fn matches_scalar_oracle() {
        // direct transcription of the potential field without matrix types
        let p = HumanParams::default();
        let ts = 0.1;
        let h = PotentialFieldHuman::new(&p, ts).noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (hx, hy, hvx, hvy) = (
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let (rx, ry) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let (gx, gy) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let dx: f64 = hx - rx;
            let dy: f64 = hy - ry;
            let d2 = dx * dx + dy * dy;
            if d2.sqrt() <= D_EPS {
                continue;
            }
            let ax = -p.k_p * (hx - gx) - p.k_d * hvx + p.gamma * p.k_repel * dx / d2;
            let ay = -p.k_p * (hy - gy) - p.k_d * hvy + p.gamma * p.k_repel * dy / d2;
            let expect = [
                hx + ts * hvx + 0.5 * ts * ts * ax,
                hy + ts * hvy + 0.5 * ts * ts * ay,
                hvx + ts * ax,
                hvy + ts * ay,
            ];
            let e = env(
                AgentState::new(Vec2::new(hx, hy), Vec2::new(hvx, hvy)),
                AgentState::at_rest(Vec2::new(rx, ry)),
                Vec2::new(gx, gy),
            );
            let (next, _) = step_human(&h, &e, &mut rng);
            let got = next.to_vec4();
            for i in 0..4 {
                assert!((got[i] - expect[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn factorization_is_exact() {
        let h = PotentialFieldHuman::new(&HumanParams::default(), 0.1).noiseless();
        let (a, b) = h.ground_truth_params();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let xh = AgentState::new(
                Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            );
            let xr = AgentState::new(
                Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            );
            let g = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let (next, _) = h.mean_step(&xh, &xr, &g);
            let u = features(&xh, &xr, &g);
            let lin = a * xh.to_vec4() + b * u.values;
            assert!((next.to_vec4() - lin).norm() < 1e-10);
        }
    }

    #[test]
    fn gamma_zero_has_no_repulsion_columns() {
        let h = PotentialFieldHuman::new(&HumanParams::default(), 0.1).with_gamma(0.0);
        let (_, b) = h.ground_truth_params();
        assert!(b.columns(2, 2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn repulsion_columns_scale_with_gamma() {
        let base = PotentialFieldHuman::new(&HumanParams::default(), 0.1);
        let (_, b1) = base.clone().with_gamma(30.0).ground_truth_params();
        let (_, b2) = base.with_gamma(75.0).ground_truth_params();
        let r1 = b1.columns(2, 2).into_owned() * 2.5;
        let r2 = b2.columns(2, 2).into_owned();
        assert!((r1 - r2).norm() < 1e-12);
        assert_eq!(b1.columns(0, 2), b2.columns(0, 2));
    }

    #[test]
    fn robot_induced_displacement_monotone_in_gamma() {
        let base = PotentialFieldHuman::new(&HumanParams::default(), 0.1).noiseless();
        let xh = AgentState::at_rest(Vec2::zeros());
        let xr = AgentState::at_rest(Vec2::new(1.3, 0.4));
        let mut last = -1.0;
        for g in [0.0, 10.0, 30.0, 50.0, 70.0] {
            let h = base.clone().with_gamma(g);
            let (next, _) = h.mean_step(&xh, &xr, &xh.pos);
            let disp = (next.to_vec4() - xh.to_vec4()).norm();
            assert!(disp > last);
            last = disp;
        }
    }

    #[test]
    fn noise_draws_match_covariance() {
        let h = PotentialFieldHuman::new(&HumanParams::default(), 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20000;
        let mut acc = Vec4::zeros();
        for _ in 0..n {
            let w = h.sample_noise(&mut rng);
            acc += w.component_mul(&w);
        }
        acc /= n as f64;
        for i in 0..4 {
            let rel = (acc[i] - h.noise_cov[(i, i)]).abs() / h.noise_cov[(i, i)];
            assert!(rel < 0.05, "component {i}: {rel}");
        }
    }
}
