//! Energy-function safety monitor.
//!
//! Safety index `φ = d_min² + ρ − d² − k_φ·ḋ` with adaptive margin
//! `ρ = (η_R + λ^SEA)·ts`. When `φ ≥ 0` the robot control must satisfy
//! `L·u ≤ S`, which makes `φ̇ ≤ −η_R` hold with 3σ confidence under the
//! predicted human-state covariance. Below the boundary the same half-space
//! form keeps the first-order prediction `φ + ts·φ̇` nonpositive, so a single
//! sampling step cannot carry the state across. The monitor projects the
//! reference control onto that half-space intersected with the actuator box.

use serde::{Deserialize, Serialize};

use crate::adapt::Prediction;
use crate::error::{Error, Result};
use crate::world::{clip_to_box, EnvState, RobotDynamics, Vec2, Vec4};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyIndexParams {
    pub d_min: f64,
    pub k_phi: f64,
    pub eta_r: f64,
    pub lambda_0: f64,
    pub ts: f64,
}

impl Default for SafetyIndexParams {
    fn default() -> Self {
        Self {
            d_min: 1.0,
            k_phi: 1.0,
            eta_r: 0.5,
            lambda_0: 0.01,
            ts: 0.1,
        }
    }
}

impl SafetyIndexParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.k_phi > 0.0 && self.eta_r > 0.0 && self.lambda_0 >= 0.0) {
            return Err(Error::Config(
                "safety params need d_min, k_phi, eta_r > 0 and lambda_0 >= 0".into(),
            ));
        }
        if !(self.ts > 0.0) {
            return Err(Error::Config("safety ts must be positive".into()));
        }
        Ok(())
    }

    /// `ρ = (η_R + λ^SEA)·ts`.
    pub fn margin(&self, lambda_sea: f64) -> f64 {
        (self.eta_r + lambda_sea) * self.ts
    }
}

/// Safety index value and its analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyIndex {
    pub phi: f64,
    pub phi0: f64,
    pub d: f64,
    pub d_dot: f64,
    /// `∂φ/∂x_R`, ordered `(px, py, vx, vy)`.
    pub grad_robot: Vec4,
    /// `∂φ/∂x_H`.
    pub grad_human: Vec4,
}

/// Evaluate `φ` with margin built from `lambda_sea` (the previous step's value).
pub fn phi(params: &SafetyIndexParams, env: &EnvState, lambda_sea: f64) -> Result<SafetyIndex> {
    let p = env.robot.pos - env.human.pos;
    let v = env.robot.vel - env.human.vel;
    let d = p.norm();
    if !(d > 0.0) {
        return Err(Error::UndefinedGeometry(d));
    }
    let d_dot = p.dot(&v) / d;
    let rho = params.margin(lambda_sea);
    let value = params.d_min * params.d_min + rho - d * d - params.k_phi * d_dot;

    let dd_dot_dp = v / d - p * (d_dot / (d * d));
    let g_pos = -p * 2.0 - dd_dot_dp * params.k_phi;
    let g_vel = -p * (params.k_phi / d);
    let grad_robot = Vec4::new(g_pos.x, g_pos.y, g_vel.x, g_vel.y);

    Ok(SafetyIndex {
        phi: value,
        phi0: params.d_min - d,
        d,
        d_dot,
        grad_robot,
        grad_human: -grad_robot,
    })
}

/// `{u : L·u ≤ S}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeControlSet {
    pub l: Vec2,
    pub s: f64,
    pub phi_value: f64,
    pub lambda_sea: f64,
}

impl SafeControlSet {
    pub fn contains(&self, u: &Vec2) -> bool {
        self.l.dot(u) <= self.s
    }
}

/// `λ^SEA = (3/ts)·sqrt(∂φ/∂x_H · Σ_H · ∂φ/∂x_Hᵀ) + λ₀`.
pub fn lambda_sea(params: &SafetyIndexParams, index: &SafetyIndex, prediction: &Prediction) -> f64 {
    let g = index.grad_human;
    let var = (g.transpose() * prediction.sigma_h_next * g)[(0, 0)].max(0.0);
    3.0 / params.ts * var.sqrt() + params.lambda_0
}

pub fn safe_control_set(
    params: &SafetyIndexParams,
    env: &EnvState,
    prediction: &Prediction,
    dyn_: &RobotDynamics,
    margin_lambda: f64,
) -> Result<SafeControlSet> {
    let index = phi(params, env, margin_lambda)?;
    Ok(safe_control_set_from_index(
        params, env, &index, prediction, dyn_,
    ))
}

pub fn safe_control_set_from_index(
    params: &SafetyIndexParams,
    env: &EnvState,
    index: &SafetyIndex,
    prediction: &Prediction,
    dyn_: &RobotDynamics,
) -> SafeControlSet {
    let lam = lambda_sea(params, index, prediction);
    let l = (index.grad_robot.transpose() * dyn_.input_rate()).transpose();
    let rate_bound = if index.phi >= 0.0 {
        -params.eta_r
    } else {
        -index.phi / params.ts
    };
    let x_h = env.human.to_vec4();
    let human_rate = (prediction.x_hat_next - x_h) / params.ts;
    let drift = dyn_.drift_rate(&env.robot.to_vec4());
    let s = rate_bound - lam - index.grad_human.dot(&human_rate) - index.grad_robot.dot(&drift);
    SafeControlSet {
        l: Vec2::new(l[0], l[1]),
        s,
        phi_value: index.phi,
        lambda_sea: lam,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorOutcome {
    pub u_safe: Vec2,
    pub intervened: bool,
    /// The half-space misses the control box entirely; `u_safe` is the
    /// least-violating box corner.
    pub infeasible: bool,
}

const INTERVENTION_TOL: f64 = 1e-9;

/// Closest point to `u_ref` in `{L·u ≤ S} ∩ box`.
///
/// If the box projection of `u_ref` satisfies the half-space it is optimal.
/// Otherwise the half-space is active at the optimum, so the answer is the
/// projection of `u_ref` onto the segment where the line `L·u = S` crosses
/// the box.
pub fn monitor(set: &SafeControlSet, u_ref: &Vec2, bounds: &Vec2) -> MonitorOutcome {
    let clipped = clip_to_box(u_ref, bounds);
    let finish = |u: Vec2, infeasible: bool| MonitorOutcome {
        u_safe: u,
        intervened: (u - u_ref).norm() > INTERVENTION_TOL,
        infeasible,
    };
    if set.contains(&clipped) {
        return finish(clipped, false);
    }

    let l = set.l;
    let ll = l.norm_squared();
    // lowest value of L·u over the box
    let corner = Vec2::new(-l.x.signum() * bounds.x, -l.y.signum() * bounds.y);
    if ll == 0.0 || l.dot(&corner) > set.s {
        let corner = Vec2::new(
            if l.x == 0.0 { clipped.x } else { corner.x },
            if l.y == 0.0 { clipped.y } else { corner.y },
        );
        return finish(corner, true);
    }

    let base = u_ref - l * ((l.dot(u_ref) - set.s) / ll);
    let dir = Vec2::new(-l.y, l.x);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..2 {
        if dir[i].abs() < 1e-300 {
            continue;
        }
        let a = (-bounds[i] - base[i]) / dir[i];
        let b = (bounds[i] - base[i]) / dir[i];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if lo > hi {
        // only reachable through round-off at a tangent corner
        return finish(corner, true);
    }
    let t = 0.0_f64.clamp(lo, hi);
    let u = clip_to_box(&(base + dir * t), bounds);
    finish(u, false)
}
